"""One device, one iteration: how an energy budget turns into training data.

Run with ``python demos/01_device_physics.py``.
"""

import numpy as np

from fedsched.model import default_config
from fedsched.physics import (energy_per_unit, max_energy_budget, power_from_budget,
                              threshold_energy, link_budget)

cfg = default_config()
dev = cfg.devices[0]

# Each channel level has a threshold energy (below it the upload cannot finish in
# time) and a ceiling (full power, computing for whatever time is left).
print("level    gain       E_th [J]   dE_max [J]")
for k, h in enumerate(cfg.gains):
    print(f"H{k + 1}   {h:.3e}   {threshold_energy(cfg, h):8.3f}   {max_energy_budget(cfg, dev, h):8.3f}")

# Between the two, every budget maps to a unique transmit power.  Spending more
# buys a faster upload and therefore more time for local training.
h = cfg.gains[3]
unit = energy_per_unit(cfg, dev)
print("\nbudget [J]  power [W]  batch [units]")
for budget in np.arange(1.0, 7.0):
    if budget <= threshold_energy(cfg, h):
        continue
    budget = min(budget, max_energy_budget(cfg, dev, h))
    p = power_from_budget(cfg, dev, h, budget)
    b = (budget - link_budget(cfg, dev, h, p, 1).tx_energy) / unit
    print(f"{budget:9.3f}  {p:9.4f}  {b:12.4f}")
