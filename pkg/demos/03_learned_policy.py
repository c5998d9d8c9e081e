"""Train online, then look at what the learner does and how fast it settled."""

import numpy as np

from fedsched.harness import convergence_trace, policy_surface, run_episode
from fedsched.model import default_config

cfg = default_config()
rec, _, state = run_episode(cfg, "proposed", seed=0, horizon=5000, burn_in=1000,
                            return_learner=True)
print(f"utility {rec.utility:.3f}, worst outage {max(rec.outage):.3f}, "
      f"multipliers {np.round(state.multipliers, 3)}")

# Transmit power of device 0 for every channel level (rows) and battery level
# (columns).  The worst level stays silent; power grows with stored energy.
rows = policy_surface(cfg, state)
power = np.array([r[3] for r in rows]).reshape(len(cfg.channel_levels), -1)
print("\npower [W], rows H1..H5, columns battery 0..6")
print(np.array2string(power, precision=3, suppress_small=True))

# Size of the value-table update per iteration.
trace = convergence_trace(cfg, seed=0, horizon=2000)
for t in (10, 100, 500, 1500, 2000):
    print(f"t={t:5d}  |dV|_inf = {trace[t - 1][1]:.2e}")
