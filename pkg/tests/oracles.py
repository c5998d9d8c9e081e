"""Independent reference solutions used by the tests.

Nothing here calls the package's own inversion or search code.
"""

import numpy as np
from scipy import optimize

from fedsched.model import to_quanta
from fedsched.physics import (budget_from_power, energy_per_unit, max_energy_budget,
                              threshold_power)


def brentq_power(cfg, dev, h, budget):
    """Independent oracle: root of the spend curve with scipy."""
    lo, hi = threshold_power(cfg, h), dev.max_power
    if budget_from_power(cfg, dev, h, hi) <= budget:
        return hi
    return optimize.brentq(lambda p: budget_from_power(cfg, dev, h, p) - budget,
                           lo * (1 + 1e-15), hi, xtol=1e-16, rtol=1e-14)


def _batch_on_grid(cfg, dev, h, powers, joules):
    """Largest batch for each power: limited by time and by energy left after upload."""
    r = cfg.bandwidth * np.log2(1 + powers * h / cfg.noise_power)
    t_com = cfg.model_size / r
    b_time = (cfg.iteration_duration - t_com) * dev.cpu_freq / dev.cycles_per_unit
    b_energy = (joules - powers * t_com) / energy_per_unit(cfg, dev)
    b = np.minimum(b_time, b_energy)
    return np.where((t_com <= cfg.iteration_duration) & (b > 0), b, -np.inf)


def brute_force_objective(cfg, dev, h, battery, slope, grid=10_000):
    """Exhaustive search over integer budgets and a dense power grid.

    A second grid of the same size refines the best cell of the first.
    """
    q = cfg.energy_quantum
    top = min(battery, to_quanta(max_energy_budget(cfg, dev, h), q))
    powers = np.linspace(0.0, dev.max_power, grid + 1)[1:]
    step = powers[1] - powers[0]
    best = 0.0
    for e in range(1, top + 1):
        b = _batch_on_grid(cfg, dev, h, powers, e * q)
        i = int(np.argmax(b))
        if not np.isfinite(b[i]):
            continue
        fine = np.linspace(max(powers[i] - step, step / grid), min(powers[i] + step, dev.max_power), grid)
        bf = max(b[i], float(_batch_on_grid(cfg, dev, h, fine, e * q).max()))
        best = max(best, bf - e * slope)
    return best
