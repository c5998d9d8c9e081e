"""Per-iteration static mixed-variable optimizer.

Each device searches its integer energy-budget grid, maps every budget to a
(power, batch, upload) triple by the closed-form case analysis, scores it
with ``F = b * eps - cost(budget)`` and keeps the best.  Under the
linearised value model ``cost(budget) = budget * V'(level)``.  The subchannel
limit is enforced afterwards by keeping the ``L`` uploaders with the
largest ``F``.

The case analysis does not depend on the value slope, so
:class:`DecisionTable` evaluates it once per (device, channel level,
budget) and the online loop only does the cheap scoring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (REL_TOL, Action, DeviceConfig, GlobalState, SystemConfig,
                    capacities, to_quanta)
from .physics import (compute_budget, energy_per_unit, link_budget, max_energy_budget,
                      power_from_budget, threshold_energy)


@dataclass(frozen=True)
class DeviceDecision:
    budget: int
    power: float
    batch: float
    upload: int
    objective: float


ZERO_DECISION = DeviceDecision(0, 0.0, 0.0, 0, 0.0)


def value_slope(v) -> np.ndarray:
    """Finite-difference slope of a value vector.

    Central differences inside, one-sided differences at both ends.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("value vector needs at least two levels")
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / 2.0
    out[0] = v[1] - v[0]
    out[-1] = v[-1] - v[-2]
    return out


def value_slopes(tables: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Row-wise :func:`value_slope` for a padded ``(N, Emax+1)`` array."""
    tables = np.asarray(tables, dtype=float)
    e = np.arange(tables.shape[1])[None, :]
    caps = np.asarray(caps)[:, None]
    lo = np.clip(e - 1, 0, caps)
    hi = np.clip(e + 1, 0, caps)
    rows = np.arange(tables.shape[0])[:, None]
    width = np.maximum(hi - lo, 1)
    return (tables[rows, hi] - tables[rows, lo]) / width


def budget_candidate(cfg: SystemConfig, dev: DeviceConfig, h: float,
                     budget: int) -> tuple[float, float, int]:
    """(power, batch, upload) for an integer budget, ignoring the value slope.

    Budgets at or below the threshold energy cannot carry an upload and give
    the silent triple.  Budgets above the full-power spend are capped there.
    """
    joules = budget * cfg.energy_quantum
    e_th = threshold_energy(cfg, h)
    e_max = max_energy_budget(cfg, dev, h)
    if budget <= 0 or joules <= e_th or e_max <= e_th:
        return 0.0, 0.0, 0
    if joules <= e_max:
        p = power_from_budget(cfg, dev, h, joules)
        spend = joules
    else:
        p = dev.max_power
        spend = e_max
    e_com = link_budget(cfg, dev, h, p, 1).tx_energy
    b = max(spend - e_com, 0.0) / energy_per_unit(cfg, dev)
    # delay re-check guards against round-off at the time boundary
    t = compute_budget(cfg, dev, b).cop_time + link_budget(cfg, dev, h, p, 1).tx_time
    if t > cfg.iteration_duration * (1 + REL_TOL) or b <= 0.0:
        return 0.0, 0.0, 0
    return p, b, 1


def budget_limit(cfg: SystemConfig, dev: DeviceConfig, h: float) -> int:
    """Largest budget worth searching: ceil of the full-power spend, in quanta."""
    return to_quanta(max_energy_budget(cfg, dev, h), cfg.energy_quantum)


def optimize_device(cfg: SystemConfig, dev: DeviceConfig, battery: int, h: float,
                    slope_at_level: float) -> DeviceDecision:
    """Best decision of one device for a given battery level, gain and slope."""
    if not 0 <= battery <= dev.battery_capacity:
        raise ValueError("battery level outside [0, E^max]")
    # marginal utility per quantum no better than the value of keeping it
    if cfg.energy_quantum / energy_per_unit(cfg, dev) - slope_at_level <= 0:
        return ZERO_DECISION
    best = ZERO_DECISION
    for e in range(1, min(battery, budget_limit(cfg, dev, h)) + 1):
        p, b, eps = budget_candidate(cfg, dev, h, e)
        if not eps:
            continue
        f = b - e * slope_at_level
        if f > best.objective:
            best = DeviceDecision(e, p, b, 1, f)
    return best


class DecisionTable:
    """Case-analysis results for every device, channel level and budget."""

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        n, k = cfg.num_devices, len(cfg.channel_levels)
        self.caps = capacities(cfg)
        width = int(self.caps.max()) + 1
        self.power = np.zeros((n, k, width))
        self.batch = np.zeros((n, k, width))
        self.upload = np.zeros((n, k, width), dtype=bool)
        self.limit = np.zeros((n, k), dtype=np.int64)
        self.unit_value = np.array(
            [cfg.energy_quantum / energy_per_unit(cfg, d) for d in cfg.devices])
        cache: dict = {}
        for i, dev in enumerate(cfg.devices):
            for j, h in enumerate(cfg.gains):
                key = (dev, j)
                if key not in cache:
                    lim = min(budget_limit(cfg, dev, h), dev.battery_capacity)
                    rows = [budget_candidate(cfg, dev, h, e) for e in range(dev.battery_capacity + 1)]
                    cache[key] = lim, rows
                lim, rows = cache[key]
                self.limit[i, j] = lim
                for e, (p, b, eps) in enumerate(rows):
                    self.power[i, j, e], self.batch[i, j, e], self.upload[i, j, e] = p, b, eps
        self._grid = np.arange(width)

    def decide(self, battery, channel, costs, hold=None):
        """Per-device optima before the subchannel limit.

        ``costs[n, e]`` is the value device ``n`` gives up by spending ``e``
        quanta; ``hold[n]`` forces the silent decision.  Returns
        ``(budget, power, batch, upload, objective)`` arrays.
        """
        battery = np.asarray(battery)
        channel = np.asarray(channel)
        rows = np.arange(len(battery))
        b = self.batch[rows, channel]
        up = self.upload[rows, channel]
        f = np.where(up, b - costs, 0.0)
        top = np.minimum(battery, self.limit[rows, channel])
        f[self._grid[None, :] > top[:, None]] = -np.inf
        if hold is not None:
            f[hold] = 0.0
        f[:, 0] = 0.0
        e = np.argmax(f, axis=1)
        obj = f[rows, e]
        upload = up[rows, e] & (obj > 0)
        e = np.where(upload, e, 0)
        power = np.where(upload, self.power[rows, channel, e], 0.0)
        batch = np.where(upload, b[rows, e], 0.0)
        return e, power, batch, upload.astype(np.int64), np.where(upload, obj, 0.0)

    def taylor_costs(self, slope_at_level):
        """Linearised cost ``e * V'(level)`` and the hold mask for hopeless slopes."""
        vp = np.asarray(slope_at_level, dtype=float)
        return self._grid[None, :] * vp[:, None], self.unit_value - vp <= 0


def select_top(upload: np.ndarray, objective: np.ndarray, limit: int) -> np.ndarray:
    """Mask keeping at most ``limit`` uploaders, largest objective first.

    Ties go to the lower device index.
    """
    keep = upload.astype(bool).copy()
    if keep.sum() <= limit:
        return keep
    idx = np.flatnonzero(keep)
    order = idx[np.lexsort((idx, -objective[idx]))]
    keep[:] = False
    keep[order[:limit]] = True
    return keep


def finalize(cfg: SystemConfig, decided, return_objective: bool = False):
    """Apply the subchannel limit to per-device optima and build the Action."""
    e, p, b, up, obj = decided
    keep = select_top(up, obj, cfg.num_subchannels)
    action = Action(np.where(keep, b, 0.0), np.where(keep, up, 0), np.where(keep, p, 0.0),
                    np.where(keep, e, 0))
    if return_objective:
        return action, np.where(keep, obj, 0.0)
    return action


def schedule(cfg: SystemConfig, state: GlobalState, slopes, table: DecisionTable | None = None,
             return_objective: bool = False):
    """Joint action for all devices under the linearised value model.

    ``slopes`` holds one slope vector per device, indexed by battery level.
    """
    table = table if table is not None else DecisionTable(cfg)
    battery = np.asarray(state.battery)
    rows = np.arange(len(battery))
    if isinstance(slopes, np.ndarray) and slopes.ndim == 2:
        vp = slopes[rows, battery]
    else:
        vp = np.array([s[b] for s, b in zip(slopes, battery)], dtype=float)
    costs, hold = table.taylor_costs(vp)
    return finalize(cfg, table.decide(battery, state.channel, costs, hold), return_objective)


def schedule_with_costs(cfg: SystemConfig, state: GlobalState, costs,
                        table: DecisionTable | None = None, return_objective: bool = False):
    """Joint action when the cost of every budget is given explicitly."""
    table = table if table is not None else DecisionTable(cfg)
    decided = table.decide(np.asarray(state.battery), state.channel, np.asarray(costs, dtype=float))
    return finalize(cfg, decided, return_objective)
