"""Closed-loop episodes, parameter sweeps and plot-ready CSV output.

Every file written here is a pure function of the configuration and the
seeds, so re-running an experiment reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .baselines import PolicyKind, csi_policy, myopic_policy, random_policy
from .learning import LearnerState, LearningConfig, OnlineLearner
from .model import SystemConfig, check_action_feasible, validate_config
from .scheduler import DecisionTable
from .stochastics import Environment, make_rng

# accepted names of sweep variables -> DeviceConfig field
SWEEP_FIELDS = {
    "arrival_rate": "arrival_rate", "lambda": "arrival_rate",
    "battery_capacity": "battery_capacity", "emax": "battery_capacity",
    "cycles_per_unit": "cycles_per_unit", "c": "cycles_per_unit",
    "cpu_freq": "cpu_freq", "f": "cpu_freq",
}

TRACE_HEADER = ("iter", "device", "battery", "channel", "budget", "power", "batch",
                "upload", "reward", "gamma", "delta_v")
METRIC_HEADER = ("policy", "variable", "value", "seed", "utility", "outage_max",
                 "outage_mean", "avg_power", "converged_at", "outage")


def _num(x) -> str:
    """Deterministic text for numbers: integers plain, floats by repr."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class MetricsRecord:
    policy: str
    value: float | None
    seed: int
    utility: float
    outage: tuple[float, ...]
    avg_power: float
    converged_at: int | None = None
    variable: str = ""

    def row(self) -> list[str]:
        return [self.policy, self.variable, "" if self.value is None else _num(self.value),
                str(self.seed), _num(self.utility), _num(max(self.outage)),
                _num(float(np.mean(self.outage))), _num(self.avg_power),
                "" if self.converged_at is None else str(self.converged_at),
                ";".join(_num(o) for o in self.outage)]


@dataclass
class ExperimentSpec:
    base: SystemConfig
    variable: str
    values: Sequence[float]
    policies: Sequence[str] = tuple(p.value for p in PolicyKind)
    seeds: Sequence[int] = (0,)
    horizon: int = 5000
    burn_in: int = 1000
    output: str | None = None
    learning: LearningConfig = field(default_factory=LearningConfig)
    csi_cutoff: int | None = None

    def __post_init__(self):
        if self.variable.lower() not in SWEEP_FIELDS:
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if not self.values or not self.seeds:
            raise ValueError("values and seeds must be non-empty")
        if not self.horizon > self.burn_in >= 0:
            raise ValueError("need horizon > burn_in >= 0")
        for p in self.policies:
            PolicyKind(p)

    def config_at(self, value) -> SystemConfig:
        name = SWEEP_FIELDS[self.variable.lower()]
        if name == "battery_capacity":
            value = int(value)
        return validate_config(self.base.with_devices(**{name: value}))


class _Runner:
    """Uniform act/observe interface over the four policies."""

    def __init__(self, cfg: SystemConfig, policy: str, seed: int,
                 learning: LearningConfig | None, csi_cutoff: int | None):
        self.kind = PolicyKind(policy)
        self.cfg = cfg
        self.table = DecisionTable(cfg)
        self.learner = None
        if self.kind is PolicyKind.PROPOSED:
            self.learner = OnlineLearner(cfg, learning, table=self.table)
        self.rng = make_rng(seed, "policy") if self.kind is PolicyKind.RANDOM else None
        self.cutoff = csi_cutoff

    def act(self, state):
        if self.kind is PolicyKind.PROPOSED:
            return self.learner.act(state)
        if self.kind is PolicyKind.MYOPIC:
            return myopic_policy(self.cfg, state, table=self.table)
        if self.kind is PolicyKind.CSI:
            return csi_policy(self.cfg, state, cutoff=self.cutoff, table=self.table)
        return random_policy(self.cfg, state, self.rng, table=self.table)

    def observe(self, state, action, next_battery) -> float:
        if self.learner is None:
            return 0.0
        return self.learner.update(state, action, next_battery)[0]

    @property
    def gamma(self) -> np.ndarray:
        if self.learner is None:
            return np.zeros(self.cfg.num_devices)
        return self.learner.state.multipliers


def run_episode(cfg: SystemConfig, policy: str, seed: int, horizon: int, burn_in: int = 0,
                learning: LearningConfig | None = None, trace: bool = False,
                check: bool = False, csi_cutoff: int | None = None,
                initial_battery=None, return_learner: bool = False):
    """Simulate ``horizon`` iterations and average over the post-burn-in part.

    The Proposed policy learns online during the whole episode.  Returns
    ``(MetricsRecord, trace_rows)``; ``trace_rows`` is ``None`` unless
    ``trace`` is set and holds one row per device and iteration otherwise.
    With ``check`` every action is verified against the per-iteration
    constraints and a violation raises ``AssertionError``.  With
    ``return_learner`` the learner state is appended to the result.
    """
    if not horizon > burn_in >= 0:
        raise ValueError("need horizon > burn_in >= 0")
    env = Environment(cfg, seed, initial_battery)
    runner = _Runner(cfg, policy, seed, learning, csi_cutoff)
    n = cfg.num_devices
    caps = env.capacity
    state = env.observe()
    total = 0.0
    power = 0.0
    outages = np.zeros(n)
    rows: list | None = [] if trace else None
    for t in range(horizon):
        action = runner.act(state)
        if check:
            report = check_action_feasible(cfg, state, action)
            assert report.feasible, report.violations
        nxt, _ = env.step(action.energy_budget)
        dv = runner.observe(state, action, nxt.battery)
        if check:
            assert np.all((nxt.battery >= 0) & (nxt.battery <= caps))
        if t >= burn_in:
            total += action.reward
            power += float(np.sum(action.power))
            outages += nxt.battery == 0
        if rows is not None:
            gam = runner.gamma
            for i in range(n):
                rows.append((t, i, int(state.battery[i]), int(state.channel[i]),
                             int(action.energy_budget[i]), float(action.power[i]),
                             float(action.batch[i]), int(action.upload[i]),
                             float(action.batch[i] * action.upload[i]), float(gam[i]), dv))
        state = nxt
    steps = horizon - burn_in
    conv = runner.learner.state.converged_at if runner.learner is not None else None
    rec = MetricsRecord(policy=PolicyKind(policy).value, value=None, seed=int(seed),
                        utility=total / steps, outage=tuple(float(o) for o in outages / steps),
                        avg_power=power / (steps * n), converged_at=conv)
    if return_learner:
        return rec, rows, (runner.learner.state if runner.learner is not None else None)
    return rec, rows


def _sweep_task(args):
    spec, policy, value, seed = args
    cfg = spec.config_at(value)
    rec, _ = run_episode(cfg, policy, seed, spec.horizon, spec.burn_in, spec.learning,
                         csi_cutoff=spec.csi_cutoff)
    return dataclasses.replace(rec, value=value, variable=spec.variable)


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> list[MetricsRecord]:
    """Cartesian product policies x values x seeds, in that nesting order.

    Runs are independent and may use a process pool; the returned order and
    any written CSV do not depend on ``workers``.
    """
    tasks = [(spec, p, v, s) for p in spec.policies for v in spec.values for s in spec.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_task, tasks))
    else:
        records = [_sweep_task(t) for t in tasks]
    if spec.output:
        out = Path(spec.output)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics(out / "metrics.csv", records)
        write_csv(out / "summary.csv", SUMMARY_HEADER, summarize(records))
        write_manifest(out / "manifest.json", spec.base, list(spec.seeds), spec.learning,
                       extra={"variable": spec.variable, "values": list(spec.values),
                              "policies": list(spec.policies), "horizon": spec.horizon,
                              "burn_in": spec.burn_in})
    return records


SUMMARY_HEADER = ("policy", "variable", "value", "seeds", "utility_mean", "utility_std",
                  "outage_max_mean")


def summarize(records: Iterable[MetricsRecord]) -> list[tuple]:
    """Mean and sample standard deviation over seeds per (policy, value)."""
    groups: dict[tuple, list[MetricsRecord]] = {}
    for r in records:
        groups.setdefault((r.policy, r.variable, r.value), []).append(r)
    out = []
    for (pol, var, val), recs in groups.items():
        u = np.array([r.utility for r in recs])
        std = float(np.std(u, ddof=1)) if len(u) > 1 else 0.0
        out.append((pol, var, "" if val is None else val, len(u), float(u.mean()), std,
                    float(np.mean([max(r.outage) for r in recs]))))
    return out


def policy_surface(cfg: SystemConfig, trained: LearnerState, device: int = 0,
                   learning: LearningConfig | None = None) -> list[tuple]:
    """Action of one device for every (channel level, battery level) pair.

    Rows are ``(channel, battery, budget, power, batch, upload)`` and give the
    device's own decision before the subchannel limit.
    """
    learner = OnlineLearner(cfg, learning, state=trained)
    cap = int(cfg.devices[device].battery_capacity)
    rows = []
    for k in range(len(cfg.channel_levels)):
        for level in range(cap + 1):
            battery = np.zeros(cfg.num_devices, dtype=np.int64)
            battery[device] = level
            channel = np.full(cfg.num_devices, k)
            costs = learner.spend_costs(battery)
            e, p, b, up, _ = learner.table.decide(battery, channel, costs)
            rows.append((k, level, int(e[device]), float(p[device]), float(b[device]),
                         int(up[device])))
    return rows


SURFACE_HEADER = ("channel", "battery", "budget", "power", "batch", "upload")


def dump_policy_surface(cfg: SystemConfig, trained: LearnerState, path: str | Path | None = None,
                        device: int = 0, learning: LearningConfig | None = None) -> list[tuple]:
    rows = policy_surface(cfg, trained, device, learning)
    if path is not None:
        write_csv(path, SURFACE_HEADER, rows)
    return rows


def convergence_trace(cfg: SystemConfig, seed: int, horizon: int,
                      learning: LearningConfig | None = None, device: int = 0,
                      path: str | Path | None = None) -> list[tuple]:
    """Per-iteration ``(iter, delta_v, delta_gamma, V[device, 0..Emax])`` rows."""
    env = Environment(cfg, seed)
    learner = OnlineLearner(cfg, learning)
    cap = int(cfg.devices[device].battery_capacity)
    state = env.observe()
    rows = []
    for t in range(horizon):
        action = learner.act(state)
        nxt, _ = env.step(action.energy_budget)
        dv, dg = learner.update(state, action, nxt.battery)
        rows.append((t + 1, dv, dg, *learner.state.tables[device, : cap + 1].tolist()))
        state = nxt
    if path is not None:
        header = ("iter", "delta_v", "delta_gamma") + tuple(f"v{l}" for l in range(cap + 1))
        write_csv(path, header, rows)
    return rows


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, str) else _num(x) for x in r])


def write_metrics(path: str | Path, records: Iterable[MetricsRecord]) -> None:
    write_csv(path, METRIC_HEADER, (r.row() for r in records))


def write_trace(path: str | Path, rows: Iterable[Sequence]) -> None:
    write_csv(path, TRACE_HEADER, rows)


def config_hash(cfg: SystemConfig, learning: LearningConfig | None = None) -> str:
    doc = {"system": dataclasses.asdict(cfg),
           "learning": dataclasses.asdict(learning or LearningConfig())}
    text = json.dumps(doc, sort_keys=True, default=repr)
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(path: str | Path, cfg: SystemConfig, seeds: Sequence[int],
                   learning: LearningConfig | None = None, extra: dict | None = None) -> dict:
    """Record config hash, seeds and package version (no timestamps)."""
    doc = {"version": __version__, "config_hash": config_hash(cfg, learning),
           "seeds": [int(s) for s in seeds]}
    doc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc
