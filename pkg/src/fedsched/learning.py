"""Two-timescale online learning of per-device value tables and multipliers.

The value of the global battery state is approximated by a sum of
per-device tables ``V_n(level)``.  Every iteration one entry per device is
moved towards a sampled target and the outage multiplier of each device
takes a projected step on a slower timescale.

Two readings of the value target are supported (``LearningConfig.rule``):

``"relative"`` (default)
    The entry of the level at which the decision was taken moves towards
    ``b*eps - gamma*1[level=0] + E_A V(post(level, spent, A)) - E_A V(min(A, Emax))``.
    The subtracted term is the expected value reached from an empty battery,
    which pins the additive constant of the average-reward value.
``"literal"``
    The entry of the realized next level moves towards
    ``b*eps - gamma*1[next=0] + E_A V(post(level, spent, A)) - E_A V(post(level, 0, A))``.

Two decision objectives are supported (``LearningConfig.objective``):
``"expected"`` (default) prices a budget by the exact arrival-averaged value
it removes; ``"taylor"`` uses the first-order expansion ``budget * V'(level)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import GlobalState, SystemConfig, capacities
from .scheduler import (DecisionTable, DeviceDecision, finalize, schedule, value_slopes)
from .stochastics import ArrivalPmf, Environment, arrival_pmf

RULES = ("relative", "literal")
OBJECTIVES = ("expected", "taylor")


@dataclass(frozen=True)
class StepSchedule:
    """``eps(t) = c / (1 + t) ** p`` for the value and multiplier updates."""

    c_v: float = 1.0
    p_v: float = 0.6
    c_gamma: float = 0.1
    p_gamma: float = 0.85

    def __post_init__(self):
        if self.c_v <= 0 or self.c_gamma <= 0:
            raise ValueError("step-size constants must be positive")
        for p in (self.p_v, self.p_gamma):
            if not 0.5 < p <= 1.0:
                raise ValueError("exponents must lie in (0.5, 1]")
        if self.p_gamma <= self.p_v:
            raise ValueError("multiplier steps must decay faster than value steps")

    def __call__(self, t: int) -> tuple[float, float]:
        return self.c_v / (1.0 + t) ** self.p_v, self.c_gamma / (1.0 + t) ** self.p_gamma


def default_schedule(t: int) -> tuple[float, float]:
    return StepSchedule()(t)


@dataclass(frozen=True)
class LearningConfig:
    schedule: StepSchedule = field(default_factory=StepSchedule)
    tol_v: float = 1e-3
    tol_gamma: float = 1e-3
    pmf_tail: float = 1e-12
    rule: str = "relative"
    objective: str = "expected"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")


@dataclass
class LearnerState:
    tables: np.ndarray          # (N, max capacity + 1); entries past a capacity unused
    multipliers: np.ndarray
    caps: np.ndarray
    schedule: StepSchedule = field(default_factory=StepSchedule)
    iter: int = 0
    last_delta_v: float = float("inf")
    last_delta_gamma: float = float("inf")
    converged_at: int | None = None

    @classmethod
    def initial(cls, cfg: SystemConfig, schedule: StepSchedule | None = None) -> "LearnerState":
        caps = capacities(cfg)
        return cls(np.zeros((cfg.num_devices, int(caps.max()) + 1)),
                   np.zeros(cfg.num_devices), caps, schedule or StepSchedule())

    @property
    def converged(self) -> bool:
        return self.converged_at is not None

    def table(self, n: int) -> np.ndarray:
        return self.tables[n, : self.caps[n] + 1]

    def slopes(self) -> np.ndarray:
        return value_slopes(self.tables, self.caps)

    def copy(self) -> "LearnerState":
        return LearnerState(self.tables.copy(), self.multipliers.copy(), self.caps.copy(),
                            self.schedule, self.iter, self.last_delta_v,
                            self.last_delta_gamma, self.converged_at)


def post_transition(pmf: ArrivalPmf, capacity: int) -> np.ndarray:
    """``T[s, l] = Pr(min(s + A, capacity) = l)`` for post-spend level ``s``."""
    t = np.zeros((capacity + 1, capacity + 1))
    for s in range(capacity + 1):
        for k, p in enumerate(pmf.probs):
            t[s, min(s + k, capacity)] += p
    return t


def expected_next_value(table, pmf: ArrivalPmf, level: int, spent: int) -> float:
    """``E_A V(min(max(level - spent, 0) + A, Emax))``."""
    v = np.asarray(table, dtype=float)
    s = max(level - spent, 0)
    nxt = np.minimum(s + np.arange(len(pmf.probs)), len(v) - 1)
    return float(np.dot(pmf.probs, v[nxt]))


def delta_value(decision: DeviceDecision, gamma: float, table, pmf: ArrivalPmf,
                level: int, next_level: int, rule: str = "relative") -> float:
    """Sampled value target of one device for one iteration.

    ``level`` is the battery level at which ``decision`` was taken and
    ``next_level`` the realized level after arrivals.  See the module
    docstring for the two rules.
    """
    after = expected_next_value(table, pmf, level, decision.budget)
    if rule == "relative":
        baseline = expected_next_value(table, pmf, 0, 0)
        empty = level == 0
    elif rule == "literal":
        baseline = expected_next_value(table, pmf, level, 0)
        empty = next_level == 0
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return decision.batch * decision.upload - gamma * empty + after - baseline


def update_value(state: LearnerState, n: int, level: int, dv: float,
                 eps_v: float | None = None) -> float:
    """Move entry ``level`` of device ``n`` towards ``dv``; return |change|."""
    if eps_v is None:
        eps_v = state.schedule(state.iter)[0]
    old = state.tables[n, level]
    new = (1.0 - eps_v) * old + eps_v * dv
    state.tables[n, level] = new
    return abs(new - old)


def update_multiplier(state: LearnerState, n: int, outage: bool, limit: float,
                      eps_gamma: float | None = None) -> float:
    """Projected multiplier step for device ``n``; return |change|."""
    if eps_gamma is None:
        eps_gamma = state.schedule(state.iter)[1]
    old = state.multipliers[n]
    new = max(old + eps_gamma * (float(outage) - limit), 0.0)
    state.multipliers[n] = new
    return abs(new - old)


class OnlineLearner:
    """Vectorised per-device updates and the matching decision rule."""

    def __init__(self, cfg: SystemConfig, learning: LearningConfig | None = None,
                 state: LearnerState | None = None, table: DecisionTable | None = None):
        self.cfg = cfg
        self.learning = learning or LearningConfig()
        self.state = state or LearnerState.initial(cfg, self.learning.schedule)
        self.table = table or DecisionTable(cfg)
        self.limits = np.array([d.outage_limit for d in cfg.devices])
        caps = self.state.caps
        width = self.state.tables.shape[1]
        self.trans = np.zeros((cfg.num_devices, width, width))
        for i, d in enumerate(cfg.devices):
            c = int(caps[i])
            self.trans[i, : c + 1, : c + 1] = post_transition(
                arrival_pmf(d, self.learning.pmf_tail), c)
            # padded rows stay inert
            self.trans[i, c + 1:, c] = 1.0
        self._rows = np.arange(cfg.num_devices)
        self._grid = np.arange(width)

    def expected_values(self) -> np.ndarray:
        """``EV[n, s] = E_A V_n(min(s + A, Emax))`` for every post-spend level."""
        return np.einsum("nij,nj->ni", self.trans, self.state.tables)

    def spend_costs(self, battery) -> np.ndarray:
        """Exact value lost by spending ``e`` quanta, for every device and ``e``."""
        battery = np.asarray(battery)
        ev = self.expected_values()
        post = np.maximum(battery[:, None] - self._grid[None, :], 0)
        return ev[self._rows, battery][:, None] - ev[self._rows[:, None], post]

    def act(self, state: GlobalState, return_objective: bool = False):
        if self.learning.objective == "taylor":
            return schedule(self.cfg, state, self.state.slopes(), table=self.table,
                            return_objective=return_objective)
        costs = self.spend_costs(state.battery)
        decided = self.table.decide(np.asarray(state.battery), state.channel, costs)
        return finalize(self.cfg, decided, return_objective)

    def update(self, state: GlobalState, action, next_battery) -> tuple[float, float]:
        """One iteration of value and multiplier updates, in place.

        Returns the infinity norms of the table and multiplier changes.
        """
        st = self.state
        eps_v, eps_g = st.schedule(st.iter)
        rows = self._rows
        level = np.asarray(state.battery)
        next_battery = np.asarray(next_battery)
        post = np.maximum(level - action.energy_budget, 0)
        if self.learning.rule == "relative":
            ref = np.zeros_like(level)
            where, empty = level, level == 0
        else:
            ref = level
            where, empty = next_battery, next_battery == 0
        diff_rows = self.trans[rows, post] - self.trans[rows, ref]
        diff = np.einsum("ij,ij->i", diff_rows, st.tables)
        dv = action.batch * action.upload - st.multipliers * empty + diff
        old = st.tables[rows, where]
        new = (1.0 - eps_v) * old + eps_v * dv
        st.tables[rows, where] = new
        outage = next_battery == 0
        new_g = np.maximum(st.multipliers + eps_g * (outage - self.limits), 0.0)
        dg = float(np.max(np.abs(new_g - st.multipliers)))
        st.multipliers = new_g
        d_v = float(np.max(np.abs(new - old)))
        st.iter += 1
        st.last_delta_v, st.last_delta_gamma = d_v, dg
        if st.converged_at is None and d_v < self.learning.tol_v and dg < self.learning.tol_gamma:
            st.converged_at = st.iter
        return d_v, dg


@dataclass
class LearnTrace:
    reward: list = field(default_factory=list)
    outage: list = field(default_factory=list)
    delta_v: list = field(default_factory=list)
    delta_gamma: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)


def learn(cfg: SystemConfig, env: Environment, max_iters: int,
          tol_v: float = 1e-3, tol_gamma: float = 1e-3,
          learning: LearningConfig | None = None, snapshot_every: int = 0,
          stop_at_tolerance: bool = True) -> tuple[LearnerState, LearnTrace]:
    """Closed loop of decide, observe and update until tolerance or ``max_iters``.

    ``state.converged_at`` is ``None`` when the tolerances were never met.
    """
    base = learning or LearningConfig()
    learning = LearningConfig(base.schedule, tol_v, tol_gamma, base.pmf_tail,
                              base.rule, base.objective)
    learner = OnlineLearner(cfg, learning)
    trace = LearnTrace()
    state = env.observe()
    for t in range(max_iters):
        action = learner.act(state)
        nxt, _ = env.step(action.energy_budget)
        dv, dg = learner.update(state, action, nxt.battery)
        trace.reward.append(action.reward)
        trace.outage.append(nxt.battery == 0)
        trace.delta_v.append(dv)
        trace.delta_gamma.append(dg)
        if snapshot_every and (t + 1) % snapshot_every == 0:
            trace.snapshots[t + 1] = learner.state.tables.copy()
        state = nxt
        if stop_at_tolerance and learner.state.converged:
            break
    return learner.state, trace
