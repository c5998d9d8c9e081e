"""Reference policies: myopic, CSI-threshold and random scheduling."""

from __future__ import annotations

import enum

import numpy as np

from .model import Action, GlobalState, SystemConfig
from .scheduler import DecisionTable, finalize, schedule


class PolicyKind(str, enum.Enum):
    PROPOSED = "proposed"
    CSI = "csi"
    MYOPIC = "myopic"
    RANDOM = "random"


def _zero_slopes(cfg: SystemConfig, table: DecisionTable) -> np.ndarray:
    return np.zeros((cfg.num_devices, table.power.shape[2]))


def myopic_policy(cfg: SystemConfig, state: GlobalState,
                  table: DecisionTable | None = None) -> Action:
    """Maximise this iteration's utility only (all value slopes zero)."""
    table = table or DecisionTable(cfg)
    return schedule(cfg, state, _zero_slopes(cfg, table), table=table)


def default_csi_cutoff(cfg: SystemConfig) -> int:
    """Median channel level index."""
    return (len(cfg.channel_levels) - 1) // 2


def csi_policy(cfg: SystemConfig, state: GlobalState, cutoff: int | None = None,
               table: DecisionTable | None = None) -> Action:
    """Act myopically on channels at or above ``cutoff``; stay silent below it."""
    table = table or DecisionTable(cfg)
    cutoff = default_csi_cutoff(cfg) if cutoff is None else cutoff
    battery = np.asarray(state.battery)
    n = len(battery)
    costs = np.zeros((n, table.power.shape[2]))
    hold = np.asarray(state.channel) < cutoff
    return finalize(cfg, table.decide(battery, state.channel, costs, hold))


def random_policy(cfg: SystemConfig, state: GlobalState, rng: np.random.Generator,
                  table: DecisionTable | None = None) -> Action:
    """Uniform budget on each device's grid, random uploaders when oversubscribed."""
    table = table or DecisionTable(cfg)
    battery = np.asarray(state.battery)
    channel = np.asarray(state.channel)
    rows = np.arange(len(battery))
    top = np.minimum(battery, table.limit[rows, channel])
    e = np.floor(rng.random(len(battery)) * (top + 1)).astype(np.int64)
    e = np.minimum(e, top)
    up = table.upload[rows, channel, e]
    idx = np.flatnonzero(up)
    if len(idx) > cfg.num_subchannels:
        chosen = rng.choice(idx, size=cfg.num_subchannels, replace=False)
        up = np.zeros_like(up)
        up[chosen] = True
    e = np.where(up, e, 0)
    return Action(np.where(up, table.batch[rows, channel, e], 0.0), up.astype(np.int64),
                  np.where(up, table.power[rows, channel, e], 0.0), e)
