"""Seeded random processes: Poisson energy arrivals and block-fading channels.

Every device owns two independent streams (arrivals and channel), derived
from the master seed through fixed labels, so adding a device never
perturbs the draws of the others.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .model import DeviceConfig, GlobalState, SystemConfig, battery_update, capacities

DEFAULT_TAIL = 1e-12


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def make_rng(seed: int, label: str = "main", index: int = 0) -> np.random.Generator:
    """Generator for the stream named ``label`` (and sub-index) of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(_label_key(label), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class ArrivalPmf:
    rate: float
    probs: np.ndarray
    tail_mass: float

    @property
    def k_max(self) -> int:
        return len(self.probs) - 1

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)


def arrival_pmf(dev: DeviceConfig | float, tail_tol: float = DEFAULT_TAIL) -> ArrivalPmf:
    """Poisson pmf truncated where the tail drops below ``tail_tol``.

    The residual tail ``Pr(A > k_max)`` is lumped into ``probs[k_max]``.
    """
    lam = dev.arrival_rate if isinstance(dev, DeviceConfig) else float(dev)
    if not 0.0 < tail_tol <= 1e-6:
        raise ValueError("tail_tol must lie in (0, 1e-6]")
    k = 0
    while stats.poisson.sf(k, lam) >= tail_tol:
        k += 1
    head = stats.poisson.pmf(np.arange(k), lam)
    tail = float(stats.poisson.sf(k, lam))
    last = 1.0 - math.fsum(head)
    probs = np.append(head, last)
    probs.setflags(write=False)
    return ArrivalPmf(rate=lam, probs=probs, tail_mass=tail)


def _inverse_sample(cdf: np.ndarray, u):
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


def sample_arrival(rng: np.random.Generator, dev: DeviceConfig, size=None):
    """Poisson(lambda) quanta by inversion of the exact pmf."""
    cdf = arrival_pmf(dev).cdf
    k = _inverse_sample(cdf, rng.random(size))
    return int(k) if size is None else k


def sample_channel(rng: np.random.Generator | list[np.random.Generator],
                   cfg: SystemConfig) -> np.ndarray:
    """One channel-level index per device.

    ``rng`` is either one generator shared by all devices or a list with one
    generator per device.
    """
    cdf = np.cumsum(cfg.channel_probs)
    n = cfg.num_devices
    if isinstance(rng, np.random.Generator):
        u = rng.random(n)
    else:
        u = np.array([g.random() for g in rng])
    return _inverse_sample(cdf, u)


class _UniformBlocks:
    """Buffered uniforms from one generator, handed out one at a time."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng, self.block = rng, block
        self._buf = rng.random(block)
        self._i = 0

    def next(self) -> float:
        if self._i == self.block:
            self._buf = self.rng.random(self.block)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u


class Environment:
    """Battery and channel dynamics of all devices.

    ``observe()`` returns the current :class:`GlobalState`; ``step(used)``
    spends ``used`` quanta per device, samples arrivals and the next
    channels, and returns ``(next_state, arrivals)``.
    """

    def __init__(self, cfg: SystemConfig, seed: int, initial_battery=None):
        self.cfg = cfg
        self.seed = int(seed)
        n = cfg.num_devices
        self.capacity = capacities(cfg)
        self._arr = [_UniformBlocks(make_rng(seed, "arrival", i)) for i in range(n)]
        self._chan = [_UniformBlocks(make_rng(seed, "channel", i)) for i in range(n)]
        self._arr_cdf = [arrival_pmf(d).cdf for d in cfg.devices]
        self._chan_cdf = np.cumsum(cfg.channel_probs)
        if initial_battery is None:
            battery = self.capacity.copy()
        else:
            battery = np.broadcast_to(np.asarray(initial_battery, dtype=np.int64), (n,)).copy()
        self.battery = np.minimum(battery, self.capacity)
        self.channel = self._draw_channels()

    def _draw_channels(self) -> np.ndarray:
        u = np.array([s.next() for s in self._chan])
        return _inverse_sample(self._chan_cdf, u)

    def _draw_arrivals(self) -> np.ndarray:
        return np.array([int(_inverse_sample(c, s.next())) for c, s in zip(self._arr_cdf, self._arr)],
                        dtype=np.int64)

    def observe(self) -> GlobalState:
        return GlobalState(self.battery, self.channel)

    def step(self, used) -> tuple[GlobalState, np.ndarray]:
        used = np.asarray(used, dtype=np.int64)
        if np.any(used > self.battery):
            raise ValueError("energy causality violated")
        arrivals = self._draw_arrivals()
        self.battery = battery_update(self.battery, used, arrivals, self.capacity)
        self.channel = self._draw_channels()
        return self.observe(), arrivals
