"""Domain types, default configuration and validation.

All energies inside formulas are in Joules.  Battery levels, energy budgets
and harvested energy are integer quanta of ``SystemConfig.energy_quantum``
Joules; conversion happens through :func:`to_quanta`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import numpy as np

# Slack used when comparing floating energies/times against integer budgets.
REL_TOL = 1e-9


class ConfigError(ValueError):
    """Raised when a configuration violates an invariant.

    The ``path`` attribute names the offending field (e.g. ``devices[3].max_power``).
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class DeviceConfig:
    cycles_per_unit: float = 1e10
    cpu_freq: float = 2e9
    battery_capacity: int = 6
    arrival_rate: float = 3.0
    max_power: float = 0.4
    outage_limit: float = 0.04


@dataclass(frozen=True)
class ChannelLevel:
    gain: float
    prob: float


def default_channel_levels(
    noise_power: float = 1e-10,
    max_power: float = 0.4,
    mid_snr: float = 3.0,
    ratio: float = 2.5,
    num_levels: int = 5,
) -> tuple[ChannelLevel, ...]:
    """Geometrically spaced gains, uniform probabilities.

    The middle level gives ``max_power * h / noise_power == mid_snr``.  With the
    default ratio the worst level cannot deliver the payload within one
    iteration even at full power.
    """
    mid = num_levels // 2
    h_mid = mid_snr * noise_power / max_power
    return tuple(
        ChannelLevel(gain=h_mid * ratio ** (k - mid), prob=1.0 / num_levels)
        for k in range(num_levels)
    )


@dataclass(frozen=True)
class SystemConfig:
    devices: tuple[DeviceConfig, ...] = field(
        default_factory=lambda: tuple(DeviceConfig() for _ in range(10))
    )
    num_subchannels: int = 5
    bandwidth: float = 1e5
    iteration_duration: float = 10.0
    capacitance: float = 1e-28
    model_size: float = 1e6
    noise_power: float = 1e-10
    channel_levels: tuple[ChannelLevel, ...] = field(default_factory=default_channel_levels)
    energy_quantum: float = 1.0
    # Stored for completeness; no formula uses it.
    zeta: float = 1.0

    @property
    def num_devices(self) -> int:
        return len(self.devices)

    @property
    def gains(self) -> np.ndarray:
        return np.array([c.gain for c in self.channel_levels])

    @property
    def channel_probs(self) -> np.ndarray:
        return np.array([c.prob for c in self.channel_levels])

    def with_devices(self, **changes) -> "SystemConfig":
        """Copy with the same field changes applied to every device."""
        return replace(self, devices=tuple(replace(d, **changes) for d in self.devices))


def default_config(num_devices: int = 10, **device_overrides) -> SystemConfig:
    dev = replace(DeviceConfig(), **device_overrides)
    return SystemConfig(devices=tuple(dev for _ in range(num_devices)))


def _positive(path: str, value: float) -> None:
    if not (isinstance(value, (int, float, np.integer, np.floating)) and math.isfinite(value) and value > 0):
        raise ConfigError(path, f"must be a finite positive number, got {value!r}")


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError."""
    if len(cfg.devices) < 1:
        raise ConfigError("devices", "at least one device is required")
    for i, d in enumerate(cfg.devices):
        p = f"devices[{i}]"
        _positive(f"{p}.cycles_per_unit", d.cycles_per_unit)
        _positive(f"{p}.cpu_freq", d.cpu_freq)
        _positive(f"{p}.arrival_rate", d.arrival_rate)
        _positive(f"{p}.max_power", d.max_power)
        if int(d.battery_capacity) != d.battery_capacity or d.battery_capacity < 1:
            raise ConfigError(f"{p}.battery_capacity", "must be an integer >= 1")
        if not 0.0 < d.outage_limit < 1.0:
            raise ConfigError(f"{p}.outage_limit", "must lie in (0, 1)")
    if int(cfg.num_subchannels) != cfg.num_subchannels or cfg.num_subchannels < 1:
        raise ConfigError("num_subchannels", "must be an integer >= 1")
    for name in ("bandwidth", "iteration_duration", "capacitance", "model_size",
                 "noise_power", "energy_quantum"):
        _positive(name, getattr(cfg, name))
    levels = cfg.channel_levels
    if len(levels) < 1:
        raise ConfigError("channel_levels", "at least one level is required")
    for k, c in enumerate(levels):
        _positive(f"channel_levels[{k}].gain", c.gain)
        if not 0.0 <= c.prob <= 1.0:
            raise ConfigError(f"channel_levels[{k}].prob", "must lie in [0, 1]")
    gains = [c.gain for c in levels]
    if any(b <= a for a, b in zip(gains, gains[1:])):
        raise ConfigError("channel_levels", "gains must be strictly increasing")
    total = math.fsum(c.prob for c in levels)
    if abs(total - 1.0) > 1e-12:
        raise ConfigError("channel_levels", f"probabilities must sum to 1 (got {total:.12g})")
    return cfg


def to_quanta(joules, quantum: float = 1.0):
    """Ceiling conversion from Joules to integer quanta, robust to round-off.

    Works on scalars and arrays.  Values within ``REL_TOL`` of an integer
    number of quanta are not bumped to the next level.
    """
    x = np.asarray(joules, dtype=float) / quantum
    q = np.ceil(x - REL_TOL * np.maximum(1.0, np.abs(x)))
    q = np.maximum(q, 0).astype(np.int64)
    return int(q) if q.ndim == 0 else q


def from_quanta(levels, quantum: float = 1.0):
    return np.asarray(levels, dtype=float) * quantum


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GlobalState:
    """Battery levels (quanta) and channel-level indices of every device."""

    battery: np.ndarray
    channel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "battery", _frozen(self.battery, np.int64))
        object.__setattr__(self, "channel", _frozen(self.channel, np.int64))
        if self.battery.shape != self.channel.shape:
            raise ValueError("battery and channel must have one entry per device")

    def check(self, cfg: SystemConfig) -> None:
        caps = np.array([d.battery_capacity for d in cfg.devices])
        if self.battery.shape != caps.shape:
            raise ValueError("state size does not match number of devices")
        if np.any(self.battery < 0) or np.any(self.battery > caps):
            raise ValueError("battery level outside [0, E^max]")
        if np.any(self.channel < 0) or np.any(self.channel >= len(cfg.channel_levels)):
            raise ValueError("channel index out of range")


@dataclass(frozen=True, eq=False)
class Action:
    """Per-device batch size, upload flag, transmit power and energy budget."""

    batch: np.ndarray
    upload: np.ndarray
    power: np.ndarray
    energy_budget: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "batch", _frozen(self.batch, float))
        object.__setattr__(self, "upload", _frozen(self.upload, np.int64))
        object.__setattr__(self, "power", _frozen(self.power, float))
        object.__setattr__(self, "energy_budget", _frozen(self.energy_budget, np.int64))

    @classmethod
    def zeros(cls, n: int) -> "Action":
        return cls(np.zeros(n), np.zeros(n, np.int64), np.zeros(n), np.zeros(n, np.int64))

    @property
    def reward(self) -> float:
        return float(np.sum(self.batch * self.upload))


@dataclass(frozen=True)
class FeasibilityReport:
    delay: bool
    energy_causality: bool
    power_bounds: bool
    subchannels: bool
    upload_consistency: bool
    violations: tuple[str, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.feasible


def device_energy(cfg: SystemConfig, dev: DeviceConfig, h: float, batch: float,
                  power: float, upload: int) -> tuple[float, float]:
    """Total time and energy (Joules) of one device's action."""
    # local import: physics depends on this module
    from .physics import compute_budget, link_budget

    comp = compute_budget(cfg, dev, batch)
    link = link_budget(cfg, dev, h, power, upload)
    return comp.cop_time + link.tx_time, comp.cop_energy + link.tx_energy


def check_action_feasible(cfg: SystemConfig, state: GlobalState, a: Action) -> FeasibilityReport:
    """Per-iteration constraints: delay, energy causality, power box, subchannels.

    The long-run outage constraint is an ergodic property and is measured by
    the harness instead.
    """
    bad: list[str] = []
    delay_ok = energy_ok = power_ok = upload_ok = True
    gains = cfg.gains
    tau = cfg.iteration_duration
    for n, dev in enumerate(cfg.devices):
        b, eps, p = float(a.batch[n]), int(a.upload[n]), float(a.power[n])
        if eps not in (0, 1) or (eps == 0 and p != 0.0) or (eps == 1 and p <= 0.0) or b < 0:
            upload_ok = False
            bad.append(f"device {n}: inconsistent upload/power/batch")
            continue
        if not 0.0 <= p <= dev.max_power * (1 + REL_TOL):
            power_ok = False
            bad.append(f"device {n}: power {p} outside [0, {dev.max_power}]")
        t, e = device_energy(cfg, dev, gains[state.channel[n]], b, p, eps)
        if t > tau * (1 + REL_TOL):
            delay_ok = False
            bad.append(f"device {n}: time {t:.6g} s exceeds {tau} s")
        used = to_quanta(e, cfg.energy_quantum)
        if used > state.battery[n]:
            energy_ok = False
            bad.append(f"device {n}: uses {used} quanta with {state.battery[n]} stored")
        if a.energy_budget[n] > state.battery[n]:
            energy_ok = False
            bad.append(f"device {n}: budget {a.energy_budget[n]} exceeds battery")
    n_up = int(np.sum(a.upload))
    sub_ok = n_up <= cfg.num_subchannels
    if not sub_ok:
        bad.append(f"{n_up} uploads exceed {cfg.num_subchannels} subchannels")
    return FeasibilityReport(delay_ok, energy_ok, power_ok, sub_ok, upload_ok, tuple(bad))


def battery_update(battery: np.ndarray, used: np.ndarray, arrivals: np.ndarray,
                   capacity: np.ndarray) -> np.ndarray:
    """Next battery level: spend, floor at zero, add arrivals, clamp to capacity."""
    return np.minimum(np.maximum(battery - used, 0) + arrivals, capacity)


def capacities(cfg: SystemConfig) -> np.ndarray:
    return np.array([d.battery_capacity for d in cfg.devices], dtype=np.int64)
