"""Closed-form compute/radio formulas and the power <-> energy-budget inversion.

Conventions
-----------
``h`` is a linear channel gain, powers are in W, energies in J, times in s.
The *spend curve* of a device on a channel is

    spend(P) = (tau - M/R(P)) * alpha * f**3 + (M/R(P)) * P

i.e. the energy used when the device transmits at power ``P`` and computes
for all remaining time of the iteration.  It increases strictly on
``(P_th, P_max]`` where ``M / R(P_th) == tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DeviceConfig, SystemConfig

LN2 = math.log(2.0)
INV_E = math.exp(-1.0)


class BudgetDomainError(ValueError):
    pass


@dataclass(frozen=True)
class ComputeBudget:
    cop_time: float
    cop_energy: float


@dataclass(frozen=True)
class LinkBudget:
    rate: float
    tx_time: float
    tx_energy: float


def compute_budget(cfg: SystemConfig, dev: DeviceConfig, b: float) -> ComputeBudget:
    if b < 0:
        raise ValueError("batch size must be non-negative")
    cycles = b * dev.cycles_per_unit
    return ComputeBudget(cycles / dev.cpu_freq, cfg.capacitance * cycles * dev.cpu_freq**2)


def energy_per_unit(cfg: SystemConfig, dev: DeviceConfig) -> float:
    """Joules spent training one unit of data (alpha * C * f^2)."""
    return cfg.capacitance * dev.cycles_per_unit * dev.cpu_freq**2


def compute_power(cfg: SystemConfig, dev: DeviceConfig) -> float:
    """Power drawn while the CPU runs (alpha * f^3)."""
    return cfg.capacitance * dev.cpu_freq**3


def rate(cfg: SystemConfig, h: float, power: float) -> float:
    return cfg.bandwidth * math.log2(1.0 + power * h / cfg.noise_power)


def link_budget(cfg: SystemConfig, dev: DeviceConfig, h: float, power: float,
                upload: int) -> LinkBudget:
    if not upload:
        return LinkBudget(0.0, 0.0, 0.0)
    if power <= 0:
        raise ValueError("an uploading device needs positive power")
    r = rate(cfg, h, power)
    t = cfg.model_size / r
    return LinkBudget(r, t, power * t)


def threshold_power(cfg: SystemConfig, h: float) -> float:
    """Power at which the payload takes exactly one iteration to upload."""
    expo = cfg.model_size / (cfg.bandwidth * cfg.iteration_duration)
    return cfg.noise_power / h * math.expm1(expo * LN2)


def threshold_energy(cfg: SystemConfig, h: float) -> float:
    """Smallest energy that still delivers the payload within one iteration."""
    if h <= 0:
        raise ValueError("channel gain must be positive")
    return cfg.iteration_duration * threshold_power(cfg, h)


def budget_from_power(cfg: SystemConfig, dev: DeviceConfig, h: float, power: float) -> float:
    """Evaluate the spend curve at ``power``."""
    t_com = cfg.model_size / rate(cfg, h, power)
    return (cfg.iteration_duration - t_com) * compute_power(cfg, dev) + t_com * power


def max_energy_budget(cfg: SystemConfig, dev: DeviceConfig, h: float) -> float:
    """Spend curve at full power, or 0 when the link cannot finish in time."""
    t_com = cfg.model_size / rate(cfg, h, dev.max_power)
    if t_com > cfg.iteration_duration:
        return 0.0
    return (cfg.iteration_duration - t_com) * compute_power(cfg, dev) + t_com * dev.max_power


def lambert_w0(x: float, tol: float = 1e-12, max_iter: int = 64) -> float:
    """Principal branch of the Lambert W function by Halley iteration.

    Solves ``w * exp(w) = x`` for ``w >= -1``.
    """
    x = float(x)
    if not x >= -INV_E:
        if x >= -INV_E - 1e-15:
            return -1.0
        raise ValueError(f"lambert_w0 is undefined for x < -1/e (got {x})")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    # initial guess
    if x < -0.32:
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif x < 3.0:
        w = math.log1p(x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return w


def _lambert_w0_log(logx: float) -> float:
    """W0(exp(logx)) for large arguments, via Newton on w + ln w = logx."""
    w = logx - math.log(logx) if logx > 1 else 1.0
    for _ in range(64):
        step = (w + math.log(w) - logx) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-15 * w:
            break
    return w


def power_from_budget_bisect(cfg: SystemConfig, dev: DeviceConfig, h: float,
                             budget: float, rtol: float = 1e-13) -> float:
    """Invert the spend curve by bisection on ``(P_th, P_max]``."""
    lo, hi = threshold_power(cfg, h), dev.max_power
    _check_domain(cfg, dev, h, budget)
    if budget_from_power(cfg, dev, h, hi) <= budget:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if budget_from_power(cfg, dev, h, mid) < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def power_from_budget_closed(cfg: SystemConfig, dev: DeviceConfig, h: float,
                             budget: float) -> float | None:
    """Closed-form inversion through the principal Lambert W branch.

    With ``x = 1 + P h / sigma^2``, ``K = M ln2 / W``, ``s = sigma^2 / h``,
    ``a = alpha f^3`` and ``D = budget - tau a``, the spend relation becomes
    ``K s x = D ln x + K (s + a)``.  For ``D < 0`` its unique root is

        ln x = -W0(z) - K (s + a) / D,   z = -(K s / D) exp(-K (s + a) / D)

    For ``D > 0`` the root sits on the W_{-1} branch; ``None`` is returned and
    callers fall back to bisection.
    """
    a = compute_power(cfg, dev)
    s = cfg.noise_power / h
    k = cfg.model_size * LN2 / cfg.bandwidth
    d = budget - cfg.iteration_duration * a
    if d == 0.0:
        return a
    if d > 0.0:
        return None
    c = k * (s + a) / d  # negative
    log_z = math.log(k * s / -d) - c
    if log_z < 700.0:
        w = lambert_w0(math.exp(log_z))
    else:
        w = _lambert_w0_log(log_z)
    u = -w - c
    return s * math.expm1(u)


def _check_domain(cfg: SystemConfig, dev: DeviceConfig, h: float, budget: float) -> None:
    e_th = threshold_energy(cfg, h)
    e_max = max_energy_budget(cfg, dev, h)
    if not e_th < budget <= e_max * (1 + 1e-12):
        raise BudgetDomainError(
            f"budget {budget:.6g} J outside ({e_th:.6g}, {e_max:.6g}] for this channel"
        )


def power_from_budget(cfg: SystemConfig, dev: DeviceConfig, h: float, budget: float) -> float:
    """Unique transmit power whose spend curve equals ``budget``.

    The Lambert W closed form is used when it applies and reproduces the
    budget; otherwise the monotone relation is bisected.
    """
    _check_domain(cfg, dev, h, budget)
    p = power_from_budget_closed(cfg, dev, h, budget)
    if p is not None and threshold_power(cfg, h) < p <= dev.max_power * (1 + 1e-12):
        resid = abs(budget_from_power(cfg, dev, h, p) - budget)
        if resid <= 1e-9 * max(abs(budget), 1.0):
            return min(p, dev.max_power)
    return power_from_budget_bisect(cfg, dev, h, budget)


def spend_curve(cfg: SystemConfig, dev: DeviceConfig, h: float, powers) -> np.ndarray:
    """Vectorised :func:`budget_from_power`."""
    p = np.asarray(powers, dtype=float)
    t_com = cfg.model_size / (cfg.bandwidth * np.log2(1.0 + p * h / cfg.noise_power))
    return (cfg.iteration_duration - t_com) * compute_power(cfg, dev) + t_com * p
