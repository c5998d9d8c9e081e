"""TOML configuration files.

Layout::

    [system]        # SystemConfig scalars
    num_subchannels = 5
    noise_power = 1e-10

    [[devices]]     # one table per device group; ``count`` repeats it
    count = 10
    arrival_rate = 3.0

    [channel]       # optional; default levels otherwise
    gains = [3e-10, 7.5e-10, 1.875e-9]
    probs = [0.25, 0.5, 0.25]

    [learning]      # step sizes, tolerances, update rule
    c_gamma = 0.1

    [experiment]    # only needed by sweeps
    variable = "arrival_rate"
    values = [1, 2, 3, 4, 5]
    policies = ["proposed", "myopic"]
    seeds = [0, 1, 2]
    horizon = 5000
    burn_in = 1000

Every section is optional.  Unknown sections or keys raise
:class:`~fedsched.model.ConfigError` naming the offending path.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .learning import LearningConfig, StepSchedule
from .model import (ChannelLevel, ConfigError, DeviceConfig, SystemConfig,
                    default_channel_levels, validate_config)

SYSTEM_KEYS = ("num_subchannels", "bandwidth", "iteration_duration", "capacitance",
               "model_size", "noise_power", "energy_quantum", "zeta")
DEVICE_KEYS = tuple(f.name for f in dataclasses.fields(DeviceConfig))
SCHEDULE_KEYS = tuple(f.name for f in dataclasses.fields(StepSchedule))
LEARNING_KEYS = ("tol_v", "tol_gamma", "pmf_tail", "rule", "objective")
EXPERIMENT_KEYS = ("variable", "values", "policies", "seeds", "horizon", "burn_in",
                   "output", "csi_cutoff")


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    learning: LearningConfig
    experiment: dict[str, Any]


def _check_keys(path: str, table: dict, allowed) -> None:
    if not isinstance(table, dict):
        raise ConfigError(path, "must be a table")
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _system(doc: dict) -> SystemConfig:
    sys_tab = doc.get("system", {})
    _check_keys("system", sys_tab, SYSTEM_KEYS)
    devices: list[DeviceConfig] = []
    groups = doc.get("devices", [{"count": 10}])
    if not isinstance(groups, list):
        raise ConfigError("devices", "must be an array of tables")
    for i, g in enumerate(groups):
        _check_keys(f"devices[{i}]", g, DEVICE_KEYS + ("count",))
        fields = {k: v for k, v in g.items() if k != "count"}
        count = g.get("count", 1)
        if not isinstance(count, int) or count < 1:
            raise ConfigError(f"devices[{i}].count", "must be a positive integer")
        devices.extend([DeviceConfig(**fields)] * count)

    noise = sys_tab.get("noise_power", SystemConfig.noise_power)
    chan = doc.get("channel")
    if chan is None:
        max_power = devices[0].max_power if devices else DeviceConfig.max_power
        levels = default_channel_levels(noise, max_power)
    else:
        _check_keys("channel", chan, ("gains", "probs"))
        gains, probs = chan.get("gains"), chan.get("probs")
        if gains is None or probs is None or len(gains) != len(probs):
            raise ConfigError("channel", "gains and probs must be given with equal length")
        levels = tuple(ChannelLevel(float(h), float(p)) for h, p in zip(gains, probs))
    return validate_config(SystemConfig(devices=tuple(devices), channel_levels=levels, **sys_tab))


def _learning(doc: dict) -> LearningConfig:
    tab = doc.get("learning", {})
    _check_keys("learning", tab, SCHEDULE_KEYS + LEARNING_KEYS)
    rest = {k: v for k, v in tab.items() if k in LEARNING_KEYS}
    try:
        sched = StepSchedule(**{k: v for k, v in tab.items() if k in SCHEDULE_KEYS})
        return LearningConfig(schedule=sched, **rest)
    except ValueError as err:
        raise ConfigError("learning", str(err)) from None


def parse_config(doc: dict) -> RunConfig:
    """Build configuration objects from an already parsed TOML document."""
    _check_keys("<root>", doc, ("system", "devices", "channel", "learning", "experiment"))
    exp = doc.get("experiment", {})
    _check_keys("experiment", exp, EXPERIMENT_KEYS)
    return RunConfig(_system(doc), _learning(doc), dict(exp))


def load_config(path: str | Path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(str(path), f"invalid TOML: {err}") from None
    return parse_config(doc)
