from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedsched.model import (Action, ChannelLevel, ConfigError, GlobalState, SystemConfig,
                            battery_update, check_action_feasible, default_config,
                            from_quanta, to_quanta, validate_config)
from fedsched.physics import power_from_budget

from conftest import snr_gain


def test_defaults_valid():
    cfg = validate_config(default_config())
    assert cfg.num_devices == 10 and cfg.num_subchannels == 5
    assert cfg.bandwidth == 1e5 and cfg.iteration_duration == 10.0
    assert cfg.capacitance == 1e-28 and cfg.model_size == 1e6
    assert all(d.outage_limit == 0.04 for d in cfg.devices)


def test_probabilities_must_sum_to_one():
    levels = tuple(ChannelLevel(g, 0.18) for g in (1e-10, 2e-10, 3e-10, 4e-10, 5e-10))
    with pytest.raises(ConfigError, match="probabilities must sum to 1"):
        validate_config(replace(default_config(), channel_levels=levels))


def test_zero_subchannels():
    with pytest.raises(ConfigError) as err:
        validate_config(replace(default_config(), num_subchannels=0))
    assert err.value.path == "num_subchannels"


@pytest.mark.parametrize("field, value", [("max_power", -1.0), ("outage_limit", 1.0),
                                          ("battery_capacity", 0), ("cpu_freq", float("nan"))])
def test_device_field_path(field, value):
    with pytest.raises(ConfigError) as err:
        validate_config(default_config().with_devices(**{field: value}))
    assert err.value.path == f"devices[0].{field}"


def test_gains_increasing():
    levels = (ChannelLevel(2e-10, 0.5), ChannelLevel(1e-10, 0.5))
    with pytest.raises(ConfigError, match="increasing"):
        validate_config(replace(default_config(), channel_levels=levels))


def test_no_devices():
    with pytest.raises(ConfigError):
        validate_config(SystemConfig(devices=()))


@given(st.floats(0, 1e3, allow_nan=False))
def test_quanta_round_trip(joules):
    q = to_quanta(joules)
    slack = 1e-9 * max(1.0, joules)
    assert -slack <= from_quanta(q) - joules < 1.0


def test_quanta_tolerates_round_off():
    assert to_quanta(3.0000000000001) == 3
    assert to_quanta(3.01) == 4
    assert list(to_quanta(np.array([0.0, 0.5, 2.0]))) == [0, 1, 2]


def _state(battery, channel):
    return GlobalState(np.asarray(battery), np.asarray(channel))


def test_zero_action_feasible(cfg):
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = _state(rng.integers(0, 7, 10), rng.integers(0, 5, 10))
        assert check_action_feasible(cfg, s, Action.zeros(10))


def test_too_many_uploads(cfg):
    n = cfg.num_devices
    s = _state(np.full(n, 6), np.full(n, 4))
    up = np.zeros(n, np.int64)
    up[: cfg.num_subchannels + 1] = 1
    dev = cfg.devices[0]
    h = cfg.gains[4]
    p = np.where(up, power_from_budget(cfg, dev, h, 3.0), 0.0)
    a = Action(np.where(up, 0.1, 0.0), up, p, np.where(up, 3, 0))
    rep = check_action_feasible(cfg, s, a)
    assert not rep.subchannels and not rep.feasible
    assert rep.delay and rep.energy_causality and rep.power_bounds


def test_delay_violation():
    # tau_cop = 6 s and tau_com = 5 s against tau = 10 s
    cfg = default_config(num_devices=1)
    dev = cfg.devices[0]
    h = snr_gain(cfg, dev, 3.0)
    cfg = replace(cfg, channel_levels=(ChannelLevel(h, 1.0),))
    s = _state([6], [0])
    a = Action([1.2], [1], [0.4], [6])
    rep = check_action_feasible(cfg, s, a)
    assert not rep.delay and not rep.feasible


def test_energy_causality(cfg):
    s = _state(np.full(10, 1), np.full(10, 4))
    a = Action(np.full(10, 0.5), np.zeros(10, np.int64), np.zeros(10), np.zeros(10, np.int64))
    rep = check_action_feasible(cfg, s, a)
    assert not rep.energy_causality


def test_upload_consistency(cfg):
    s = _state(np.full(10, 6), np.full(10, 4))
    a = Action(np.zeros(10), np.zeros(10, np.int64), np.full(10, 0.1), np.zeros(10, np.int64))
    assert not check_action_feasible(cfg, s, a).upload_consistency


def test_state_immutable_and_checked(cfg):
    s = _state(np.full(10, 3), np.zeros(10))
    with pytest.raises(ValueError):
        s.battery[0] = 1
    with pytest.raises(ValueError):
        _state(np.full(10, 7), np.zeros(10)).check(cfg)


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 20)),
                min_size=1, max_size=10))
def test_battery_update_bounds(rows):
    b, u, a = (np.array(x) for x in zip(*rows))
    cap = np.full(len(b), 6)
    nxt = battery_update(b, u, a, cap)
    assert np.all((nxt >= 0) & (nxt <= cap))
    assert np.all(nxt == np.minimum(np.maximum(b - u, 0) + a, cap))
