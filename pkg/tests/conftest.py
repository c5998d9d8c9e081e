import numpy as np
import pytest

from fedsched.model import default_config


@pytest.fixture
def cfg():
    return default_config()


@pytest.fixture
def dev(cfg):
    return cfg.devices[0]


def snr_gain(cfg, dev, snr):
    """Gain giving ``max_power * h / noise_power == snr``."""
    return snr * cfg.noise_power / dev.max_power


def random_instance(rng: np.random.Generator):
    """Random but physically sensible (config, device, gain) triple."""
    cfg = default_config(
        num_devices=1,
        cycles_per_unit=float(rng.uniform(1e10, 1.9e10)),
        cpu_freq=float(rng.uniform(2e9, 4e9)),
        max_power=float(rng.uniform(0.1, 1.0)),
    )
    dev = cfg.devices[0]
    # keep the full-power link able to finish inside one iteration
    snr = float(rng.uniform(1.2, 50.0))
    return cfg, dev, snr_gain(cfg, dev, snr)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
