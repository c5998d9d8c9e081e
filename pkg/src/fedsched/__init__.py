"""Energy-aware scheduling of federated-learning clients.

Devices harvest energy, train on a batch of local data and upload a model
over a shared set of subchannels.  The package provides the device
physics, the random environment, a per-iteration optimizer, an online
learner for the long-run problem under an outage constraint, reference
policies and an experiment harness.
"""

__version__ = "0.1.0"

from .model import (Action, ChannelLevel, ConfigError, DeviceConfig, GlobalState,  # noqa: E402
                    SystemConfig, check_action_feasible, default_config, validate_config)
from .stochastics import Environment, arrival_pmf, make_rng  # noqa: E402
from .scheduler import DecisionTable, schedule  # noqa: E402
from .learning import LearnerState, LearningConfig, OnlineLearner, StepSchedule, learn  # noqa: E402
from .baselines import PolicyKind, csi_policy, myopic_policy, random_policy  # noqa: E402

__all__ = [
    "Action", "ChannelLevel", "ConfigError", "DeviceConfig", "GlobalState", "SystemConfig",
    "check_action_feasible", "default_config", "validate_config", "Environment",
    "arrival_pmf", "make_rng", "DecisionTable", "schedule", "LearnerState",
    "LearningConfig", "OnlineLearner", "StepSchedule", "learn", "PolicyKind",
    "csi_policy", "myopic_policy", "random_policy",
]
