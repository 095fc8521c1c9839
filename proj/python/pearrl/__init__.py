"""Preference-shift experiments with simulated survey participants."""

import json

from . import _core
from ._core import (
    ARM_COUNT,
    CONTEXT_COUNT,
    VALUE_LABELS,
    BanditState,
    ConfigError,
    DataError,
    DomainError,
    InsufficientDataError,
    PearrlError,
    ProtocolError,
    ReferenceRequiredError,
    TransportError,
    UsageError,
    arm_index,
    arm_values,
    cumulative_shift,
    discretize,
    extract_preference,
    interventions,
    kl_divergence,
    mann_whitney_u,
    normalize_reward,
    pearson,
    skewness,
    spearman,
    summarize_log,
    wizard_prompts,
)

__version__ = "0.1.0"


def sample_profiles(n, seed, config=None):
    return json.loads(_core.sample_profiles(n, seed, config))


def format_properties(profile):
    return _core.format_properties(json.dumps(profile))


def persona_system_prompt(profile):
    return _core.persona_system_prompt(json.dumps(profile))


def run_bandit(policy="ucb", steps=1000, seed=0, config=None, backend=None, log=None):
    """Run the bandit study and return its trial records as dicts."""
    return json.loads(_core.run_bandit(policy, steps, seed, config, backend, log))


def run_replication(n=4000, seed=0, workers=4, config=None, backend=None, log=None):
    """Run the fixed-intervention survey and return its trial records as dicts."""
    return json.loads(_core.run_replication(n, seed, workers, config, backend, log))


def read_log(path):
    return json.loads(_core.read_log(path))
