"""Finite-size key-length analysis for Gaussian-modulated coherent-state CV-QKD.

Submodules:

``special_functions``
    Incomplete beta and gamma functions with their inverses.
``confidence``
    Parameter-estimation confidence intervals (Beta and Gaussian families).
``estimation``
    Moments, shot-noise calibration, entropy and channel-parameter extraction.
``security``
    Holevo bound, AEP and hashing penalties, composable key length.
``simulator``
    Deterministic synthetic data.
``pipeline`` and ``cli``
    End-to-end runs and the ``cvqkd-finite`` command.
"""
from .confidence import IntervalMethod, cov_lower_bound, var_upper_bound
from .errors import ConfigError, DataFormatError, NumericalError
from .estimation import MomentEstimates, TrustedReceiver, channel_params, empirical_moments, worst_case_moments
from .security import KeyLengthReport, SecurityBudget, holevo_bound, key_length
from .simulator import ChannelModel, SeededStream, generate_symbols

__version__ = "0.1.0"

__all__ = [
    "ChannelModel",
    "ConfigError",
    "DataFormatError",
    "IntervalMethod",
    "KeyLengthReport",
    "MomentEstimates",
    "NumericalError",
    "SecurityBudget",
    "SeededStream",
    "TrustedReceiver",
    "channel_params",
    "cov_lower_bound",
    "empirical_moments",
    "generate_symbols",
    "holevo_bound",
    "key_length",
    "var_upper_bound",
    "worst_case_moments",
]
