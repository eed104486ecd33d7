"""Entropy accumulation toolkit: Rényi divergences and conditional entropies,
pinching, EAT bounds and a blind randomness-expansion simulator."""

from .linalg import DensityMatrix, Operator, PureState, SystemLayout
from .channels import KrausChannel
from .entropy import (
    cond_renyi_down,
    cond_renyi_up,
    max_entropy,
    min_entropy,
    renyi_divergence,
)
from .eat import TradeoffFunction, eat_bound_auto_alpha, eat_bound_testing, rate_curve

__version__ = "0.1.0"
