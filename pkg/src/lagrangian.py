# src/lagrangian.py
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .channel import Allocation, ChannelState, SystemParams, rate_terms
from .errors import DomainError
from .utils import LN2

MULTIPLIERS = ("lambda1", "lambda2", "mu", "eta", "zeta1", "zeta2")


@dataclass(frozen=True)
class DualState:
    """Multipliers of C1, C2, C3 (mu), C4 (eta) and the upper boxes of phi1, phi2."""

    lambda1: float = 1.0
    lambda2: float = 1.0
    mu: float = 1.0
    eta: float = 1.0
    zeta1: float = 1.0
    zeta2: float = 1.0
    iter: int = 0

    def __post_init__(self):
        for name in MULTIPLIERS:
            if getattr(self, name) < 0.0:
                raise DomainError(f"multiplier {name} must be >= 0 (got {getattr(self, name)})")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in MULTIPLIERS], dtype=float)

    @classmethod
    def from_array(cls, values, iter: int = 0) -> "DualState":
        return cls(*(float(v) for v in values), iter=iter)

    @classmethod
    def uniform(cls, value: float) -> "DualState":
        return cls(*([float(value)] * len(MULTIPLIERS)))

    def as_row(self) -> Tuple[float, ...]:
        return (self.iter, *self.as_array().tolist())


def lagrangian_values(ch: ChannelState, sp: SystemParams, d: DualState, T, lam, phi1, phi2, Pr, nats: bool = False):
    """Lagrangian over scalars or broadcast arrays.

    With nats=True every rate-valued term (Rmin included) is measured in nats;
    the eta and zeta terms are unchanged.
    """
    R1, R2, R3, R1bar = rate_terms(ch, sp, lam, phi1, phi2, Pr)
    rate_part = (
        T * R1 + T * R2 + (1.0 - T) * R3
        + d.lambda1 * (T * R1 - sp.Rmin)
        + d.lambda2 * (T * R2 + (1.0 - T) * R3 - sp.Rmin)
        + d.mu * (T * R1bar - T * R2 - (1.0 - T) * R3)
    )
    if nats:
        rate_part = LN2 * rate_part
    return rate_part + d.eta * (sp.Pr_max - Pr) + d.zeta1 * (1.0 - phi1) + d.zeta2 * (1.0 - phi2)


def lagrangian(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState, nats: bool = False) -> float:
    return float(lagrangian_values(ch, sp, d, a.T, a.lambda_split, a.phi1, a.phi2, a.Pr, nats=nats))


def relay_lagrangian_values(ch: ChannelState, sp: SystemParams, d: DualState, T: float, phi2: float, Pr):
    """Pr-dependent part of the Lagrangian once C3 is written as a cap on Pr."""
    log1p = np.log1p if isinstance(Pr, np.ndarray) else math.log1p
    k = ch.h1 + phi2 * ch.f2 * ch.h2
    return (1.0 - T) * (1.0 + d.lambda2) * log1p(Pr * k / ch.sigma2) - (d.eta + d.mu) * Pr + d.eta * sp.Pr_max


def relay_lagrangian(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> float:
    return float(relay_lagrangian_values(ch, sp, d, a.T, a.phi2, a.Pr))
