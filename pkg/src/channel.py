# src/channel.py
import math
from dataclasses import dataclass, fields, replace
from typing import Tuple

import numpy as np

from .errors import DomainError
from .utils import exp2_safe

# Largest T handed to the rate expressions; psi divides by (1 - T).
T_MAX = 1.0 - 1e-6

GAIN_FIELDS = ("g1", "g2", "g3", "h1", "h2", "f1", "f2")


@dataclass(frozen=True)
class ChannelState:
    """Linear power gains of one realization.

    g1, g2: BS -> U1, U2.  g3: BS -> tag.  h1: U1 -> U2 (relay link).
    h2: U1 -> tag.  f1, f2: tag -> U1, U2.
    """

    g1: float
    g2: float
    g3: float
    h1: float
    h2: float
    f1: float
    f2: float
    sigma2: float = 0.001

    def __post_init__(self):
        for name in GAIN_FIELDS:
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise DomainError(f"channel gain {name} must be finite and >= 0 (got {v})")
        if not math.isfinite(self.sigma2) or self.sigma2 <= 0.0:
            raise DomainError(f"sigma2 must be > 0 (got {self.sigma2})")

    def without_tag(self) -> "ChannelState":
        # Both links into the tag go dark, so phi1 and phi2 drop out of every rate.
        return replace(self, g3=0.0, h2=0.0)

    @property
    def has_backscatter(self) -> bool:
        return self.g3 * (self.f1 + self.f2) > 0.0


@dataclass(frozen=True)
class SystemParams:
    P: float
    Pr_max: float
    beta: float = 0.1
    Rmin: float = 0.1
    eps: float = 0.001
    delta_step: float = 0.01
    delta_init: float = 0.01
    max_dual_iters: int = 20000

    def __post_init__(self):
        if not self.P > 0.0:
            raise DomainError(f"P must be > 0 (got {self.P})")
        if not self.Pr_max >= 0.0:
            raise DomainError(f"Pr_max must be >= 0 (got {self.Pr_max})")
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"beta must lie in [0, 1] (got {self.beta})")
        if not self.Rmin >= 0.0:
            raise DomainError(f"Rmin must be >= 0 (got {self.Rmin})")
        for name in ("eps", "delta_step", "delta_init"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be > 0 (got {getattr(self, name)})")
        if self.max_dual_iters < 1:
            raise DomainError(f"max_dual_iters must be >= 1 (got {self.max_dual_iters})")


@dataclass(frozen=True)
class Allocation:
    T: float
    lambda_split: float
    phi1: float
    phi2: float
    Pr: float

    def within_bounds(self, sp: SystemParams, tol: float = 0.0) -> bool:
        unit = (self.T, self.lambda_split, self.phi1, self.phi2)
        if any(not (-tol <= v <= 1.0 + tol) for v in unit):
            return False
        return -tol <= self.Pr <= sp.Pr_max + tol

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass(frozen=True)
class RateBreakdown:
    R1: float
    R2: float
    R3: float
    R1bar: float
    psi: float
    Rr: float
    sum_rate: float


def dbm_to_linear(x_dbm: float) -> float:
    """dBm -> milliwatt-scale linear power."""
    return float(10.0 ** (x_dbm / 10.0))


def _log2_for(*args):
    return np.log2 if any(isinstance(v, np.ndarray) for v in args) else math.log2


def rate_terms(ch: ChannelState, sp: SystemParams, lam, phi1, phi2, Pr):
    """(R1, R2, R3, R1bar) in bits/s/Hz.

    Scalars go through math for speed; numpy arrays broadcast against each other.
    """
    log2 = _log2_for(lam, phi1, phi2, Pr)
    s = ch.sigma2
    P = sp.P
    u1 = ch.g1 + phi1 * ch.f1 * ch.g3
    u2 = ch.g2 + phi1 * ch.f2 * ch.g3
    k = ch.h1 + phi2 * ch.f2 * ch.h2

    R1 = log2(1.0 + P * lam * u1 / (P * (1.0 - lam) * ch.g1 * sp.beta + s))
    R2 = log2(1.0 + P * (1.0 - lam) * u2 / (P * lam * u2 + s))
    R3 = log2(1.0 + Pr * k / s)
    R1bar = log2(1.0 + P * (1.0 - lam) * u1 / (P * lam * u1 + s))
    return R1, R2, R3, R1bar


def evaluate_grid(ch: ChannelState, sp: SystemParams, T, lam, phi1, phi2, Pr):
    """Vectorized (objective, smallest residual of C1-C4) over broadcast arrays."""
    T, lam, phi1, phi2, Pr = (np.asarray(v, dtype=float) for v in (T, lam, phi1, phi2, Pr))
    R1, R2, R3, R1bar = rate_terms(ch, sp, lam, phi1, phi2, Pr)
    obj = T * (R1 + R2) + (1.0 - T) * R3
    c1 = T * R1 - sp.Rmin
    c2 = T * R2 + (1.0 - T) * R3 - sp.Rmin
    c3 = T * R1bar - T * R2 - (1.0 - T) * R3
    c4 = sp.Pr_max - Pr
    worst = np.minimum(np.minimum(c1, c2), np.minimum(c3, c4))
    return obj, worst


def compute_rates(ch: ChannelState, sp: SystemParams, a: Allocation, want_psi: bool = True) -> RateBreakdown:
    T = a.T
    if want_psi and T >= 1.0:
        raise DomainError(f"psi needs T < 1 (got T={T})")
    R1, R2, R3, R1bar = (float(r) for r in rate_terms(ch, sp, a.lambda_split, a.phi1, a.phi2, a.Pr))
    psi = (T * R1bar - T * R2) / (1.0 - T) if T < 1.0 else math.nan
    return RateBreakdown(
        R1=R1,
        R2=R2,
        R3=R3,
        R1bar=R1bar,
        psi=psi,
        Rr=(1.0 - T) * R3,
        sum_rate=T * R1 + T * R2 + (1.0 - T) * R3,
    )


def objective(ch: ChannelState, sp: SystemParams, a: Allocation) -> float:
    return compute_rates(ch, sp, a, want_psi=False).sum_rate


def constraint_residuals(ch: ChannelState, sp: SystemParams, a: Allocation) -> np.ndarray:
    r = compute_rates(ch, sp, a, want_psi=False)
    T = a.T
    return np.array([
        T * r.R1 - sp.Rmin,
        T * r.R2 + (1.0 - T) * r.R3 - sp.Rmin,
        T * r.R1bar - T * r.R2 - (1.0 - T) * r.R3,
        sp.Pr_max - a.Pr,
    ])


def is_feasible(ch: ChannelState, sp: SystemParams, a: Allocation, tol: float = 0.0) -> bool:
    if not a.within_bounds(sp):
        return False
    return bool(constraint_residuals(ch, sp, a).min() >= -tol)


def relay_power_cap(ch: ChannelState, a: Allocation, psi: float) -> float:
    """Largest Pr allowed by the SIC constraint rewritten as Pr <= (2^psi - 1) sigma2 / k."""
    k = ch.h1 + a.phi2 * ch.f2 * ch.h2
    if k <= 0.0:
        return math.inf
    return max(0.0, (exp2_safe(psi) - 1.0) * ch.sigma2 / k)
