# src/kkt.py
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .channel import Allocation, ChannelState, SystemParams, objective
from .errors import DegenerateDenominatorError, DomainError
from .lagrangian import DualState, lagrangian_values, relay_lagrangian_values
from .utils import exp2_safe, get_logger

log = get_logger("KKT")

PHI1_GRID_POINTS = 200
GOLDEN_TOL = 1e-10
GOLDEN_MAX_ITERS = 80
PHI1_AGREE_TOL = 1e-3
REAL_ROOT_IMAG_TOL = 1e-8

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class QuinticCoeffs:
    theta0: float
    theta1: float
    theta2: float
    theta3: float
    theta4: float
    # The stationarity numerator stops at phi1^4; the fifth-degree slot stays empty.
    theta5: float = 0.0

    def raw(self) -> np.ndarray:
        return np.array([self.theta5, self.theta4, self.theta3, self.theta2, self.theta1, self.theta0])

    def as_poly(self) -> np.ndarray:
        """Monic coefficients, highest degree first, the order numpy.roots expects.

        Leading zeros are dropped and the rest is divided by the first nonzero
        coefficient. An all-zero polynomial comes back unchanged.
        """
        raw = self.raw()
        nonzero = np.flatnonzero(raw)
        if nonzero.size == 0:
            return raw
        lead = nonzero[0]
        with np.errstate(invalid="ignore", over="ignore"):
            return raw[lead:] / raw[lead]


@dataclass(frozen=True)
class LambdaBounds:
    alpha_L1: float
    alpha_U1: float
    alpha_L: float
    alpha_U: float

    @property
    def empty(self) -> bool:
        return self.alpha_L > self.alpha_U


@dataclass(frozen=True)
class Phi1Solution:
    value: float
    source: str  # polynomial | scalar_search | fallback | flat
    lagrangian: float


# -------- phi1: stationarity polynomial --------

def quintic_coeffs(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> QuinticCoeffs:
    f1, f2, g1, g2, g3 = ch.f1, ch.f2, ch.g1, ch.g2, ch.g3
    s = ch.sigma2
    P, be, T = sp.P, sp.beta, a.T
    L = a.lambda_split
    G = 1.0 + L
    Gb = L - 1.0
    l1, l2, mu, z1 = d.lambda1, d.lambda2, d.mu, d.zeta1
    nu = 1.0 + l1

    # recurring factors
    u2 = (g2 * P + s) * (g2 * L * P + s)
    u1 = (g1 * P + s) * (g1 * L * P + s)
    sic = be * g1 * Gb * P - g1 * L * P - s
    w = 2 * g2 * L * P + s + L * s
    q = be * g1 * Gb * P * (2 * g1 * L * P + s + L * s) - (g1 * L * P + s) * (3 * g1 * L * P + s + 2 * L * s)
    r = g1 ** 2 * L ** 2 * nu * P ** 2 + g1 * (L * G * nu + Gb * (-be + (-1 + be) * L) * mu) * P * s + (L + L * l1 + mu - L * mu) * s ** 2

    theta0 = (
        f1 * g3 * P * u2 * r * T
        + sic * u1 * (f2 * g3 * Gb * (1 + l2 - mu) * P * s * T + u2 * z1)
    )

    theta1 = g3 * P * (
        f1 ** 2 * g3 * L * P * u2 * (2 * g1 * L * nu * P + (G + l1 + L * l1 + mu - L * mu) * s) * T
        + f2 * sic * u1 * w * z1
        + f1 * (
            f2 * g3 * P * (
                2 * g1 ** 2 * g2 * L ** 3 * nu * P ** 3
                + g1 * L * (
                    2 * be * Gb ** 2 * (g1 * (1 + l2 - mu) + g2 * mu)
                    + L * (2 * g2 * (1 + L + l1 + L * l1 + mu - L * mu)
                           + g1 * (4 + l1 + 3 * l2 - 3 * mu + L * (-2 + l1 - 3 * l2 + 3 * mu)))
                ) * P ** 2 * s
                + (
                    be * g1 * Gb ** 2 * G * (1 + l2)
                    + L * (2 * g2 * (L + L * l1 + mu - L * mu)
                           + g1 * (5 + l1 + 4 * l2 - 3 * mu + L * (L * (-1 + l1 - 2 * l2 + mu) + 2 * (l1 - l2 + mu))))
                ) * P * s ** 2
                + (1 + l2 + L * (2 + l1 + l2 - mu + L * (-1 + l1 - 2 * l2 + mu))) * s ** 3
            ) * T
            + u2 * q * z1
        )
    )

    theta2 = g3 ** 2 * P ** 2 * (
        f1 ** 3 * g3 * L ** 2 * nu * P * u2 * T
        + f2 ** 2 * L * sic * u1 * z1
        + f1 ** 2 * L * (
            f2 * g3 * P * (
                s * (2 * g2 * L * (nu + L * (nu - mu) + mu) * P
                     + (3 + l1 + 2 * l2 - mu + L * (1 + (1 + G) * l1 - G * l2 + mu)) * s)
                + g1 * P * (4 * g2 * L ** 2 * nu * P
                            + (be * Gb ** 2 * (1 + l2 - mu) + L * (5 + 2 * l1 + 3 * l2 - 3 * mu + L * (-1 + 2 * l1 - 3 * l2 + 3 * mu))) * s)
            ) * T
            + u2 * (be * g1 * Gb * P - 3 * g1 * L * P - (1 + G) * s) * z1
        )
        + f1 * f2 * (
            f2 * g3 * L * P * r * T
            + w * q * z1
        )
    )

    theta3 = f1 * g3 ** 3 * L * P ** 3 * (
        f2 ** 2 * q * z1
        + f1 ** 2 * L * (
            f2 * g3 * P * (2 * g2 * L * (1 + l1) * P + (2 + l1 + L * l1 + l2 - L * l2 + Gb * mu) * s) * T
            - u2 * z1
        )
        + f1 * f2 * (
            f2 * g3 * L * P * (2 * g1 * L * nu * P + (1 + L + l1 + L * l1 + mu - L * mu) * s) * T
            + w * (g1 * (-be + (-3 + be) * L) * P - (2 + L) * s) * z1
        )
    )

    theta4 = f1 ** 2 * f2 * g3 ** 4 * L ** 2 * P ** 4 * (
        f1 * f2 * g3 * L * nu * P * T
        - f1 * w * z1
        + f2 * (be * g1 * Gb * P - 3 * g1 * L * P - (1 + G) * s) * z1
    )

    return QuinticCoeffs(
        theta0=float(theta0),
        theta1=float(theta1),
        theta2=float(theta2),
        theta3=float(theta3),
        theta4=float(theta4),
    )


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = GOLDEN_TOL, max_iter: int = GOLDEN_MAX_ITERS) -> Tuple[float, float]:
    """Maximize a unimodal f on [lo, hi]; returns (x, f(x))."""
    c = hi - GOLDEN_RATIO * (hi - lo)
    e = lo + GOLDEN_RATIO * (hi - lo)
    fc, fe = f(c), f(e)
    it = 0
    while (hi - lo) > tol and it < max_iter:
        if fc < fe:
            lo, c, fc = c, e, fe
            e = lo + GOLDEN_RATIO * (hi - lo)
            fe = f(e)
        else:
            hi, e, fe = e, c, fc
            c = hi - GOLDEN_RATIO * (hi - lo)
            fc = f(c)
        it += 1
    x = 0.5 * (lo + hi)
    return x, f(x)


def _phi1_lagrangian(ch, sp, a, d):
    def f(x):
        return lagrangian_values(ch, sp, d, a.T, a.lambda_split, x, a.phi2, a.Pr, nats=True)
    return f


def phi1_scalar_search(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> Tuple[float, float]:
    """Coarse grid on [0, 1] refined by golden section around the best cell."""
    f = _phi1_lagrangian(ch, sp, a, d)
    grid = np.linspace(0.0, 1.0, PHI1_GRID_POINTS)
    vals = f(grid)
    i = int(np.argmax(vals))
    best_x, best_v = float(grid[i]), float(vals[i])

    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, PHI1_GRID_POINTS - 1)])
    x, v = golden_section_max(lambda t: float(f(t)), lo, hi)
    if v > best_v:
        best_x, best_v = x, float(v)
    return best_x, best_v


def solve_phi1_detailed(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> Phi1Solution:
    search_x, search_v = phi1_scalar_search(ch, sp, a, d)
    if not ch.has_backscatter:
        return Phi1Solution(value=search_x, source="flat", lagrangian=search_v)

    coeffs = quintic_coeffs(ch, sp, a, d)
    try:
        poly = coeffs.as_poly()
        if not np.all(np.isfinite(poly)):
            raise np.linalg.LinAlgError("non-finite polynomial coefficients")
        roots = np.roots(poly)
    except np.linalg.LinAlgError as exc:
        log.warning(f"phi1 root finding failed ({exc}); using scalar search")
        return Phi1Solution(value=search_x, source="fallback", lagrangian=search_v)

    real = roots[np.abs(roots.imag) < REAL_ROOT_IMAG_TOL].real
    candidates = np.concatenate([real[(real >= 0.0) & (real <= 1.0)], [0.0, 1.0]])
    vals = _phi1_lagrangian(ch, sp, a, d)(candidates)
    j = int(np.argmax(vals))
    poly_x, poly_v = float(candidates[j]), float(vals[j])

    source = "polynomial" if poly_v >= search_v - PHI1_AGREE_TOL else "scalar_search"
    if poly_v >= search_v:
        return Phi1Solution(value=poly_x, source=source, lagrangian=poly_v)
    return Phi1Solution(value=search_x, source=source, lagrangian=search_v)


def solve_phi1(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> float:
    return solve_phi1_detailed(ch, sp, a, d).value


# -------- phi2 and Pr closed forms --------

def solve_phi2(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> float:
    """Stationary phi2 of the Lagrangian, clipped to [0, 1].

    omega = (-f2*h2*(1 + lambda2 - mu)*Pr*(T - 1) - (h1*Pr + sigma2)*zeta2) / (f2*h2*Pr*zeta2).
    The second-slot link through the tag is U1 -> tag -> U2, so the gain is f2*h2,
    matching R3; f2*g3 would belong to the first slot.
    """
    link = ch.f2 * ch.h2
    denom = link * a.Pr * d.zeta2
    if denom == 0.0:
        raise DegenerateDenominatorError(
            f"phi2 closed form undefined: f2*h2*Pr*zeta2 = 0 (Pr={a.Pr}, zeta2={d.zeta2})"
        )
    omega = (-link * (1.0 + d.lambda2 - d.mu) * a.Pr * (a.T - 1.0) - (ch.h1 * a.Pr + ch.sigma2) * d.zeta2) / denom
    return min(1.0, max(0.0, omega))


def solve_pr(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> float:
    """Stationary relay power, clipped to [0, Pr_max].

    Psi = ((1 + lambda2)*(1 - T)*k - (eta + mu)*sigma2) / ((eta + mu)*k) with
    k = h1 + f2*h2*phi2, the same relay gain R3 uses.
    """
    k = ch.h1 + ch.f2 * ch.h2 * a.phi2
    pen = d.eta + d.mu
    denom = pen * k
    if denom == 0.0:
        raise DegenerateDenominatorError(f"Pr closed form undefined: (eta+mu)*k = 0 (eta+mu={pen}, k={k})")
    gain = (1.0 + d.lambda2) * (1.0 - a.T)
    psi_cap = (ch.h1 * gain + ch.f2 * ch.h2 * gain * a.phi2 - pen * ch.sigma2) / denom
    return min(sp.Pr_max, max(0.0, psi_cap))


def update_phi2(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> float:
    try:
        return solve_phi2(ch, sp, a, d)
    except DegenerateDenominatorError:
        ends = np.array([0.0, 1.0])
        vals = lagrangian_values(ch, sp, d, a.T, a.lambda_split, a.phi1, ends, a.Pr, nats=True)
        return float(ends[int(np.argmax(vals))])


def update_pr(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState) -> float:
    try:
        return solve_pr(ch, sp, a, d)
    except DegenerateDenominatorError:
        ends = np.array([0.0, sp.Pr_max])
        vals = relay_lagrangian_values(ch, sp, d, a.T, a.phi2, ends)
        return float(ends[int(np.argmax(vals))])


# -------- power split --------

def lambda_bounds(ch: ChannelState, sp: SystemParams, a: Allocation, pr_star: float) -> LambdaBounds:
    T, P, s = a.T, sp.P, ch.sigma2
    if not 0.0 < T < 1.0:
        raise DomainError(f"lambda bounds need T in (0, 1) (got {T})")

    u1 = ch.g1 + ch.f1 * ch.g3 * a.phi1
    u2 = ch.g2 + ch.f2 * ch.g3 * a.phi1
    if u1 <= 0.0:
        raise DomainError("lambda lower bound undefined: g1 + f1*g3*phi1 = 0")
    if u2 <= 0.0:
        raise DomainError("lambda upper bound undefined: g2 + f2*g3*phi1 = 0")

    y = exp2_safe(sp.Rmin / T)
    if math.isinf(y):
        alpha_L1 = math.inf
    else:
        alpha_L1 = (y - 1.0) * (sp.beta * ch.g1 * P + s) / (
            P * (ch.g1 - sp.beta * ch.g1 + sp.beta * y * ch.g1 + ch.f1 * ch.g3 * a.phi1)
        )

    Rr = (1.0 - T) * math.log2(1.0 + pr_star * (ch.h1 + a.phi2 * ch.f2 * ch.h2) / s)
    x = exp2_safe((sp.Rmin - (1.0 - T) * Rr) / T)
    if math.isinf(x):
        alpha_U1 = -math.inf
    elif x == 0.0:
        alpha_U1 = math.inf
    else:
        alpha_U1 = (P * u2 - (x - 1.0) * s) / (x * P * u2)

    alpha_L = min(1.0, max(0.0, min(alpha_L1, 1.0)))
    alpha_U = min(1.0, max(0.0, max(alpha_U1, 0.0)))
    return LambdaBounds(alpha_L1=alpha_L1, alpha_U1=alpha_U1, alpha_L=alpha_L, alpha_U=alpha_U)


def solve_lambda(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState,
                 bounds: LambdaBounds) -> Optional[float]:
    """Better end of [alpha_L, alpha_U] by sum rate; None when the interval is empty."""
    if bounds.empty:
        return None
    lo = objective(ch, sp, replace(a, lambda_split=bounds.alpha_L))
    hi = objective(ch, sp, replace(a, lambda_split=bounds.alpha_U))
    return bounds.alpha_L if lo >= hi else bounds.alpha_U


def lambda_eigenvalue(ch: ChannelState, sp: SystemParams, a: Allocation) -> float:
    """Curvature of the sum rate in Lambda, with rates in nats (divide by ln 2 for bits)."""
    L = a.lambda_split
    s = ch.sigma2
    av = sp.P * (ch.g2 + a.phi1 * ch.f2 * ch.g3)
    b = sp.P * (ch.g1 + a.phi1 * ch.f1 * ch.g3)
    c = sp.P * ch.g1 * sp.beta
    Lb = L - 1.0

    m = 2 * c * (c * Lb - s) + b * (c - 2 * c * L + s)
    k1 = (
        c ** 4 * Lb ** 4
        + s ** 3 * (2 * b * L + s)
        + 2 * c * s ** 2 * (b * (3 - 2 * L) * L - 2 * Lb * s)
        - 2 * c ** 3 * Lb * (b * L * (1 - L + L ** 2) + 2 * Lb ** 2 * s)
        + c ** 2 * (b ** 2 * L ** 4 + 2 * b * L * (3 - 4 * L + 2 * L ** 2) * s + 6 * Lb ** 2 * s ** 2)
    )
    kappa = av ** 2 * k1 - 2 * av * b * L * s * (c + s) * m - b * s ** 2 * (c + s) * m
    chi = (av * L + s) ** 2 * (c - c * L + s) ** 2 * (c + b * L - c * L + s) ** 2
    return a.T * kappa / chi
