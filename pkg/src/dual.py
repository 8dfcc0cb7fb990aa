# src/dual.py
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .channel import (
    T_MAX,
    Allocation,
    ChannelState,
    RateBreakdown,
    SystemParams,
    compute_rates,
    constraint_residuals,
    evaluate_grid,
    rate_terms,
    relay_power_cap,
)
from .errors import DomainError
from .kkt import LambdaBounds, lambda_bounds, solve_lambda, solve_phi1_detailed, update_phi2, update_pr
from .lagrangian import DualState
from .utils import get_logger

log = get_logger("DUAL")

FEAS_TOL = 1e-9

# Used when a dead direct link leaves the bounds undefined; the better end of [0, 1] wins.
UNIT_BOUNDS = LambdaBounds(alpha_L1=0.0, alpha_U1=1.0, alpha_L=0.0, alpha_U=1.0)


@dataclass(frozen=True)
class InnerSolveConfig:
    step: float = 0.01
    max_iters: int = 20000
    conv_tol: float = 1e-4
    trace: bool = False
    conv_window: int = 10
    decay: bool = False  # step / sqrt(t) instead of a constant step
    init_dual: float = 1.0
    recover: bool = True  # also score points with Pr pushed to the SIC cap

    def __post_init__(self):
        if not self.step > 0.0:
            raise DomainError(f"step must be > 0 (got {self.step})")
        if not self.conv_tol > 0.0:
            raise DomainError(f"conv_tol must be > 0 (got {self.conv_tol})")
        if self.max_iters < 1 or self.conv_window < 1:
            raise DomainError("max_iters and conv_window must be >= 1")


@dataclass
class InnerSolveResult:
    allocation: Allocation
    duals: DualState
    rates: RateBreakdown
    converged: bool
    iterations: int
    feasible: bool
    trace: Optional[List[DualState]] = None
    phi1_fallbacks: int = 0
    phi1_sources: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        """Sum rate, or -inf when nothing feasible was found."""
        return self.rates.sum_rate if self.feasible else -math.inf


def subgradient_step(ch: ChannelState, sp: SystemParams, a: Allocation, d: DualState,
                     cfg: InnerSolveConfig) -> DualState:
    res = np.concatenate([constraint_residuals(ch, sp, a), [1.0 - a.phi1, 1.0 - a.phi2]])
    step = cfg.step / math.sqrt(d.iter + 1) if cfg.decay else cfg.step
    new = np.maximum(0.0, d.as_array() - step * res)
    return DualState.from_array(new, iter=d.iter + 1)


class _BestSeen:
    """Best feasible point by sum rate, and the least-violating point as a fallback."""

    def __init__(self):
        self.best: Optional[Allocation] = None
        self.best_obj = -math.inf
        self.closest: Optional[Allocation] = None
        self.closest_worst = -math.inf

    def offer(self, points: List[Allocation], obj: np.ndarray, worst: np.ndarray):
        for p, o, w in zip(points, obj.tolist(), worst.tolist()):
            if w >= -FEAS_TOL:
                if o > self.best_obj:
                    self.best, self.best_obj = p, o
            elif w > self.closest_worst:
                self.closest, self.closest_worst = p, w

    @property
    def feasible(self) -> bool:
        return self.best is not None


def _candidates(ch: ChannelState, sp: SystemParams, a: Allocation, lams: List[float], recover: bool) -> List[Allocation]:
    points = [a]
    if not recover:
        return points
    T = a.T
    for lam in lams:
        _, R2, _, R1bar = rate_terms(ch, sp, lam, a.phi1, a.phi2, a.Pr)
        psi = T * (R1bar - R2) / (1.0 - T)
        points.append(replace(a, lambda_split=lam, Pr=min(sp.Pr_max, relay_power_cap(ch, a, psi))))
    return points


def _score(ch: ChannelState, sp: SystemParams, points: List[Allocation]):
    cols = np.array([p.as_tuple() for p in points]).T
    return evaluate_grid(ch, sp, *cols)


def inner_solve(ch: ChannelState, sp: SystemParams, T: float, cfg: InnerSolveConfig) -> InnerSolveResult:
    if not 0.0 < T < 1.0:
        raise DomainError(f"inner_solve needs T in (0, 1) (got {T})")
    T = min(T, T_MAX)

    d = DualState.uniform(cfg.init_dual)
    a = Allocation(T=T, lambda_split=0.5, phi1=0.5, phi2=0.5, Pr=sp.Pr_max / 2.0)
    seen = _BestSeen()
    changes = deque(maxlen=cfg.conv_window)
    trace: Optional[List[DualState]] = [] if cfg.trace else None
    sources: dict = {}
    converged = False
    iterations = 0

    for _ in range(cfg.max_iters):
        # -------- 1) primal sweep --------
        phi1 = solve_phi1_detailed(ch, sp, a, d)
        sources[phi1.source] = sources.get(phi1.source, 0) + 1
        a = replace(a, phi1=phi1.value)
        a = replace(a, phi2=update_phi2(ch, sp, a, d))
        pr_star = update_pr(ch, sp, a, d)
        a = replace(a, Pr=pr_star)

        try:
            bounds = lambda_bounds(ch, sp, a, pr_star)
        except DomainError as exc:
            log.debug(f"T={T:.6f}: {exc}; comparing lambda in {{0, 1}}")
            bounds = UNIT_BOUNDS
        lam = solve_lambda(ch, sp, a, d, bounds)
        if lam is not None:
            a = replace(a, lambda_split=lam)

        # -------- 2) best-seen tracking --------
        lams = [a.lambda_split] if bounds.empty else [a.lambda_split, bounds.alpha_L, bounds.alpha_U]
        points = _candidates(ch, sp, a, lams, cfg.recover)
        seen.offer(points, *_score(ch, sp, points))

        # -------- 3) dual update --------
        d_new = subgradient_step(ch, sp, a, d, cfg)
        changes.append(float(np.max(np.abs(d_new.as_array() - d.as_array()))))
        d = d_new
        iterations += 1
        if trace is not None:
            trace.append(d)
        if len(changes) == cfg.conv_window and max(changes) < cfg.conv_tol:
            converged = True
            break

    if seen.feasible:
        final, feasible = seen.best, True
    else:
        final, feasible = (seen.closest or a), False
    log.debug(
        f"T={T:.6f} iters={iterations} converged={converged} feasible={feasible} "
        f"value={seen.best_obj:.6f} phi1={sources}"
    )
    return InnerSolveResult(
        allocation=final,
        duals=d,
        rates=compute_rates(ch, sp, final),
        converged=converged,
        iterations=iterations,
        feasible=feasible,
        trace=trace,
        phi1_fallbacks=sources.get("fallback", 0),
        phi1_sources=sources,
    )
