# src/bisection.py
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .channel import T_MAX, Allocation, ChannelState, RateBreakdown, SystemParams, constraint_residuals
from .dual import InnerSolveConfig, InnerSolveResult, inner_solve
from .errors import DomainError
from .utils import get_logger

log = get_logger("BISECT")

T_MIN = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by every scheme; step size and iteration cap come from SystemParams."""

    conv_tol: float = 1e-4
    conv_window: int = 10
    trace: bool = False
    decay: bool = False
    faithful: bool = False
    prescan: bool = False
    prescan_points: int = 9
    nested_fallback: bool = True
    recover: bool = True
    bfs_points: int = 15
    bfs_budget: int = 10_000_000
    workers: int = 1

    def inner_config(self, sp: SystemParams) -> InnerSolveConfig:
        return InnerSolveConfig(
            step=sp.delta_step,
            max_iters=sp.max_dual_iters,
            conv_tol=self.conv_tol,
            trace=self.trace,
            conv_window=self.conv_window,
            decay=self.decay,
            recover=self.recover,
        )

    @property
    def use_prescan(self) -> bool:
        return self.prescan and not self.faithful and self.prescan_points >= 2

    @property
    def nested(self) -> bool:
        return self.nested_fallback and not self.faithful


@dataclass
class BisectionState:
    tau_L: float = 0.0
    tau_U: float = 1.0
    tau: float = 0.5
    r_best: float = -math.inf
    t_star: float = 0.5
    evals: int = 0

    def __post_init__(self):
        self.check()

    def check(self):
        if not 0.0 <= self.tau_L <= self.tau_U <= 1.0:
            raise DomainError(f"bisection interval broken: [{self.tau_L}, {self.tau_U}]")


@dataclass
class SolveResult:
    allocation: Allocation
    rates: RateBreakdown
    feasible: bool
    converged: bool
    iterations: int
    evals: int = 1
    halvings: int = 0
    phi1_fallbacks: int = 0
    scheme: str = "OPT"
    state: Optional[BisectionState] = None
    probes: List[InnerSolveResult] = field(default_factory=list)
    time_trace: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.rates.sum_rate if self.feasible else -math.inf

    @classmethod
    def from_inner(cls, res: InnerSolveResult, scheme: str) -> "SolveResult":
        return cls(
            allocation=res.allocation,
            rates=res.rates,
            feasible=res.feasible,
            converged=res.converged,
            iterations=res.iterations,
            phi1_fallbacks=res.phi1_fallbacks,
            scheme=scheme,
            probes=[res],
        )


def _worst_residual(ch: ChannelState, sp: SystemParams, res: InnerSolveResult) -> float:
    return float(constraint_residuals(ch, sp, res.allocation).min())


def prescan_grid(points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def optimize_T(ch: ChannelState, sp: SystemParams, cfg: SolverConfig, scheme: str = "OPT") -> SolveResult:
    """Bisection over the time split T with an inner dual solve per probe."""
    if not 0.0 < sp.delta_init < 0.5:
        raise DomainError(f"delta_init must lie in (0, 0.5) (got {sp.delta_init})")
    inner_cfg = cfg.inner_config(sp)
    probes: List[InnerSolveResult] = []
    time_trace: List[Dict[str, Any]] = []

    def probe(T: float) -> InnerSolveResult:
        res = inner_solve(ch, sp, min(max(T, T_MIN), T_MAX), inner_cfg)
        probes.append(res)
        state.evals += 1
        log.debug(f"probe {len(probes)} T={T:.6f} value={res.value:.6f} iters={res.iterations}")
        return res

    def record(tau: float, value: float):
        time_trace.append({
            "probe": len(probes),
            "tau": tau,
            "tau_L": state.tau_L,
            "tau_U": state.tau_U,
            "value": value,
            "r_best": state.r_best,
        })

    # -------- 1) initial point T = 0.5 - delta --------
    t0 = 0.5 - sp.delta_init
    state = BisectionState(tau=t0, t_star=t0)
    state.r_best = probe(t0).value
    record(t0, state.r_best)

    # -------- 2) optional coarse pre-scan --------
    if cfg.use_prescan:
        grid = prescan_grid(cfg.prescan_points)
        values = [probe(float(x)).value for x in grid]
        for x, v in zip(grid, values):
            state.tau = float(x)
            record(float(x), v)
        i = int(np.argmax(values))
        if values[i] > state.r_best:
            state.r_best, state.t_star = values[i], float(grid[i])
        j = i if i + 1 < len(grid) else i - 1
        state.tau_L, state.tau_U = float(grid[j]), float(grid[j + 1])
        state.check()

    # -------- 3) bisection --------
    halvings = 0
    while abs(state.tau_L - state.tau_U) > sp.eps:
        state.tau = 0.5 * (state.tau_L + state.tau_U)
        value = probe(state.tau).value
        if value > state.r_best:
            state.r_best = value
            state.tau_L = state.tau
            state.t_star = state.tau
        else:
            state.tau_U = state.tau
        state.check()
        halvings += 1
        record(state.tau, value)

    # -------- 4) pick the best probe --------
    feasible = [p for p in probes if p.feasible]
    if feasible:
        best = max(feasible, key=lambda p: p.value)
    else:
        best = max(probes, key=lambda p: _worst_residual(ch, sp, p))
    log.debug(
        f"{scheme}: T*={best.allocation.T:.6f} value={best.value:.6f} "
        f"evals={state.evals} halvings={halvings}"
    )
    return SolveResult(
        allocation=best.allocation,
        rates=best.rates,
        feasible=best.feasible,
        converged=best.converged,
        iterations=sum(p.iterations for p in probes),
        evals=state.evals,
        halvings=halvings,
        phi1_fallbacks=sum(p.phi1_fallbacks for p in probes),
        scheme=scheme,
        state=state,
        probes=probes,
        time_trace=time_trace,
    )
