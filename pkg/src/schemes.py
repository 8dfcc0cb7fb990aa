# src/schemes.py
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .bisection import SolveResult, SolverConfig, optimize_T
from .channel import T_MAX, Allocation, ChannelState, SystemParams, compute_rates, evaluate_grid
from .dual import FEAS_TOL, inner_solve
from .errors import BudgetExceededError, DomainError
from .utils import get_logger

log = get_logger("ORACLE")

EQUAL_TIME = 0.5


class SchemeId(str, Enum):
    OPT = "OPT"
    NBS = "NBS"
    ET = "ET"
    NBS_ET = "NBS_ET"
    BFS = "BFS"

    @property
    def cli_name(self) -> str:
        return self.value.lower().replace("_", "-")

    @classmethod
    def parse(cls, name: str) -> "SchemeId":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; expected one of {[s.cli_name for s in cls]}") from None

    @classmethod
    def ordered(cls, schemes: Iterable["SchemeId"]) -> List["SchemeId"]:
        wanted = set(schemes)
        return [s for s in cls if s in wanted]


@dataclass(frozen=True)
class GridSpec:
    points_per_dim: int = 15
    include_boundaries: bool = True

    def __post_init__(self):
        if self.points_per_dim < 2:
            raise DomainError(f"points_per_dim must be >= 2 (got {self.points_per_dim})")

    @property
    def evaluations(self) -> int:
        return self.points_per_dim ** 5

    def unit_axis(self) -> np.ndarray:
        p = self.points_per_dim
        if self.include_boundaries:
            return np.linspace(0.0, 1.0, p)
        return np.linspace(0.0, 1.0, p + 2)[1:-1]


# -------- brute-force oracle --------

def _bfs_slice(ch: ChannelState, sp: SystemParams, T: float, axes: Tuple[np.ndarray, ...]):
    """Best feasible and least-violating grid point for one T value."""
    lam, phi1, phi2, pr = np.meshgrid(*axes, indexing="ij")
    obj, worst = evaluate_grid(ch, sp, T, lam, phi1, phi2, pr)
    masked = np.where(worst >= -FEAS_TOL, obj, -np.inf)
    i = int(np.argmax(masked))
    j = int(np.argmax(worst))
    best = (float(masked.flat[i]), (T, float(lam.flat[i]), float(phi1.flat[i]), float(phi2.flat[i]), float(pr.flat[i])))
    closest = (float(worst.flat[j]), (T, float(lam.flat[j]), float(phi1.flat[j]), float(phi2.flat[j]), float(pr.flat[j])))
    return best, closest


def brute_force(ch: ChannelState, sp: SystemParams, grid: GridSpec,
                budget: int = 10_000_000, workers: int = 1) -> SolveResult:
    required = grid.evaluations
    if required > budget:
        raise BudgetExceededError(required, budget)

    unit = grid.unit_axis()
    t_axis = np.minimum(unit, T_MAX)
    axes = (unit, unit, unit, unit * sp.Pr_max)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            slices = list(pool.map(lambda T: _bfs_slice(ch, sp, float(T), axes), t_axis))
    else:
        slices = [_bfs_slice(ch, sp, float(T), axes) for T in t_axis]

    best_val, best_pt = -math.inf, None
    close_val, close_pt = -math.inf, None
    for (val, pt), (w, wpt) in slices:
        if val > best_val:
            best_val, best_pt = val, pt
        if w > close_val:
            close_val, close_pt = w, wpt

    feasible = best_pt is not None
    a = Allocation(*(best_pt if feasible else close_pt))
    log.debug(f"BFS p={grid.points_per_dim} evals={required} feasible={feasible} value={best_val:.6f}")
    return SolveResult(
        allocation=a,
        rates=compute_rates(ch, sp, a),
        feasible=feasible,
        converged=True,
        iterations=required,
        evals=required,
        scheme=SchemeId.BFS.value,
    )


# -------- comparison schemes --------

def _tag_silent(res: SolveResult, ch: ChannelState, sp: SystemParams, scheme: SchemeId) -> SolveResult:
    """Carry a no-backscatter solution onto the full channel with the tag switched off."""
    a = replace(res.allocation, phi1=0.0, phi2=0.0)
    return replace(res, allocation=a, rates=compute_rates(ch, sp, a), scheme=scheme.value)


def _better(current: SolveResult, other: Optional[SolveResult]) -> SolveResult:
    """Keep current's diagnostics, take other's point when it is strictly better."""
    if other is None:
        return current
    if (other.feasible, other.value) > (current.feasible, current.value):
        return replace(current, allocation=other.allocation, rates=other.rates, feasible=other.feasible)
    return current


def _needed(schemes: Iterable[SchemeId], nested: bool) -> set:
    wanted = set(schemes)
    if nested:
        if SchemeId.OPT in wanted:
            wanted |= {SchemeId.ET, SchemeId.NBS}
        if wanted & {SchemeId.ET, SchemeId.NBS}:
            wanted.add(SchemeId.NBS_ET)
    return wanted


def solve_schemes(ch: ChannelState, sp: SystemParams, cfg: SolverConfig,
                  schemes: Iterable[SchemeId]) -> Dict[SchemeId, SolveResult]:
    schemes = list(schemes)
    todo = _needed(schemes, cfg.nested)
    notag = ch.without_tag()
    inner_cfg = cfg.inner_config(sp)
    raw: Dict[SchemeId, SolveResult] = {}

    if SchemeId.OPT in todo:
        raw[SchemeId.OPT] = optimize_T(ch, sp, cfg, scheme=SchemeId.OPT.value)
    if SchemeId.NBS in todo:
        raw[SchemeId.NBS] = _tag_silent(optimize_T(notag, sp, cfg), ch, sp, SchemeId.NBS)
    if SchemeId.ET in todo:
        raw[SchemeId.ET] = SolveResult.from_inner(inner_solve(ch, sp, EQUAL_TIME, inner_cfg), SchemeId.ET.value)
    if SchemeId.NBS_ET in todo:
        res = SolveResult.from_inner(inner_solve(notag, sp, EQUAL_TIME, inner_cfg), SchemeId.NBS_ET.value)
        raw[SchemeId.NBS_ET] = _tag_silent(res, ch, sp, SchemeId.NBS_ET)
    if SchemeId.BFS in todo:
        raw[SchemeId.BFS] = brute_force(
            ch, sp, GridSpec(cfg.bfs_points), budget=cfg.bfs_budget, workers=cfg.workers
        )

    if cfg.nested:
        # T = 0.5 and the silent tag are special cases of the wider schemes
        if SchemeId.ET in raw:
            raw[SchemeId.ET] = _better(raw[SchemeId.ET], raw[SchemeId.NBS_ET])
        if SchemeId.NBS in raw:
            raw[SchemeId.NBS] = _better(raw[SchemeId.NBS], raw[SchemeId.NBS_ET])
        if SchemeId.OPT in raw:
            opt = _better(raw[SchemeId.OPT], raw[SchemeId.ET])
            opt = _better(opt, raw[SchemeId.NBS])
            # every grid point is also an OPT allocation
            raw[SchemeId.OPT] = _better(opt, raw.get(SchemeId.BFS))

    return {s: raw[s] for s in SchemeId.ordered(schemes)}


def run_scheme(scheme: SchemeId, ch: ChannelState, sp: SystemParams, cfg: SolverConfig) -> SolveResult:
    return solve_schemes(ch, sp, cfg, [scheme])[scheme]
