# src/montecarlo.py
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .bisection import SolverConfig
from .channel import ChannelState, SystemParams, dbm_to_linear
from .errors import DomainError
from .schemes import SchemeId, solve_schemes
from .utils import get_logger, mean_and_stderr

log = get_logger("SWEEP")

SWEEP_VARIABLES = ("P_dbm", "Rmin", "beta")
SWEEP_COLUMNS = ["sweep_var", "value", "scheme", "mean_sum_rate", "stderr", "feasible_frac", "mean_iters"]
MAX_ORDER_ATTEMPTS = 10_000

# gain name -> Geometry distance field
LINKS = {
    "g1": "d_bs_u1",
    "g2": "d_bs_u2",
    "g3": "d_bs_tag",
    "h1": "d_u1_u2",
    "h2": "d_u1_tag",
    "f1": "d_tag_u1",
    "f2": "d_tag_u2",
}


@dataclass(frozen=True)
class Geometry:
    """Node distances in meters. Defaults are a plausible layout, not measured values."""

    d_bs_u1: float = 5.0
    d_bs_u2: float = 20.0
    d_bs_tag: float = 8.0
    d_u1_u2: float = 15.0
    d_u1_tag: float = 4.0
    d_tag_u1: float = 4.0
    d_tag_u2: float = 12.0
    pathloss_exp: float = 3.0

    def __post_init__(self):
        for name in (*LINKS.values(), "pathloss_exp"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be > 0 (got {getattr(self, name)})")
        if not self.d_bs_u1 < self.d_bs_u2:
            raise DomainError("U1 must be the near user: d_bs_u1 < d_bs_u2")
        if not self.d_tag_u1 < self.d_tag_u2:
            raise DomainError("U1 must be closer to the tag: d_tag_u1 < d_tag_u2")


@dataclass(frozen=True)
class SweepConfig:
    sweep_variable: str = "P_dbm"
    values: Tuple[float, ...] = (20.0, 25.0, 30.0, 35.0, 40.0)
    realizations: int = 1000
    seed: int = 0
    schemes: Tuple[SchemeId, ...] = (SchemeId.OPT, SchemeId.NBS, SchemeId.ET, SchemeId.NBS_ET)

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise DomainError(f"sweep_variable must be one of {SWEEP_VARIABLES} (got {self.sweep_variable!r})")
        if not self.values:
            raise DomainError("sweep values must be non-empty")
        steps = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise DomainError(f"sweep values must be strictly monotone (got {list(self.values)})")
        if self.realizations < 1:
            raise DomainError(f"realizations must be >= 1 (got {self.realizations})")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        if not self.schemes:
            raise DomainError("at least one scheme is required")


@dataclass
class SweepResult:
    sweep_variable: str
    table: pd.DataFrame

    @property
    def all_infeasible(self) -> bool:
        return bool((self.table["feasible_frac"] == 0.0).all())

    def mean_sum_rate(self, scheme: SchemeId) -> List[float]:
        rows = self.table[self.table["scheme"] == SchemeId(scheme).value]
        return rows["mean_sum_rate"].tolist()

    def iteration_stats(self) -> Dict[str, float]:
        return self.table.groupby("scheme", sort=False)["mean_iters"].mean().to_dict()


def pathloss(d: float, exponent: float) -> float:
    return float(d ** (-exponent))


def _rng(seed: int, index: int) -> np.random.Generator:
    # Counter-based stream per (seed, index), so worker layout never changes a draw.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def draw_channels(geo: Geometry, seed: int, index: int, sigma2: float = 0.001) -> ChannelState:
    """One Rayleigh-faded realization with g1 > g2 enforced by redrawing the BS links."""
    rng = _rng(seed, index)
    loss = {g: pathloss(getattr(geo, d), geo.pathloss_exp) for g, d in LINKS.items()}
    fading = dict(zip(LINKS, rng.exponential(1.0, size=len(LINKS))))
    gains = {g: loss[g] * fading[g] for g in LINKS}

    attempts = 0
    while not gains["g1"] > gains["g2"]:
        attempts += 1
        if attempts > MAX_ORDER_ATTEMPTS:
            raise DomainError(f"could not draw g1 > g2 for seed={seed} index={index}")
        e1, e2 = rng.exponential(1.0, size=2)
        gains["g1"], gains["g2"] = loss["g1"] * e1, loss["g2"] * e2
    return ChannelState(sigma2=sigma2, **gains)


def params_for(base: SystemParams, variable: str, value: float) -> SystemParams:
    if variable == "P_dbm":
        return replace(base, P=dbm_to_linear(value))
    if variable == "Rmin":
        return replace(base, Rmin=float(value))
    if variable == "beta":
        return replace(base, beta=float(value))
    raise DomainError(f"unknown sweep variable {variable!r}")


def _solve_realization(args) -> List[Tuple[int, str, bool, float, int]]:
    cfg, geo, base, solver_cfg, sigma2, index = args
    ch = draw_channels(geo, cfg.seed, index, sigma2)
    rows = []
    for k, value in enumerate(cfg.values):
        sp = params_for(base, cfg.sweep_variable, value)
        for scheme, res in solve_schemes(ch, sp, solver_cfg, cfg.schemes).items():
            rows.append((k, scheme.value, res.feasible, res.rates.sum_rate, res.iterations))
    return rows


def run_sweep(cfg: SweepConfig, geo: Geometry, base_params: SystemParams, solver_cfg: SolverConfig,
              sigma2: float = 0.001, workers: int = 1) -> SweepResult:
    jobs = [(cfg, geo, base_params, solver_cfg, sigma2, i) for i in range(cfg.realizations)]
    log.info(
        f"{cfg.sweep_variable} sweep: {len(cfg.values)} values x {cfg.realizations} draws "
        f"x {len(cfg.schemes)} schemes (workers={workers})"
    )

    per_draw: List[List[Tuple[int, str, bool, float, int]]] = []
    report_every = max(1, cfg.realizations // 10)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, rows in enumerate(pool.map(_solve_realization, jobs, chunksize=max(1, len(jobs) // (4 * workers)))):
                per_draw.append(rows)
                if (i + 1) % report_every == 0:
                    log.info(f"{i + 1}/{cfg.realizations} draws done")
    else:
        for i, job in enumerate(jobs):
            per_draw.append(_solve_realization(job))
            if (i + 1) % report_every == 0:
                log.info(f"{i + 1}/{cfg.realizations} draws done")

    return SweepResult(cfg.sweep_variable, aggregate(cfg, per_draw))


def aggregate(cfg: SweepConfig, per_draw: Sequence[Sequence[Tuple[int, str, bool, float, int]]]) -> pd.DataFrame:
    """Rows ordered value-major, then by scheme order; infeasible draws leave the mean."""
    buckets: Dict[Tuple[int, str], List[Tuple[bool, float, int]]] = {}
    for rows in per_draw:
        for k, scheme, feasible, rate, iters in rows:
            buckets.setdefault((k, scheme), []).append((feasible, rate, iters))

    n = len(per_draw)
    out = []
    for k, value in enumerate(cfg.values):
        for scheme in SchemeId.ordered(cfg.schemes):
            cell = buckets.get((k, scheme.value), [])
            rates = [r for f, r, _ in cell if f]
            mean, stderr = mean_and_stderr(rates)
            iters_mean, _ = mean_and_stderr([it for _, _, it in cell])
            out.append({
                "sweep_var": cfg.sweep_variable,
                "value": float(value),
                "scheme": scheme.value,
                "mean_sum_rate": mean,
                "stderr": stderr,
                "feasible_frac": len(rates) / n if n else 0.0,
                "mean_iters": iters_mean,
            })
    return pd.DataFrame(out, columns=SWEEP_COLUMNS)
