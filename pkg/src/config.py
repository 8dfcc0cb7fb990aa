# src/config.py
import io
import os
from typing import Any, Dict, List, Literal, NamedTuple, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .bisection import SolverConfig
from .channel import SystemParams, dbm_to_linear
from .errors import ConfigError, DomainError
from .montecarlo import Geometry, SweepConfig
from .schemes import SchemeId
from .utils import get_logger

log = get_logger("CONFIG")

# =====================
# SWEEP DEFAULTS
# =====================

DEFAULT_SWEEP_VALUES = {
    "P_dbm": [20.0, 25.0, 30.0, 35.0, 40.0],
    "Rmin": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "beta": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
}


def _split_list(v: Any) -> Any:
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


# =====================
# SECTIONS
# =====================

class SystemSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    P_dbm: float = 40.0
    Pr_max_dbm: float = 20.0          # 30 is the other documented setting
    beta: float = Field(0.1, ge=0.0, le=1.0)
    Rmin: float = Field(0.1, ge=0.0)
    sigma2: float = Field(0.001, gt=0.0)
    eps: float = Field(0.001, gt=0.0)
    delta_step: float = Field(0.01, gt=0.0)
    delta_init: float = Field(0.01, gt=0.0, lt=0.5)
    max_dual_iters: int = Field(20000, ge=1)
    circuit_power_dbm: float = 5.0    # accepted, enters no rate expression


class GeometrySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d_bs_u1: float = Field(5.0, gt=0.0)
    d_bs_u2: float = Field(20.0, gt=0.0)
    d_bs_tag: float = Field(8.0, gt=0.0)
    d_u1_u2: float = Field(15.0, gt=0.0)
    d_u1_tag: float = Field(4.0, gt=0.0)
    d_tag_u1: float = Field(4.0, gt=0.0)
    d_tag_u2: float = Field(12.0, gt=0.0)
    pathloss_exp: float = Field(3.0, gt=0.0)


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variable: Literal["P_dbm", "Rmin", "beta"] = "P_dbm"
    values: Optional[List[float]] = None
    realizations: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    schemes: List[SchemeId] = [SchemeId.OPT, SchemeId.NBS, SchemeId.ET, SchemeId.NBS_ET]

    @field_validator("values", mode="before")
    @classmethod
    def _values_list(cls, v):
        return _split_list(v)

    @field_validator("schemes", mode="before")
    @classmethod
    def _schemes_list(cls, v):
        items = _split_list(v)
        if isinstance(items, list):
            return [SchemeId.parse(s) if isinstance(s, str) else s for s in items]
        return items


class SolverSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    conv_tol: float = Field(1e-4, gt=0.0)
    conv_window: int = Field(10, ge=1)
    trace: bool = False
    decay: bool = False
    faithful: bool = False
    prescan: bool = False
    prescan_points: int = Field(9, ge=2)
    nested_fallback: bool = True
    recover: bool = True
    bfs_points: int = Field(15, ge=2)
    bfs_budget: int = Field(10_000_000, ge=1)
    workers: int = Field(1, ge=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: SystemSection = SystemSection()
    geometry: GeometrySection = GeometrySection()
    sweep: SweepSection = SweepSection()
    solver: SolverSection = SolverSection()


class ParsedConfig(NamedTuple):
    params: SystemParams
    geometry: Geometry
    sweep: SweepConfig
    solver: SolverConfig
    sigma2: float
    snapshot: Dict[str, Any]


# =====================
# PARSING
# =====================

def _sections(text: str) -> Dict[str, Dict[str, Any]]:
    raw = dotenv_values(stream=io.StringIO(text), interpolate=False)
    out: Dict[str, Dict[str, Any]] = {}
    for key, value in raw.items():
        section, dot, name = key.partition(".")
        if not dot or not section or not name or "." in name:
            raise ConfigError(f"{key}: keys must look like section.name")
        if value is None:
            raise ConfigError(f"{key}: missing value")
        out.setdefault(section, {})[name] = value
    return out


def _describe(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        lines.append(f"{loc}: {err['msg']} (got {err.get('input')!r})")
    return "invalid configuration:\n  " + "\n  ".join(lines)


def parse_config(path: Union[str, os.PathLike, None] = None, text: Optional[str] = None) -> ParsedConfig:
    """Read `section.key=value` text (or a file holding it) into validated run objects.

    Missing keys take the defaults of the parameter table; unknown keys are errors.
    """
    if text is None:
        if path is None:
            text = ""
        else:
            try:
                with open(path, "r", encoding="utf-8") as f:
                    text = f.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc

    try:
        run = RunConfig.model_validate(_sections(text))
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from None

    s, g, sw, so = run.system, run.geometry, run.sweep, run.solver
    try:
        params = SystemParams(
            P=dbm_to_linear(s.P_dbm),
            Pr_max=dbm_to_linear(s.Pr_max_dbm),
            beta=s.beta,
            Rmin=s.Rmin,
            eps=s.eps,
            delta_step=s.delta_step,
            delta_init=s.delta_init,
            max_dual_iters=s.max_dual_iters,
        )
        geometry = Geometry(**g.model_dump())
        sweep = SweepConfig(
            sweep_variable=sw.variable,
            values=tuple(sw.values if sw.values is not None else DEFAULT_SWEEP_VALUES[sw.variable]),
            realizations=sw.realizations,
            seed=sw.seed,
            schemes=tuple(SchemeId.ordered(sw.schemes)),
        )
        solver = SolverConfig(**so.model_dump())
    except DomainError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None

    snapshot = run.model_dump(mode="json")
    snapshot["sweep"]["values"] = list(sweep.values)
    log.debug(f"P={params.P:g} Pr_max={params.Pr_max:g} beta={params.beta} Rmin={params.Rmin}")
    return ParsedConfig(params, geometry, sweep, solver, s.sigma2, snapshot)
