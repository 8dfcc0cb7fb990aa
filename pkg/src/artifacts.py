# src/artifacts.py
import io
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, TextIO, Union

import pandas as pd
from dateutil.parser import isoparse

from . import __version__
from .bisection import SolveResult
from .dual import InnerSolveResult
from .errors import SinkError, TraceMissingError
from .lagrangian import MULTIPLIERS
from .montecarlo import SWEEP_COLUMNS, SweepResult
from .utils import get_logger

log = get_logger("ARTIFACTS")

Sink = Union[str, os.PathLike, TextIO]

FLOAT_FORMAT = "%.10g"
DUAL_COLUMNS = ["t", *MULTIPLIERS]
TIME_COLUMNS = ["probe", "tau", "tau_L", "tau_U", "value", "r_best"]


def _write_table(df: pd.DataFrame, sink: Sink) -> None:
    where = sink if isinstance(sink, (str, os.PathLike)) else "<stream>"
    try:
        if isinstance(sink, (str, os.PathLike)) and str(sink).endswith(".parquet"):
            df.to_parquet(sink, index=False)
        else:
            df.to_csv(sink, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise SinkError(f"cannot write {len(df)} rows to {where}: {exc}") from exc
    log.debug(f"wrote {len(df)} rows to {where}")


def _read_table(source: Sink) -> pd.DataFrame:
    if isinstance(source, (str, os.PathLike)) and str(source).endswith(".parquet"):
        return pd.read_parquet(source)
    return pd.read_csv(source)


# -------- sweep tables --------

def emit_sweep_csv(result: SweepResult, sink: Sink) -> None:
    if result.table.empty:
        raise ValueError("refusing to write an empty sweep result")
    _write_table(result.table[SWEEP_COLUMNS], sink)


def read_sweep_csv(source: Sink) -> SweepResult:
    df = _read_table(source)
    missing = [c for c in SWEEP_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"not a sweep table, missing columns {missing}")
    return SweepResult(sweep_variable=str(df["sweep_var"].iloc[0]), table=df[SWEEP_COLUMNS])


def sweep_csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    emit_sweep_csv(result, buf)
    return buf.getvalue()


# -------- convergence traces --------

def dual_trace_frame(result: Union[InnerSolveResult, SolveResult]) -> pd.DataFrame:
    """Dual multipliers per iteration; a bisection result concatenates its probes."""
    if isinstance(result, InnerSolveResult):
        if result.trace is None:
            raise TraceMissingError("inner solve ran without trace=True")
        return pd.DataFrame([d.as_row() for d in result.trace], columns=DUAL_COLUMNS)

    if not result.probes or any(p.trace is None for p in result.probes):
        raise TraceMissingError(f"{result.scheme} result carries no dual trace")
    frames = []
    offset = 0
    for k, p in enumerate(result.probes, start=1):
        df = pd.DataFrame([d.as_row() for d in p.trace], columns=DUAL_COLUMNS)
        df.insert(0, "tau", p.allocation.T)
        df.insert(0, "probe", k)
        df["t_probe"] = df["t"]
        df["t"] = df["t"] + offset
        offset += len(df)
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def emit_trace(result: Union[InnerSolveResult, SolveResult], sink: Sink) -> None:
    _write_table(dual_trace_frame(result), sink)


def emit_time_trace(result: SolveResult, sink: Sink) -> None:
    if not result.time_trace:
        raise TraceMissingError(f"{result.scheme} result has no bisection trace")
    _write_table(pd.DataFrame(result.time_trace, columns=TIME_COLUMNS), sink)


# -------- manifest --------

@dataclass
class RunManifest:
    config: Dict[str, Any]
    seed: int
    version: str = __version__
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    iteration_stats: Dict[str, float] = field(default_factory=dict)
    command: str = ""
    outputs: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        data = asdict(self)
        data["timestamp"] = self.timestamp.isoformat()
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        data["timestamp"] = isoparse(data["timestamp"])
        return cls(**data)

    def write(self, path: Union[str, os.PathLike]) -> None:
        try:
            with open(path, "w", encoding="utf-8") as f:
                f.write(self.to_json())
        except OSError as exc:
            raise SinkError(f"cannot write manifest {path}: {exc}") from exc

    @classmethod
    def read(cls, path: Union[str, os.PathLike]) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())


def manifest_path(out: Union[str, os.PathLike]) -> str:
    return f"{os.fspath(out)}.manifest.json"
