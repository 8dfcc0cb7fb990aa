# src/utils.py
import logging
import math
from typing import Iterable, Tuple

import numpy as np

LN2 = math.log(2.0)

_HANDLER_TAG = "_bsnoma_handler"


def get_logger(tag: str) -> logging.Logger:
    """Logger printing `[TAG] message`, the register used by every module here."""
    logger = logging.getLogger(f"bsnoma.{tag}")
    root = logging.getLogger("bsnoma")
    if not any(getattr(h, _HANDLER_TAG, False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("[%(tag)s] %(message)s"))
        handler.addFilter(_TagFilter())
        setattr(handler, _HANDLER_TAG, True)
        root.addHandler(handler)
        root.setLevel(logging.INFO)
        root.propagate = False
    return logger


def set_verbose(verbose: bool) -> None:
    logging.getLogger("bsnoma").setLevel(logging.DEBUG if verbose else logging.INFO)


class _TagFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        record.tag = record.name.rsplit(".", 1)[-1]
        return True


def exp2_safe(x: float) -> float:
    """2**x saturating to inf instead of raising OverflowError."""
    with np.errstate(over="ignore"):
        return float(np.exp2(x))


def mean_and_stderr(values: Iterable[float]) -> Tuple[float, float]:
    xs = [float(v) for v in values]
    n = len(xs)
    if n == 0:
        return 0.0, 0.0
    mean = math.fsum(xs) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, math.sqrt(var / n)
