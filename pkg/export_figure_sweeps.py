#!/usr/bin/env python3
"""
Run the three Monte Carlo sweeps (BS power, minimum rate, imperfect-SIC factor)
from one configuration and write one CSV per sweep, each with its run manifest.

Usage:
    python export_figure_sweeps.py [--config artifacts/params.env] [--out-dir results] [--draws N] [--workers N]
"""

import argparse
import os
from dataclasses import replace
from typing import Dict, List, Optional

from src.artifacts import RunManifest, emit_sweep_csv, manifest_path
from src.config import DEFAULT_SWEEP_VALUES, ParsedConfig, parse_config
from src.montecarlo import SweepResult, run_sweep

SWEEPS = ("P_dbm", "Rmin", "beta")


def run_figure_sweeps(cfg: ParsedConfig, out_dir: str, draws: Optional[int] = None, workers: int = 1) -> Dict[str, str]:
    """
    Run every sweep variable with its default value grid.

    Args:
        cfg: Parsed configuration; its sweep section supplies seed and schemes
        out_dir: Directory receiving sweep_<variable>.csv files
        draws: Override for the number of channel realizations
        workers: Process workers per sweep

    Returns:
        Mapping sweep variable -> written CSV path
    """
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for var in SWEEPS:
        sweep = replace(cfg.sweep, sweep_variable=var, values=tuple(DEFAULT_SWEEP_VALUES[var]))
        if draws is not None:
            sweep = replace(sweep, realizations=draws)
        print(f"[EXPORT] {var}: {len(sweep.values)} values x {sweep.realizations} draws...")
        result: SweepResult = run_sweep(sweep, cfg.geometry, cfg.params, cfg.solver, sigma2=cfg.sigma2, workers=workers)

        out = os.path.join(out_dir, f"sweep_{var}.csv")
        emit_sweep_csv(result, out)
        snapshot = dict(cfg.snapshot)
        snapshot["sweep"] = dict(snapshot["sweep"], variable=var, values=list(sweep.values), realizations=sweep.realizations)
        RunManifest(
            config=snapshot,
            seed=sweep.seed,
            iteration_stats=result.iteration_stats(),
            command=f"export_figure_sweeps {var}",
            outputs=[out],
        ).write(manifest_path(out))
        written[var] = out
        print(f"[EXPORT] ✓ {out}")
    return written


def main(argv: Optional[List[str]] = None):
    parser = argparse.ArgumentParser(description="Write the P / Rmin / beta sweep CSVs")
    parser.add_argument(
        "--config",
        default=os.path.join("artifacts", "params.env"),
        help="Configuration file (default: artifacts/params.env)"
    )
    parser.add_argument("--out-dir", default="results", help="Output directory (default: results)")
    parser.add_argument("--draws", type=int, default=None, help="Channel realizations per sweep")
    parser.add_argument("--workers", type=int, default=1, help="Process workers (default: 1)")
    args = parser.parse_args(argv)

    print(f"[EXPORT] Loading config from {args.config}...")
    cfg = parse_config(args.config)
    written = run_figure_sweeps(cfg, args.out_dir, draws=args.draws, workers=args.workers)
    print(f"[EXPORT] Wrote {len(written)} sweeps: {', '.join(written.values())}")


if __name__ == "__main__":
    main()
