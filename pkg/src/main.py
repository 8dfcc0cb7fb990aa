# src/main.py
import argparse
import math
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional

import pandas as pd

from src.artifacts import RunManifest, emit_sweep_csv, emit_time_trace, emit_trace, manifest_path
from src.bisection import SolveResult
from src.config import DEFAULT_SWEEP_VALUES, ParsedConfig, parse_config
from src.errors import BsnomaError, ConfigError, SinkError
from src.montecarlo import draw_channels, run_sweep
from src.schemes import SchemeId, solve_schemes
from src.utils import get_logger, set_verbose

log = get_logger("MAIN")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INFEASIBLE = 4

SWEEP_FLAGS = {"p": "P_dbm", "rmin": "Rmin", "beta": "beta"}
SOLVE_SCHEMES = [SchemeId.OPT, SchemeId.NBS, SchemeId.ET, SchemeId.NBS_ET]


def result_row(scheme: SchemeId, res: SolveResult) -> Dict[str, object]:
    a, r = res.allocation, res.rates
    return {
        "scheme": scheme.value,
        "feasible": res.feasible,
        "T": a.T,
        "lambda_split": a.lambda_split,
        "phi1": a.phi1,
        "phi2": a.phi2,
        "Pr": a.Pr,
        "R1": r.R1,
        "R2": r.R2,
        "R3": r.R3,
        "R1bar": r.R1bar,
        "sum_rate": r.sum_rate,
        "iterations": res.iterations,
        "evals": res.evals,
        "halvings": res.halvings,
    }


def _apply_overrides(cfg: ParsedConfig, args: argparse.Namespace) -> ParsedConfig:
    solver = cfg.solver
    if args.grid is not None:
        if args.grid < 2:
            raise ConfigError(f"--grid must be >= 2 (got {args.grid})")
        solver = replace(solver, bfs_points=args.grid)
    if args.workers is not None:
        solver = replace(solver, workers=args.workers)
    if args.trace or args.command == "trace":
        solver = replace(solver, trace=True)

    sweep = cfg.sweep
    if args.seed is not None:
        sweep = replace(sweep, seed=args.seed)
    if args.sweep is not None and SWEEP_FLAGS[args.sweep] != sweep.sweep_variable:
        var = SWEEP_FLAGS[args.sweep]
        sweep = replace(sweep, sweep_variable=var, values=tuple(DEFAULT_SWEEP_VALUES[var]))
    if args.scheme is not None:
        sweep = replace(sweep, schemes=(SchemeId.parse(args.scheme),))
    return cfg._replace(solver=solver, sweep=sweep)


def _schemes(args: argparse.Namespace, default: List[SchemeId]) -> List[SchemeId]:
    return [SchemeId.parse(args.scheme)] if args.scheme else default


# -------- verbs --------

def cmd_solve(cfg: ParsedConfig, args: argparse.Namespace) -> int:
    ch = draw_channels(cfg.geometry, cfg.sweep.seed, args.index, cfg.sigma2)
    log.info(f"channel seed={cfg.sweep.seed} index={args.index}: {ch}")
    results = solve_schemes(ch, cfg.params, cfg.solver, _schemes(args, SOLVE_SCHEMES))

    table = pd.DataFrame([result_row(s, r) for s, r in results.items()])
    print(table.to_string(index=False))
    if args.out:
        table.to_csv(args.out, index=False, float_format="%.10g", lineterminator="\n")
        log.info(f"wrote {args.out}")
    if args.trace:
        stem = args.out or "solve"
        for s, r in results.items():
            if s is SchemeId.BFS:
                continue
            emit_trace(r, f"{stem}.{s.cli_name}.dual.csv")
            if r.time_trace:
                emit_time_trace(r, f"{stem}.{s.cli_name}.time.csv")
    return EXIT_OK if any(r.feasible for r in results.values()) else EXIT_INFEASIBLE


def cmd_sweep(cfg: ParsedConfig, args: argparse.Namespace) -> int:
    sweep = cfg.sweep
    result = run_sweep(sweep, cfg.geometry, cfg.params, cfg.solver, sigma2=cfg.sigma2, workers=cfg.solver.workers)
    out = args.out or f"sweep_{sweep.sweep_variable}.csv"
    emit_sweep_csv(result, out)

    manifest = RunManifest(
        config=cfg.snapshot,
        seed=sweep.seed,
        iteration_stats=result.iteration_stats(),
        command=" ".join(args.argv),
        outputs=[os.fspath(out)],
    )
    manifest.write(manifest_path(out))
    print(result.table.to_string(index=False))
    log.info(f"wrote {out} and {manifest_path(out)}")
    return EXIT_INFEASIBLE if result.all_infeasible else EXIT_OK


def cmd_oracle(cfg: ParsedConfig, args: argparse.Namespace) -> int:
    """OPT against the brute-force grid, plus the gain of optimizing T over T = 0.5."""
    rows = []
    for i in range(args.draws):
        ch = draw_channels(cfg.geometry, cfg.sweep.seed, i, cfg.sigma2)
        res = solve_schemes(ch, cfg.params, cfg.solver, [SchemeId.OPT, SchemeId.ET, SchemeId.BFS])
        opt, et, bfs = res[SchemeId.OPT], res[SchemeId.ET], res[SchemeId.BFS]
        gap = abs(opt.value - bfs.value) / bfs.value if bfs.feasible and bfs.value > 0 else math.nan
        gain = (opt.value - et.value) / et.value if et.feasible and et.value > 0 else math.nan
        rows.append({
            "index": i,
            "opt": opt.rates.sum_rate if opt.feasible else math.nan,
            "et": et.rates.sum_rate if et.feasible else math.nan,
            "bfs": bfs.rates.sum_rate if bfs.feasible else math.nan,
            "gap": gap,
            "gain": gain,
            "opt_ge_bfs": bool(opt.value >= bfs.value - 1e-6),
        })
        log.info(f"draw {i}: OPT={opt.value:.6f} BFS={bfs.value:.6f} ET={et.value:.6f}")

    table = pd.DataFrame(rows)
    print(table.to_string(index=False))
    print(f"[ORACLE] mean gap={table['gap'].mean():.4%} mean OPT/ET gain={table['gain'].mean():.2%} "
          f"OPT>=BFS on {int(table['opt_ge_bfs'].sum())}/{len(table)} draws")
    if args.out:
        table.to_csv(args.out, index=False, float_format="%.10g", lineterminator="\n")
    return EXIT_INFEASIBLE if table["opt"].isna().all() else EXIT_OK


def cmd_trace(cfg: ParsedConfig, args: argparse.Namespace) -> int:
    scheme = SchemeId.parse(args.scheme) if args.scheme else SchemeId.OPT
    if scheme is SchemeId.BFS:
        raise ConfigError("the brute-force oracle has no convergence trace")
    ch = draw_channels(cfg.geometry, cfg.sweep.seed, args.index, cfg.sigma2)
    res = solve_schemes(ch, cfg.params, cfg.solver, [scheme])[scheme]

    out = args.out or f"trace_{scheme.cli_name}.csv"
    emit_trace(res, out)
    written = [out]
    if res.time_trace:
        stem, ext = os.path.splitext(out)
        time_out = f"{stem}_time{ext or '.csv'}"
        emit_time_trace(res, time_out)
        written.append(time_out)
    log.info(f"{scheme.value}: value={res.value:.6f} iterations={res.iterations}; wrote {', '.join(written)}")
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0 (got {value})")
    return value


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "oracle": cmd_oracle, "trace": cmd_trace}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src.main",
        description="Sum-rate solver for backscatter-aided cooperative NOMA",
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="what to run")
    parser.add_argument("--config", default=None, help="section.key=value file (default: built-in defaults)")
    parser.add_argument("--seed", type=int, default=None, help="override sweep.seed")
    parser.add_argument("--scheme", choices=[s.cli_name for s in SchemeId], default=None)
    parser.add_argument("--sweep", choices=sorted(SWEEP_FLAGS), default=None, help="sweep variable")
    parser.add_argument("--out", default=None, help="output path (.csv, or .parquet for sweeps)")
    parser.add_argument("--grid", type=int, default=None, help="brute-force points per dimension")
    parser.add_argument("--trace", action="store_true", help="record and write dual traces")
    parser.add_argument("--index", type=_non_negative, default=0, help="channel realization index for solve/trace")
    parser.add_argument("--draws", type=_non_negative, default=20, help="channel draws for oracle")
    parser.add_argument("--workers", type=int, default=None, help="parallel workers")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    args.argv = list(argv) if argv is not None else sys.argv[1:]
    set_verbose(args.verbose)

    try:
        cfg = _apply_overrides(parse_config(args.config), args)
    except (ConfigError, ValueError) as exc:
        log.error(str(exc))
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        log.error(str(exc))
        return EXIT_CONFIG
    except (BsnomaError, SinkError, OSError) as exc:
        log.error(f"{args.command} failed: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
