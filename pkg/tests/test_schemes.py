"""
Comparison schemes and the brute-force oracle.

 Group 1: scheme identifiers
 Group 2: brute-force grid search
 Group 3: scheme semantics and nesting
 Group 4: oracle agreement (slow)
"""
import itertools
import math
from dataclasses import replace

import pytest

from src.bisection import SolverConfig
from src.channel import T_MAX, ChannelState, SystemParams, evaluate_grid, is_feasible
from src.errors import BudgetExceededError, DomainError
from src.montecarlo import Geometry, draw_channels
from src.schemes import EQUAL_TIME, GridSpec, SchemeId, brute_force, run_scheme, solve_schemes


def _quick():
    return SystemParams(P=1e4, Pr_max=100.0, eps=0.05, max_dual_iters=10)


# -------- Group 1 --------

def test_scheme_names_roundtrip():
    for s in SchemeId:
        assert SchemeId.parse(s.cli_name) is s
    assert SchemeId.parse(" nbs-et ") is SchemeId.NBS_ET
    with pytest.raises(ValueError, match="unknown scheme"):
        SchemeId.parse("greedy")


def test_schemes_ordered_by_definition():
    assert SchemeId.ordered([SchemeId.BFS, SchemeId.ET, SchemeId.OPT]) == [SchemeId.OPT, SchemeId.ET, SchemeId.BFS]


# -------- Group 2 --------

def test_grid_spec():
    assert GridSpec(3).evaluations == 243
    assert GridSpec(3).unit_axis().tolist() == [0.0, 0.5, 1.0]
    assert GridSpec(3, include_boundaries=False).unit_axis().tolist() == pytest.approx([0.25, 0.5, 0.75])
    with pytest.raises(DomainError):
        GridSpec(1)


def test_budget_is_checked_before_work(typical_channel):
    with pytest.raises(BudgetExceededError) as info:
        brute_force(typical_channel, _quick(), GridSpec(15), budget=1000)
    assert info.value.required == 15 ** 5
    assert info.value.budget == 1000


def test_brute_force_returns_best_feasible_grid_point(typical_channel):
    sp = _quick()
    res = brute_force(typical_channel, sp, GridSpec(5))
    assert res.feasible
    assert res.evals == res.iterations == 5 ** 5
    assert is_feasible(typical_channel, sp, res.allocation, tol=1e-9)
    # a known feasible grid point
    obj, worst = evaluate_grid(typical_channel, sp, 0.5, 0.25, 0.0, 0.0, 0.0)
    assert worst >= 0.0
    assert res.value >= float(obj)


def test_brute_force_threads_agree(typical_channel):
    sp = _quick()
    one = brute_force(typical_channel, sp, GridSpec(4))
    many = brute_force(typical_channel, sp, GridSpec(4), workers=3)
    assert one.allocation == many.allocation


def test_symmetric_instance_is_constant_in_phi():
    # without a tag path the objective ignores phi1 and phi2; the first grid maximum wins
    ch = ChannelState(g1=0.008, g2=0.0008, g3=0.0, h1=0.0003, h2=0.0, f1=0.01, f2=0.001)
    res = brute_force(ch, _quick(), GridSpec(3))
    assert res.allocation.phi1 == 0.0
    assert res.allocation.phi2 == 0.0


# -------- Group 3 --------

def test_equal_time_schemes_fix_t(typical_channel):
    out = solve_schemes(typical_channel, _quick(), SolverConfig(), [SchemeId.ET, SchemeId.NBS_ET])
    assert out[SchemeId.ET].allocation.T == EQUAL_TIME
    assert out[SchemeId.NBS_ET].allocation.T == EQUAL_TIME


def test_no_backscatter_schemes_silence_the_tag(typical_channel):
    out = solve_schemes(typical_channel, _quick(), SolverConfig(), [SchemeId.NBS, SchemeId.NBS_ET])
    for s in (SchemeId.NBS, SchemeId.NBS_ET):
        assert out[s].allocation.phi1 == 0.0
        assert out[s].allocation.phi2 == 0.0


def test_nested_schemes_are_ordered(typical_channel):
    out = solve_schemes(typical_channel, _quick(), SolverConfig(), [SchemeId.OPT, SchemeId.NBS, SchemeId.ET, SchemeId.NBS_ET])
    assert list(out) == [SchemeId.OPT, SchemeId.NBS, SchemeId.ET, SchemeId.NBS_ET]
    assert out[SchemeId.OPT].value >= out[SchemeId.ET].value
    assert out[SchemeId.OPT].value >= out[SchemeId.NBS].value
    assert out[SchemeId.ET].value >= out[SchemeId.NBS_ET].value
    assert out[SchemeId.NBS].value >= out[SchemeId.NBS_ET].value
    assert all(r.scheme == s.value for s, r in out.items())


def test_faithful_mode_runs_schemes_independently(typical_channel):
    out = solve_schemes(typical_channel, _quick(), SolverConfig(faithful=True), [SchemeId.ET])
    assert list(out) == [SchemeId.ET]
    assert out[SchemeId.ET].evals == 1


def test_run_scheme_single(typical_channel):
    res = run_scheme(SchemeId.BFS, typical_channel, _quick(), SolverConfig(bfs_points=3))
    assert res.scheme == "BFS"
    assert res.evals == 243


# -------- Group 4 --------

@pytest.mark.slow
def test_opt_matches_the_fine_grid_oracle():
    sp = SystemParams(P=1e4, Pr_max=100.0, max_dual_iters=300)
    cfg = SolverConfig(prescan=True, bfs_points=21, bfs_budget=21 ** 5)
    geo = Geometry()
    gaps = []
    for index in range(20):
        out = solve_schemes(draw_channels(geo, seed=0, index=index), sp, cfg, [SchemeId.OPT, SchemeId.BFS])
        opt, bfs = out[SchemeId.OPT], out[SchemeId.BFS]
        if not bfs.feasible:
            continue
        assert opt.feasible
        assert opt.value >= bfs.value - 1e-6
        gaps.append(abs(opt.value - bfs.value) / bfs.value)
    assert gaps
    assert sum(gaps) / len(gaps) <= 0.03


def test_opt_takes_a_better_grid_point(typical_channel):
    sp = SystemParams(P=1e4, Pr_max=100.0, eps=0.5, max_dual_iters=1)
    cfg = SolverConfig(bfs_points=5)
    out = solve_schemes(typical_channel, sp, cfg, [SchemeId.OPT, SchemeId.BFS])
    assert out[SchemeId.OPT].value >= out[SchemeId.BFS].value - 1e-12
    assert out[SchemeId.OPT].scheme == SchemeId.OPT.value
    alone = run_scheme(SchemeId.OPT, typical_channel, sp, replace(cfg, nested_fallback=False))
    assert out[SchemeId.OPT].value >= alone.value


def test_two_point_grid_matches_corner_enumeration(typical_channel):
    sp = SystemParams(P=1e4, Pr_max=100.0, Rmin=0.0)
    res = brute_force(typical_channel, sp, GridSpec(2))
    best = -math.inf
    for T, lam, phi1, phi2, pr in itertools.product((0.0, T_MAX), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, sp.Pr_max)):
        obj, worst = evaluate_grid(typical_channel, sp, T, lam, phi1, phi2, pr)
        if worst >= -1e-9:
            best = max(best, float(obj))
    assert res.evals == 32
    assert res.value == pytest.approx(best, rel=1e-12)


def test_tagless_channel_makes_opt_and_nbs_equal():
    ch = ChannelState(g1=0.008, g2=1.25e-4, g3=0.0, h1=2.96e-4, h2=0.0, f1=1.56e-2, f2=5.8e-4)
    out = solve_schemes(ch, _quick(), SolverConfig(), [SchemeId.OPT, SchemeId.NBS])
    assert out[SchemeId.OPT].value == pytest.approx(out[SchemeId.NBS].value, abs=1e-9)
