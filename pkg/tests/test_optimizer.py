import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradkit.magnetostatics import GeometryError, field_at, load_geometry
from gradkit.optimizer import (DETUNED_START, REFERENCE_PARAMS, OptimizationError,
                               OptimizeSpec, SGeometryParams, build_geometry, evaluate,
                               optimize, parse_bounds)

from conftest import DATA

params_st = st.builds(
    SGeometryParams,
    s_leg_length=st.floats(300, 1200), s_leg_pitch=st.floats(20, 150),
    trace_width=st.floats(10, 19), return_path_offset=st.floats(20, 150),
    n_s_turns=st.integers(0, 3))


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(10, 500))
def test_half_turn_symmetry_zeroes_bz(params, current):
    b = field_at(build_geometry(params, current), (0, 0, params.trap_height))
    assert abs(b[2]) <= 1e-6 * current / 100


@settings(max_examples=30, deadline=None)
@given(params_st)
def test_series_current_continuity(params):
    paths = build_geometry(params, 300.0)
    s, a, b = paths
    assert s.current == 300.0 and a.current == b.current == 150.0
    # both branches run from the S exit back to its entry, closing the circuit
    for ret in (a, b):
        assert np.array_equal(ret.vertices[0], s.vertices[-1])
        assert np.array_equal(ret.vertices[-1], s.vertices[0])


def test_centre_leg_runs_along_plus_x():
    for n in range(4):
        s = build_geometry(SGeometryParams(n_s_turns=n), 100.0)[0]
        legs = [(v0, v1) for v0, v1 in zip(s.vertices[:-1], s.vertices[1:])
                if v0[1] == 0.0 and v1[1] == 0.0]
        assert len(legs) == 1 and legs[0][1][0] > legs[0][0][0]
        assert evaluate(SGeometryParams(n_s_turns=n), 100.0).gradient > 0


def test_straight_feed_without_turns():
    p = SGeometryParams(800.0, 60.0, 10.0, 40.0, n_s_turns=0)
    s = build_geometry(p, 300.0)[0]
    assert len(s.vertices) == 2
    m = evaluate(p, 300.0)
    # nothing trims By: the feed under the trap leaves a field of order a gauss
    # even with the return branches pulling half the current back close by
    assert m.residual > 500.0 and abs(m.residual_vector[1]) > 0.99 * m.residual
    assert m.gradient > 0 and not m.feasible


def test_reference_gradient_and_fixture():
    m = evaluate(REFERENCE_PARAMS, 300.0)
    assert 12.0 <= m.gradient <= 17.0
    assert m.residual <= 20.0 and m.power == 18.0 and m.feasible
    fixture = load_geometry(DATA / "reference_geometry.txt")
    built = build_geometry(REFERENCE_PARAMS, 300.0)
    assert [f.name for f in fixture] == [b.name for b in built]
    for f, b in zip(fixture, built):
        assert np.allclose(f.vertices, b.vertices) and f.current == b.current


def test_linear_in_current():
    g300 = evaluate(REFERENCE_PARAMS, 300.0).gradient
    g500 = evaluate(REFERENCE_PARAMS, 500.0).gradient
    assert g500 == pytest.approx(g300 * 5 / 3, rel=1e-12)
    assert abs(g500 - 23.0) < 1.0


def test_zero_current():
    m = evaluate(REFERENCE_PARAMS, 0.0)
    assert (m.gradient, m.residual, m.power, m.feasible) == (0.0, 0.0, 0.0, True)


def test_narrow_trace_infeasible():
    p = SGeometryParams(800.0, 56.26, 8.0, 40.0)
    assert not evaluate(p, 300.0).feasible


def test_overlapping_traces_rejected():
    with pytest.raises(GeometryError):
        build_geometry(SGeometryParams(800.0, 9.0, 10.0, 40.0))
    with pytest.raises(GeometryError):
        build_geometry(SGeometryParams(800.0, 60.0, 10.0, 5.0))
    with pytest.raises(GeometryError):
        SGeometryParams(-1.0)


def test_budget_one_returns_init():
    best, m, trace = optimize(OptimizeSpec(budget=1), REFERENCE_PARAMS)
    assert best == REFERENCE_PARAMS and len(trace) == 1
    assert m == evaluate(REFERENCE_PARAMS, 300.0)


def test_no_feasible_point_raises_with_best():
    with pytest.raises(OptimizationError) as exc:
        optimize(OptimizeSpec(budget=1), DETUNED_START)
    assert exc.value.best == DETUNED_START
    assert exc.value.metrics is not None


def test_init_outside_bounds():
    with pytest.raises(ValueError):
        optimize(OptimizeSpec(), SGeometryParams(2000.0, 60.0, 10.0, 40.0))


@pytest.fixture(scope="module")
def detuned_run():
    return optimize(OptimizeSpec(budget=500, seed=0), DETUNED_START)


def test_optimizer_regression(detuned_run):
    best, m, trace = detuned_run
    g0 = evaluate(DETUNED_START, 300.0).gradient
    assert m.gradient >= 1.2 * g0
    assert m.feasible and m.gradient >= 14.0 and m.residual <= 20.0 and m.power <= 18.0
    assert len(trace) <= 500


def test_trace_running_best_monotone(detuned_run):
    _, _, trace = detuned_run
    best = [t.best_objective for t in trace]
    assert all(b1 <= b0 for b0, b1 in zip(best, best[1:]))
    assert best[-1] == min(t.objective for t in trace)


def test_best_within_bounds_and_pure(detuned_run):
    best, m, _ = detuned_run
    spec = OptimizeSpec()
    for k, (lo, hi) in spec.bounds.items():
        assert lo <= getattr(best, k) <= hi
    assert evaluate(best, 300.0) == m
    assert m.residual <= spec.residual_max and m.power <= spec.power_max
    assert best.trace_width >= 10.0


def test_optimizer_deterministic():
    a = optimize(OptimizeSpec(budget=120, seed=4), DETUNED_START)
    b = optimize(OptimizeSpec(budget=120, seed=4), DETUNED_START)
    assert a[0] == b[0] and a[1] == b[1]
    assert [t.objective for t in a[2]] == [t.objective for t in b[2]]


def test_parse_bounds():
    b = parse_bounds((DATA / "bounds.txt").read_text())
    assert b["s_leg_length"] == (300.0, 1200.0)
    with pytest.raises(GeometryError, match=":2:"):
        parse_bounds("s_leg_length 1 2\nfoo 1 2\n")
    with pytest.raises(GeometryError, match=":1:"):
        parse_bounds("s_leg_pitch 5 1\n")
    with pytest.raises(ValueError):
        OptimizeSpec(bounds={})
    with pytest.raises(ValueError):
        OptimizeSpec(budget=0)
