import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxlim.cadlag import (
    StepFunction,
    completed_graph,
    d_j1,
    d_m1_monotone,
    endpoint,
    eval_at,
    j1_oscillation,
    m1_grid_step,
    rho,
)
from maxlim.errors import DomainError
from oracles import j1_grid_oracle, oscillation_oracle

F_HALF = StepFunction(0, [(0.5, 3)])


class TestStepFunction:
    def test_eval_examples(self):
        assert eval_at(F_HALF, 0.4) == 0
        assert eval_at(F_HALF, 0.5) == 3
        assert eval_at(F_HALF, 1.0) == 3
        assert F_HALF(0.0) == 0

    def test_eval_vectorized(self):
        np.testing.assert_array_equal(eval_at(F_HALF, [0.0, 0.49, 0.5, 1.0]), [0, 0, 3, 3])

    @pytest.mark.parametrize("t", [-0.1, 1.0001, float("nan")])
    def test_eval_domain(self, t):
        with pytest.raises(DomainError):
            eval_at(F_HALF, t)

    def test_endpoint(self):
        assert endpoint(StepFunction.constant(0)) == 0
        assert endpoint(StepFunction(0, [(0.25, 3), (0.75, 5)])) == 5
        assert endpoint(StepFunction(2)) == 2

    @pytest.mark.parametrize(
        "initial,jumps",
        [(-1, []), (0, [(0.0, 1)]), (0, [(1.2, 1)]), (0, [(0.5, 1), (0.5, 2)]), (0, [(0.6, 1), (0.5, 2)]), (0, [(0.5, -1)])],
    )
    def test_invalid(self, initial, jumps):
        with pytest.raises(DomainError):
            StepFunction(initial, jumps)

    def test_nondecreasing_flag(self):
        with pytest.raises(DomainError):
            StepFunction(2, [(0.5, 1)], nondecreasing=True)
        assert StepFunction(0, [(0.5, 1)], nondecreasing=True).is_nondecreasing()

    def test_immutable(self):
        with pytest.raises(AttributeError):
            F_HALF.initial = 1
        with pytest.raises(ValueError):
            F_HALF.times[0] = 0.1

    def test_from_pairs_perturbs_collisions(self):
        f = StepFunction.from_pairs(0, [(0.5, 1), (0.5, 2)])
        assert f.perturbed
        assert f.times[1] == np.nextafter(0.5, 1)
        assert not StepFunction.from_pairs(0, [(0.7, 1), (0.5, 2)]).perturbed

    def test_json_roundtrip(self):
        f = StepFunction(0.5, [(0.1, 1.0), (1.0, 0.25)])
        assert StepFunction.from_json(f.to_json()) == f
        assert json.loads(f.to_json()) == {"initial": 0.5, "jumps": [[0.1, 1.0], [1.0, 0.25]]}

    def test_json_unknown_key(self):
        with pytest.raises(DomainError):
            StepFunction.from_dict({"initial": 0, "jumps": [], "extra": 1})

    def test_csv(self):
        lines = StepFunction(0, [(0.25, 3)]).to_csv().splitlines()
        assert lines == ["t,value", "0.0,0.0", "0.25,3.0", "1.0,3.0"]
        # no duplicate row when the last jump is at 1
        assert StepFunction(0, [(1.0, 3)]).to_csv().splitlines()[-1] == "1.0,3.0"

    def test_canonical_drops_noop_jumps(self):
        f = StepFunction(1, [(0.2, 1), (0.4, 2), (0.6, 2)])
        assert f.canonical() == StepFunction(1, [(0.4, 2)])

    def test_sup_distance(self):
        assert StepFunction(0, [(0.5, 1)]).sup_distance(StepFunction(0, [(0.6, 1)])) == 1


class TestRho:
    def test_examples(self):
        assert rho(1, 2) == 0.5
        assert rho(3.3, 3.3) == 0
        assert rho(2, math.inf) == 0.5

    @pytest.mark.parametrize("bad", [0, -1, float("nan")])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            rho(bad, 1)


class TestOscillation:
    def test_single_jump(self):
        assert j1_oscillation(StepFunction(0, [(0.4, 5)]), 0.9) == 0

    def test_two_close_jumps(self):
        delta = 0.1
        f = StepFunction(0, [(0.3, 1), (0.3 + delta / 2, 2)])
        assert j1_oscillation(f, delta) == 1

    def test_constant(self):
        assert j1_oscillation(StepFunction.constant(4), 0.5) == 0

    def test_window_is_open(self):
        # t1 must sit strictly before the first jump, so the gap has to be < delta
        f = StepFunction(0, [(0.25, 1), (0.75, 2)])
        assert j1_oscillation(f, 0.5) == 0
        assert j1_oscillation(f, 0.5000001) == 1

    def test_bad_delta(self):
        with pytest.raises(DomainError):
            j1_oscillation(F_HALF, 0)


class TestJ1:
    def test_identity(self):
        assert d_j1(F_HALF, F_HALF) == 0

    def test_shifted_jump(self):
        f, g = StepFunction(0, [(0.5, 1)]), StepFunction(0, [(0.6, 1)])
        assert d_j1(f, g) == pytest.approx(0.1, abs=1e-12)
        assert j1_grid_oracle(f, g) == pytest.approx(0.1, abs=2e-3)

    def test_split_jump(self):
        f, g = StepFunction(0, [(0.5, 2)]), StepFunction(0, [(0.5, 1), (0.51, 2)])
        assert d_j1(f, g) == pytest.approx(1.0, abs=1e-12)
        assert d_j1(g, f) == d_j1(f, g)
        assert j1_grid_oracle(f, g) == pytest.approx(1.0, abs=2e-3)

    def test_jump_at_one_is_pinned(self):
        # a jump at t=1 cannot be moved away from 1
        f, g = StepFunction(0, [(1.0, 1)]), StepFunction(0, [(0.99, 1)])
        assert d_j1(f, g) == 1.0
        assert j1_grid_oracle(f, g) == pytest.approx(1.0, abs=2e-3)

    def test_noop_jumps_ignored(self):
        f = StepFunction(0, [(0.5, 1)])
        g = StepFunction(0, [(0.2, 0), (0.5, 1), (0.9, 1)])
        assert d_j1(f, g) == 0


class TestM1:
    def test_identity(self):
        f = StepFunction(0, [(0.5, 2)], nondecreasing=True)
        assert d_m1_monotone(f, f) == 0

    def test_split_jump_close(self):
        f = StepFunction(0, [(0.5, 2)], nondecreasing=True)
        g = StepFunction(0, [(0.5, 1), (0.51, 2)], nondecreasing=True)
        h = m1_grid_step(f, g)
        assert abs(d_m1_monotone(f, g) - 0.01) <= h

    def test_shifted_jump(self):
        f = StepFunction(0, [(0.5, 1)], nondecreasing=True)
        g = StepFunction(0, [(0.6, 1)], nondecreasing=True)
        assert abs(d_m1_monotone(f, g) - 0.1) <= m1_grid_step(f, g)

    def test_non_monotone_rejected(self):
        with pytest.raises(DomainError):
            d_m1_monotone(StepFunction(1, [(0.5, 0)]), F_HALF)

    def test_completed_graph(self):
        cg = completed_graph(StepFunction(0, [(0.5, 2)]))
        np.testing.assert_array_equal(cg, [[0, 0], [0.5, 0], [0.5, 2], [1, 2]])

    def test_refinement_converges(self):
        f = StepFunction(0, [(0.3, 1), (0.7, 3)], nondecreasing=True)
        g = StepFunction(0.5, [(0.35, 1.5), (0.6, 2.5), (0.8, 3)], nondecreasing=True)
        coarse = d_m1_monotone(f, g)
        fine = d_m1_monotone(f, g, resolution=2.5e-4, max_points=20000)
        assert fine <= coarse + 1e-12
        assert coarse - fine <= m1_grid_step(f, g)


# ---------------------------------------------------------------------------
# property tests
# ---------------------------------------------------------------------------

times_st = st.lists(st.floats(0.001, 1.0), min_size=0, max_size=4, unique=True).map(sorted)
level_st = st.floats(0.0, 5.0)


@st.composite
def step_functions(draw, monotone=False):
    ts = draw(times_st)
    lv = draw(st.lists(level_st, min_size=len(ts) + 1, max_size=len(ts) + 1))
    if monotone:
        lv = sorted(lv)
    return StepFunction(lv[0], list(zip(ts, lv[1:])), nondecreasing=monotone)


@settings(max_examples=200, deadline=None)
@given(step_functions(), step_functions(), step_functions())
def test_j1_metric_axioms(f, g, h):
    assert d_j1(f, f) == 0
    assert d_j1(f, g) == d_j1(g, f)
    assert d_j1(f, h) <= d_j1(f, g) + d_j1(g, h) + 1e-9
    assert d_j1(f, g) <= f.sup_distance(g) + 1e-12


@settings(max_examples=100, deadline=None)
@given(step_functions(monotone=True), step_functions(monotone=True))
def test_m1_below_j1(f, g):
    assert d_m1_monotone(f, g) <= d_j1(f, g) + m1_grid_step(f, g) + 1e-12


@settings(max_examples=200, deadline=None)
@given(step_functions(), st.floats(0.01, 1.0))
def test_oscillation_matches_enumeration(f, delta):
    gaps = np.subtract.outer(f.times, f.times)
    if np.any(np.abs(gaps - delta) < 1e-9):
        return  # open/closed window boundary; not resolvable at float precision
    assert j1_oscillation(f, delta) == pytest.approx(oscillation_oracle(f, delta), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(step_functions(), st.floats(0.01, 0.5), st.floats(0.0, 0.5))
def test_oscillation_monotone_in_delta(f, d1, extra):
    assert j1_oscillation(f, d1) <= j1_oscillation(f, d1 + extra)
