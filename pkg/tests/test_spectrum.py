import numpy as np
import pytest

from fraclab.discretize import Grid1D, GridFunction
from fraclab.groundstate import DomainError, GroundState, solve_ball
from fraclab.spectrum import (
    alignment,
    constrained_minimum,
    derivative,
    hopf_check,
    morse_index,
    nonradial_gap,
    weight,
    weighted_eigs,
)


@pytest.fixture(scope="module")
def ball_spec(ball_state):
    return weighted_eigs(ball_state.op, ball_state, "full", 4)


@pytest.fixture(scope="module")
def line_spec(line_state):
    return weighted_eigs(line_state.op, line_state, "full", 4)


def test_first_eigenvalue_is_one(ball_state, ball_spec):
    e1 = ball_spec.eigenpairs[0]
    assert e1.value == pytest.approx(1.0, abs=5e-3)
    assert alignment(e1.w.interior, ball_state.u.interior, np.ones(ball_state.op.size)) >= 0.999


def test_normalization(ball_state, ball_spec):
    d = weight(ball_state)
    for e in ball_spec.eigenpairs:
        w = e.w.interior
        assert ball_state.op.inner(d * w, w) == pytest.approx(1.0, rel=1e-10)


def test_folded_matches_dense(ball_state, ball_spec):
    dense = weighted_eigs(ball_state.op, ball_state, "full", 4, method="dense")
    assert np.allclose(dense.values, ball_spec.values, rtol=1e-9)
    assert [e.sector for e in dense.eigenpairs] == [e.sector for e in ball_spec.eigenpairs]


def test_ball_gap_positive(ball_state, ball_spec):
    assert nonradial_gap(ball_spec, ball_state.p) > 0
    assert ball_spec.values[1] > ball_state.p


@pytest.mark.parametrize("s,p", [(0.25, 1.5), (0.75, 1.5), (0.75, 3.0)])
def test_gap_other_orders(s, p):
    st = solve_ball(s, 0.0, p, Grid1D.ball(513))
    spec = weighted_eigs(st.op, st, "full", 3)
    assert spec.values[1] > p


def test_line_translation_mode(line_state, line_spec):
    odd = line_spec.in_sector("odd")
    lam = min(odd, key=lambda e: abs(e.value - 2.0))
    assert lam.value == pytest.approx(2.0, abs=5e-3)
    du = derivative(line_state.u).interior
    assert alignment(lam.w.interior, du, weight(line_state)) >= 0.999


def test_constrained_gap(line_state):
    cm = constrained_minimum(line_state.op, line_state)
    assert cm.value - 2.0 > 0
    assert abs(cm.unconstrained - 2.0) <= 5e-3
    assert cm.constraint_residual <= 1e-8


def test_constrained_needs_line(ball_state):
    with pytest.raises(DomainError):
        constrained_minimum(ball_state.op, ball_state)


def test_morse_ball(ball_spec):
    assert morse_index(ball_spec, 2.0) == 1
    assert morse_index(ball_spec, 0.5) == 0


def test_morse_line(line_spec):
    assert morse_index(line_spec, 2.0) == 1


def test_sector_dimension_guard(ball_state):
    with pytest.raises(DomainError):
        weighted_eigs(ball_state.op, ball_state, "odd", 10_000)


def test_hopf_line(line_state):
    rep = hopf_check(line_state)
    assert rep.passed
    # v(x)/x = 4/(1+x^2)^2 for 2/(1+x^2), so -u''(0) = 4; sampled at x = h
    h = line_state.grid.h
    assert rep.ratio_at_origin == pytest.approx(4.0 / (1 + h * h) ** 2, rel=0.03)


def test_hopf_ball(ball_state):
    assert hopf_check(ball_state).passed


def test_hopf_rejects_non_even(ball_state):
    g = ball_state.grid
    odd = GridFunction.from_callable(g, lambda x: x * (1 - x * x), "odd")
    fake = GroundState(odd, 0.5, 0.0, 2.0, "ball", 0.0, ball_state.op)
    rep = hopf_check(fake)
    assert not rep.passed and rep.error
