import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.discretize import (
    Grid1D,
    GridFunction,
    GridMismatchError,
    ParityFold,
    apply,
    assemble,
    bilinear,
    constant_cs,
    integrate,
)


def cs_mpmath(s):
    s = mpmath.mpf(s)
    return float(2 ** (2 * s) * s * mpmath.gamma(0.5 + s) / (mpmath.sqrt(mpmath.pi) * mpmath.gamma(1 - s)))


def test_constant_at_half():
    assert constant_cs(0.5) == pytest.approx(1 / math.pi, rel=1e-14)


@pytest.mark.parametrize("s", [0.25, 0.75, 0.1, 0.9])
def test_constant_against_mpmath(s):
    assert constant_cs(s) == pytest.approx(cs_mpmath(s), rel=1e-12)


@given(st.floats(min_value=1e-3, max_value=0.999))
def test_constant_positive(s):
    assert constant_cs(s) > 0


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5, float("nan")])
def test_constant_rejects_order(s):
    with pytest.raises(ValueError):
        constant_cs(s)


@pytest.mark.parametrize("n", [8, 10, 7, 3])
def test_grid_needs_odd_count(n):
    with pytest.raises(ValueError):
        Grid1D.ball(n)


def test_grid_reflection_exact():
    g = Grid1D.ball(257)
    assert np.array_equal(g.nodes, -g.nodes[::-1])
    assert g.nodes[g.center] == 0.0


def test_matrix_symmetric(op_half):
    A = op_half.A
    assert np.max(np.abs(A - A.T)) <= 1e-12


def test_indicator_value_at_origin():
    # tail integral: c_s * 2 int_1^inf y^(-2) dy = 2/pi at s = 1/2
    g = Grid1D.ball(2049)
    one = GridFunction(g, np.where(np.abs(g.nodes) < 1, 1.0, 0.0), "even")
    val = apply(assemble(g, 0.5), one).values[g.center]
    assert val == pytest.approx(2 / math.pi, rel=5e-3)


def test_torsion_is_one_inside():
    g = Grid1D.ball(2049)
    tor = GridFunction.from_callable(g, lambda x: np.sqrt(np.clip(1 - x * x, 0, None)), "even")
    out = apply(assemble(g, 0.5), tor).values
    inner = np.abs(g.nodes) <= 0.9
    assert np.max(np.abs(out[inner] - 1.0)) <= 0.02


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_power_profile_oracle(s):
    # (-Delta)^s (1-x^2)_+^s = Gamma(1+2s) on (-1, 1)
    g = Grid1D.ball(2049)
    f = GridFunction.from_callable(g, lambda x: np.clip(1 - x * x, 0, None) ** s, "even")
    out = apply(assemble(g, s), f).values
    inner = np.abs(g.nodes) <= 0.5
    assert np.max(np.abs(out[inner] / math.gamma(1 + 2 * s) - 1)) <= 0.02


def test_apply_zero(op_half, ball_1025):
    assert np.all(apply(op_half, GridFunction.zeros(ball_1025)).values == 0.0)


@pytest.mark.parametrize("parity,f", [("even", np.cos), ("odd", np.sin)])
def test_apply_keeps_parity(op_half, ball_1025, parity, f):
    u = GridFunction.from_callable(ball_1025, lambda x: f(3 * x) * (1 - x * x), parity)
    out = apply(op_half, u)
    assert out.detect_parity(rtol=1e-10) == parity


def test_apply_grid_mismatch(op_half):
    u = GridFunction.zeros(Grid1D.ball(513))
    with pytest.raises(GridMismatchError):
        apply(op_half, u)


def test_bilinear_symmetric_positive(op_half, ball_1025):
    rng = np.random.default_rng(3)
    a = GridFunction(ball_1025, np.r_[0, rng.normal(size=1023), 0])
    b = GridFunction(ball_1025, np.r_[0, rng.normal(size=1023), 0])
    assert bilinear(op_half, a, b) == pytest.approx(bilinear(op_half, b, a), rel=1e-12)
    assert bilinear(op_half, a, a) > 0


def test_lambda1_against_known_value():
    # first Dirichlet eigenvalue of the half-Laplacian on (-1,1) is 1.1577738...
    op = assemble(Grid1D.ball(2049), 0.5)
    assert op.lambda1 == pytest.approx(1.1577738, rel=2e-3)


def test_integrate_constant(ball_1025):
    one = GridFunction(ball_1025, np.ones(ball_1025.n), "even")
    assert integrate(one) == pytest.approx(2.0, abs=1e-10)


def test_integrate_odd(ball_1025):
    f = GridFunction.from_callable(ball_1025, lambda x: x**3 * np.exp(x * x), "odd")
    assert abs(integrate(f)) <= 1e-12


def test_integrate_polynomial(ball_1025):
    f = GridFunction.from_callable(ball_1025, lambda x: 1 - x * x, "even")
    assert integrate(f) == pytest.approx(4 / 3, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=5, max_value=40), st.sampled_from(["even", "odd"]))
def test_fold_round_trip(m_half, parity):
    m = 2 * m_half + 1
    fold = ParityFold(m, parity)
    v = np.arange(1.0, fold.size + 1)
    full = fold.expand(v)
    assert np.allclose(fold.reduce(full), v)
    assert np.allclose(full, full[::-1] if parity == "even" else -full[::-1])


def test_fold_restrict_matches_dense(op_half):
    rng = np.random.default_rng(0)
    for parity in ("even", "odd"):
        fold = ParityFold(op_half.size, parity)
        v = rng.normal(size=fold.size)
        dense = op_half.A @ fold.expand(v)
        assert np.allclose(fold.reduce(dense), fold.restrict(op_half.A) @ v, atol=1e-10)
