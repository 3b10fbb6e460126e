import math

import numpy as np
import pytest
from scipy.integrate import quad

from fraclab.discretize import Grid1D, GridFunction, apply, assemble
from fraclab.extension import (
    ExtensionField,
    extend,
    extension_constant,
    frac_boundary_derivative,
    geometric_levels,
    nodal_decompose,
    normal_derivative,
    pde_residual,
    poisson_constant,
    poisson_kernel,
    sign_changes,
)


def lorentzian(grid):
    return GridFunction.from_callable(grid, lambda x: 1 / (1 + x * x), "even")


@pytest.fixture(scope="module")
def line_field():
    g = Grid1D.line(4001, 100.0)
    v = lorentzian(g)
    return g, v, extend(v, 0.5)


def test_poisson_constant_half():
    assert poisson_constant(0.5) == pytest.approx(1 / math.pi, rel=1e-14)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_poisson_constant_quadrature(s):
    integral, _ = quad(lambda z: (1 + z * z) ** (-(1 + 2 * s) / 2), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13)
    assert poisson_constant(s) == pytest.approx(1 / integral, rel=1e-10)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_kernel_unit_mass(s):
    mass, _ = quad(lambda x: poisson_kernel(x, 0.3, s), -np.inf, np.inf, epsabs=1e-12)
    assert mass == pytest.approx(1.0, rel=1e-8)


def test_extension_constant_half():
    assert extension_constant(0.5) == pytest.approx(1.0, rel=1e-14)


def test_lorentzian_extension_value(line_field):
    g, v, F = line_field
    F1 = extend(v, 0.5, tgrid=[1.0])
    assert F1.W[1, g.center] == pytest.approx(0.5, abs=1e-3)


def test_lorentzian_field_box(line_field):
    _, _, F = line_field
    X, T = np.meshgrid(F.x, F.t)
    exact = (1 + T) / ((1 + T) ** 2 + X * X)
    box = (np.abs(X) <= 5) & (T >= 0.1) & (T <= 5)
    assert np.max(np.abs(F.W - exact)[box]) <= 1e-3


def test_zero_trace():
    g = Grid1D.ball(129)
    F = extend(GridFunction.zeros(g, "even"), 0.5)
    assert np.all(F.W == 0)


def test_even_trace_even_field():
    g = Grid1D.ball(257)
    v = GridFunction.from_callable(g, lambda x: (1 - x * x) * np.cos(2 * x), "even")
    F = extend(v, 0.3)
    assert np.allclose(F.W, F.W[:, ::-1], atol=1e-14)


def test_levels_geometric():
    t = geometric_levels()
    assert t[0] == pytest.approx(1e-4) and np.allclose(t[1:] / t[:-1], 1 / 0.7)


def test_pde_residual_closed_form():
    xg = Grid1D.line(201, 5.0)
    t = np.arange(1, 300) * 0.02
    F = ExtensionField.from_function(lambda X, T: (1 + T) / ((1 + T) ** 2 + X * X), xg, t, 0.5)
    assert pde_residual(F, (-5, 5), (0.5, 5)) <= 1e-2 * np.max(np.abs(F.W))


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_pde_residual_pure_power(s):
    xg = Grid1D.line(41, 2.0)
    t = geometric_levels(1e-3, 0.8, 30)
    F = ExtensionField.from_function(lambda X, T: T ** (2 * s) + 0 * X, xg, t, s)
    assert pde_residual(F) <= 1e-10


def test_pde_residual_noise():
    rng = np.random.default_rng(0)
    xg = Grid1D.line(101, 5.0)
    t = np.arange(1, 60) * 0.05
    F = ExtensionField(rng.normal(size=(60, 101)), xg, np.r_[0.0, t], 0.5)
    assert pde_residual(F) > 1


def test_normal_derivative_lorentzian(line_field):
    g, v, F = line_field
    nd = normal_derivative(F, grid=g).values.values
    x = g.nodes
    m = np.abs(x) <= 3
    exact = (1 - x[m] ** 2) / (1 + x[m] ** 2) ** 2
    assert np.max(np.abs(nd[m] - exact)) <= 0.01


def test_normal_derivative_torsion():
    g = Grid1D.ball(1025)
    tor = GridFunction.from_callable(g, lambda x: np.sqrt(np.clip(1 - x * x, 0, None)), "even")
    nd = normal_derivative(extend(tor, 0.5), grid=g).values.values
    m = np.abs(g.nodes) <= 0.9
    assert np.max(np.abs(nd[m] - 1.0)) <= 0.01


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_normal_derivative_matches_operator(s):
    # kappa (-Delta)^s on the power profile, whose image is Gamma(1+2s)
    g = Grid1D.ball(1025)
    f = GridFunction.from_callable(g, lambda x: np.clip(1 - x * x, 0, None) ** s, "even")
    nd = normal_derivative(extend(f, s), grid=g).values.values
    m = np.abs(g.nodes) <= 0.5
    target = extension_constant(s) * math.gamma(1 + 2 * s)
    assert np.max(np.abs(nd[m] / target - 1)) <= 0.02


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_boundary_derivative_power(s):
    g = Grid1D.ball(2049)
    w = GridFunction.from_callable(g, lambda x: np.clip(1 - x * x, 0, None) ** s, "even")
    fit = frac_boundary_derivative(w, s)
    assert fit.psi_right == pytest.approx(2**s, rel=0.01)
    assert fit.psi_left == pytest.approx(2**s, rel=0.01)


def test_boundary_derivative_needs_ball():
    g = Grid1D.line(101, 5.0)
    with pytest.raises(ValueError):
        frac_boundary_derivative(lorentzian(g), 0.5)


def test_ground_state_one_domain(ball_state):
    F = extend(ball_state.u, 0.5)
    dec = nodal_decompose(F)
    assert dec.domain_count == 1
    assert dec.domains[0].sign == 1


def test_second_eigenfunction_two_domains():
    from fraclab.groundstate import solve_ball
    from fraclab.spectrum import weighted_eigs

    st = solve_ball(0.5, 0.5, 2.0, Grid1D.ball(513))
    w2 = weighted_eigs(st.op, st, "full", 2).eigenpairs[1].w
    assert sign_changes(w2) + 1 >= 1
    dec = nodal_decompose(extend(w2, 0.5))
    assert dec.domain_count == 2
    assert {d.sign for d in dec.domains} == {1, -1}


def test_torsion_operator_oracle():
    g = Grid1D.ball(1025)
    tor = GridFunction.from_callable(g, lambda x: np.sqrt(np.clip(1 - x * x, 0, None)), "even")
    out = apply(assemble(g, 0.5), tor).values
    assert abs(out[g.center] - 1) <= 0.02
