import math

import numpy as np
import pytest

from fraclab.continuation import (
    Branch,
    bound_diagnostic,
    critical_exponent,
    sobolev_constant,
    trace_branch,
    uniqueness_probe,
)
from fraclab.discretize import Grid1D
from fraclab.groundstate import DomainError


@pytest.mark.parametrize("s,pc", [(0.25, 3.0), (0.5, math.inf), (0.75, math.inf), (0.4, 9.0)])
def test_critical_exponent(s, pc):
    assert critical_exponent(s) == pytest.approx(pc)


def test_sobolev_constant_positive():
    assert sobolev_constant(0.25) > 0
    with pytest.raises(DomainError):
        sobolev_constant(0.5)


@pytest.fixture(scope="module")
def branch_ball():
    return trace_branch(0.5, 0.0, 1.2, 4.0, Grid1D.ball(257))


def test_branch_complete(branch_ball):
    b = branch_ball
    assert b.complete
    assert b.p_values[0] == pytest.approx(1.2) and b.p_values[-1] == pytest.approx(4.0)
    assert np.all(np.diff(b.p_values) > 0)


def test_branch_nondegenerate(branch_ball):
    for pt in branch_ball.points:
        assert pt.lambda2 - pt.p > 0
        assert abs(pt.lambda1 - 1) <= 5e-3
        assert np.isfinite(pt.jacobian_cond)


def test_branch_lambda_one_morse():
    b = trace_branch(0.5, 1.0, 1.2, 4.0, Grid1D.ball(257))
    assert b.complete
    assert all(pt.lambda1 < pt.p < pt.lambda2 for pt in b.points)


def test_single_point_branch():
    b = trace_branch(0.5, 0.0, 2.0, 2.0, Grid1D.ball(129))
    assert len(b.points) == 1


def test_branch_rejects_supercritical():
    with pytest.raises(DomainError):
        trace_branch(0.25, 0.0, 1.5, 3.5, Grid1D.ball(129))


def test_rescaled_peaks_one(branch_ball):
    rep = bound_diagnostic(branch_ball)
    assert np.allclose(rep.rescaled_peaks, 1.0)
    assert rep.passed


def test_bound_sobolev_variant():
    b = trace_branch(0.25, 0.0, 1.5, 2.0, Grid1D.ball(257))
    rep = bound_diagnostic(b)
    assert rep.lower_bound_kind == "sobolev"
    assert rep.lower_bound_ok


def test_empty_branch_guard():
    with pytest.raises(ValueError):
        bound_diagnostic(Branch([], 0.5, 0.0, "ball"))


@pytest.mark.parametrize("s,p", [(0.5, 2.0), (0.25, 2.5)])
@pytest.mark.parametrize("n", [257, 513])
def test_uniqueness_probe(s, p, n):
    assert uniqueness_probe(s, 0.0, p, Grid1D.ball(n), 20, seed=11) == 1


def test_uniqueness_probe_zero_starts():
    assert uniqueness_probe(0.5, 0.0, 2.0, Grid1D.ball(129), 0) == 0
