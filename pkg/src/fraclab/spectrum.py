"""Weighted eigenproblems of the linearization around a positive solution.

For a solution ``u`` of ``(-Delta)^s u + lam u = u^p`` the problems

    (-Delta)^s w + lam w = Lambda u^(p-1) w

are solved in the even and odd sectors.  The weight is diagonal and
positive at interior nodes, so the pencil is reduced to a standard
symmetric problem by scaling with its square root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, null_space

from .discretize import FracOp, GridFunction, ParityFold
from .groundstate import DomainError, GroundState, residual

__all__ = [
    "Eigenpair",
    "SpectrumResult",
    "SpectrumError",
    "HopfReport",
    "ConstrainedMinimum",
    "weight",
    "derivative",
    "alignment",
    "rayleigh",
    "weighted_eigs",
    "nonradial_gap",
    "constrained_minimum",
    "constrained_gap",
    "morse_index",
    "hopf_check",
]

SECTORS = ("even", "odd", "full")


class SpectrumError(RuntimeError):
    """The eigensolver failed or returned unusable output."""


@dataclass
class Eigenpair:
    value: float
    sector: str
    w: GridFunction = field(repr=False)


@dataclass
class SpectrumResult:
    eigenpairs: list
    base: GroundState = field(repr=False)
    k: int
    sector: str

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.eigenpairs])

    def in_sector(self, sector: str) -> list:
        return [e for e in self.eigenpairs if e.sector == sector]

    def to_rows(self):
        for i, e in enumerate(self.eigenpairs, start=1):
            yield i, e.value, e.sector


def weight(state: GroundState) -> np.ndarray:
    """``u^(p-1)`` at the interior nodes."""
    d = state.u.interior ** (state.p - 1.0)
    if np.any(d <= 0):
        raise DomainError("weight u^(p-1) must be positive at interior nodes")
    return d


def derivative(u: GridFunction, skip: int = 2) -> GridFunction:
    """Fourth-order centered ``u'``; zero on the ``skip`` outermost cells."""
    g = u.grid
    f = u.values
    out = np.zeros(g.n)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * g.h)
    out[:skip] = 0.0
    out[g.n - skip :] = 0.0
    parity = {"even": "odd", "odd": "even"}.get(u.parity, "none")
    return GridFunction(g, out, parity)


def alignment(a: np.ndarray, b: np.ndarray, wgt: np.ndarray) -> float:
    """``|<a, b>_wgt| / (|a|_wgt |b|_wgt)`` for interior arrays."""
    ab = np.dot(wgt * a, b)
    return float(abs(ab) / np.sqrt(np.dot(wgt * a, a) * np.dot(wgt * b, b)))


def rayleigh(op: FracOp, state: GroundState, w: np.ndarray) -> float:
    """``([w]^2 + lam int w^2) / int u^(p-1) w^2`` on the grid."""
    num = op.inner(w, op.A @ w) + state.lam * op.inner(w, w)
    return num / op.inner(weight(state) * w, w)


def _sector_pairs(op, state, d, sector, k):
    fold = ParityFold(op.size, sector)
    if k > fold.size:
        raise DomainError(f"k={k} exceeds the {sector} sector dimension {fold.size}")
    mult = fold.multiplicity
    K = fold.galerkin(op.A) + state.lam * np.diag(mult)
    scale = 1.0 / np.sqrt(mult * fold.reduce(d))
    M = scale[:, None] * K * scale[None, :]
    try:
        vals, Y = eigh(M, subset_by_index=[0, k - 1])
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"{sector}-sector eigensolve failed: {exc}") from exc
    return vals, fold.expand(scale[:, None] * Y)


def _dense_pairs(op, state, d, k):
    if k > op.size:
        raise DomainError(f"k={k} exceeds the dimension {op.size}")
    scale = 1.0 / np.sqrt(d)
    M = scale[:, None] * (op.A + state.lam * np.eye(op.size)) * scale[None, :]
    try:
        vals, Y = eigh(0.5 * (M + M.T), subset_by_index=[0, k - 1])
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"dense eigensolve failed: {exc}") from exc
    return vals, scale[:, None] * Y


def _pack(op, vals, vecs, d, sector_of):
    g = op.grid
    pairs = []
    for j, lam_j in enumerate(vals):
        w = vecs[:, j]
        w = w / np.sqrt(op.inner(d * w, w))
        if w[np.argmax(np.abs(w))] < 0:
            w = -w
        full = np.zeros(g.n)
        full[1:-1] = w
        sec = sector_of(w)
        gf = GridFunction(g, full, sec if sec != "full" else "none")
        pairs.append(Eigenpair(float(lam_j), sec, gf))
    return pairs


def _classify(w: np.ndarray) -> str:
    r = w[::-1]
    scale = np.max(np.abs(w))
    if np.max(np.abs(w - r)) <= 1e-8 * scale:
        return "even"
    if np.max(np.abs(w + r)) <= 1e-8 * scale:
        return "odd"
    return "full"


def weighted_eigs(
    op: FracOp,
    state: GroundState,
    sector: str = "full",
    k: int = 4,
    method: str = "folded",
) -> SpectrumResult:
    """The ``k`` smallest weighted eigenpairs in ``sector``.

    With ``method="folded"`` the full sector merges the even and odd
    half-grid problems; ``method="dense"`` solves the unfolded problem
    (used to cross-check the sector decomposition).  Eigenvectors satisfy
    ``int u^(p-1) w^2 = 1`` in the operator's pairing.
    """
    if sector not in SECTORS:
        raise ValueError(f"unknown sector {sector!r}")
    if k < 1:
        raise DomainError("k must be at least 1")
    if state.op is not op and state.grid != op.grid:
        raise DomainError("operator and state live on different grids")
    d = weight(state)
    if sector in ("even", "odd"):
        vals, vecs = _sector_pairs(op, state, d, sector, k)
        pairs = _pack(op, vals, vecs, d, lambda w: sector)
    elif method == "dense":
        vals, vecs = _dense_pairs(op, state, d, k)
        pairs = _pack(op, vals, vecs, d, _classify)
    elif method == "folded":
        pairs = []
        for sec in ("even", "odd"):
            kk = min(k, ParityFold(op.size, sec).size)
            vals, vecs = _sector_pairs(op, state, d, sec, kk)
            pairs += _pack(op, vals, vecs, d, lambda w, sec=sec: sec)
        if k > op.size:
            raise DomainError(f"k={k} exceeds the dimension {op.size}")
        pairs = sorted(pairs, key=lambda e: e.value)[:k]
    else:
        raise ValueError(f"unknown method {method!r}")
    if not all(np.isfinite(e.value) for e in pairs):
        raise SpectrumError("non-finite eigenvalue")
    return SpectrumResult(pairs, state, k, sector)


def nonradial_gap(spec: SpectrumResult, p: float) -> float:
    """Smallest odd-sector eigenvalue minus ``p``."""
    odd = spec.in_sector("odd")
    if not odd:
        raise SpectrumError("spectrum has no odd-sector eigenvalues")
    return min(e.value for e in odd) - p


@dataclass
class ConstrainedMinimum:
    value: float
    w: GridFunction = field(repr=False)
    constraint_residual: float
    unconstrained: float


def constrained_minimum(op: FracOp, state: GroundState) -> ConstrainedMinimum:
    """Minimum odd Rayleigh quotient subject to ``int u^(p-1) u' w = 0``.

    The constraint direction is removed exactly from the scaled odd-sector
    problem by restricting to an orthonormal basis of its complement.
    """
    if state.domain_kind != "line":
        raise DomainError("the constrained gap is defined for line solutions")
    d = weight(state)
    fold = ParityFold(op.size, "odd")
    mult = fold.multiplicity
    K = fold.galerkin(op.A) + state.lam * np.diag(mult)
    dh = mult * fold.reduce(d)
    scale = 1.0 / np.sqrt(dh)
    M = scale[:, None] * K * scale[None, :]
    du = fold.reduce(derivative(state.u).interior)
    c = np.sqrt(dh) * du
    Q = null_space(c[None, :])
    R = Q.T @ M @ Q
    vals, Z = eigh(0.5 * (R + R.T), subset_by_index=[0, 0])
    free = eigh(M, eigvals_only=True, subset_by_index=[0, 0])[0]
    v = scale * (Q @ Z[:, 0])
    w = fold.expand(v)
    w = w / np.sqrt(op.inner(d * w, w))
    dfull = derivative(state.u).interior
    cres = abs(op.inner(d * dfull, w)) / np.sqrt(op.inner(d * dfull, dfull))
    full = np.zeros(op.grid.n)
    full[1:-1] = w
    return ConstrainedMinimum(
        float(vals[0]), GridFunction(op.grid, full, "odd"), float(cres), float(free)
    )


def constrained_gap(op: FracOp, state: GroundState, p: float | None = None) -> float:
    """Constrained odd minimum minus ``p``."""
    p = state.p if p is None else p
    return constrained_minimum(op, state).value - p


def morse_index(spec: SpectrumResult, p: float) -> int:
    """Number of eigenvalues below ``p``.

    Ball spectra count the full sector.  On the line the odd sector holds
    the translation eigenvalue ``Lambda = p``, so only the even sector is
    counted.
    """
    pairs = spec.eigenpairs
    if spec.base.domain_kind == "line":
        pairs = [e for e in pairs if e.sector == "even"]
    if not pairs:
        raise DomainError("no eigenvalues in the counted sector")
    vals = [e.value for e in pairs]
    if max(vals) < p:
        raise DomainError("not enough eigenvalues requested to bound the index")
    return sum(v < p for v in vals)


@dataclass
class HopfReport:
    passed: bool
    min_v: float
    min_ratio: float
    ratio_at_origin: float
    error: str | None = None


def hopf_check(state: GroundState, threshold: float | None = None) -> HopfReport:
    """Check ``v = -u' > 0`` for ``x > h`` and ``v(x)/x`` bounded below near 0.

    Needs a certified even state; anything else is reported as an error.
    """
    nan = float("nan")
    if state.u.parity != "even":
        return HopfReport(False, nan, nan, nan, "state is not even")
    if residual(state) > state.tol:
        return HopfReport(False, nan, nan, nan, "state is not a certified solution")
    g = state.grid
    x = g.nodes
    v = -derivative(state.u).values
    inner = slice(g.center + 1, g.n - 2)
    xs, vs = x[inner], v[inner]
    near = xs <= 0.1 * g.half_width
    ratios = vs[near] / xs[near]
    thr = 1e-6 * state.amplitude if threshold is None else threshold
    min_v = float(vs[xs > g.h].min())
    min_ratio = float(ratios.min())
    ok = min_v > 0 and min_ratio > thr
    return HopfReport(bool(ok), min_v, min_ratio, float(ratios[0]))
