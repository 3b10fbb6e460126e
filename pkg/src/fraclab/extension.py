"""Caffarelli-Silvestre extensions and boundary quantities on the interval.

The extension of a grid function is evaluated through the Poisson kernel,
integrated exactly against the piecewise-linear interpolant of the trace, so
it is accurate down to ``t`` well below the grid spacing.  Fields are stored
row-wise: ``W[j, i]`` is the value at ``(x_i, t_j)`` and row 0 is the trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve
from scipy.special import gamma, stdtr

from .discretize import FracOp, Grid1D, GridFunction, _check_order, bilinear

__all__ = [
    "ExtensionField",
    "NodalDecomposition",
    "NodalDomain",
    "BoundaryFit",
    "PairingResult",
    "poisson_constant",
    "extension_constant",
    "poisson_kernel",
    "geometric_levels",
    "extension_grid",
    "extend",
    "pde_residual",
    "normal_derivative",
    "frac_boundary_derivative",
    "pohozaev_pairing",
    "nodal_decompose",
    "embed",
    "sign_changes",
    "corner_sign_change",
]


def poisson_constant(s: float) -> float:
    """Reciprocal of ``int (1 + z^2)^(-(1+2s)/2) dz`` (Beta normalization)."""
    s = _check_order(s)
    return gamma(s + 0.5) / (math.sqrt(math.pi) * gamma(s))


def extension_constant(s: float) -> float:
    """Factor relating the weighted normal derivative to ``(-Delta)^s``.

    ``-lim t^(1-2s) dW/dt = kappa * (-Delta)^s v`` for the Poisson extension,
    and ``int t^(1-2s) |grad W|^2 = kappa * int v (-Delta)^s v``; both equal 1
    at ``s = 1/2``.
    """
    s = _check_order(s)
    return 2.0 ** (1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s)


def poisson_kernel(x, t, s: float):
    """``P_s(x, t) = p_{1,s} t^(2s) (t^2 + x^2)^(-(1+2s)/2)``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return poisson_constant(s) * t ** (2 * s) * (t * t + x * x) ** (-(1.0 + 2 * s) / 2.0)


def geometric_levels(t_min: float = 1e-4, ratio: float = 0.7, count: int = 40) -> np.ndarray:
    """Increasing levels ``t_min / ratio^k``, ``k = 0..count-1``."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    return t_min / ratio ** np.arange(count)


@dataclass
class ExtensionField:
    W: np.ndarray = field(repr=False)
    xgrid: Grid1D
    t: np.ndarray = field(repr=False)
    s: float

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        if self.t[0] != 0.0 or np.any(np.diff(self.t) <= 0):
            raise ValueError("t levels must start at 0 and increase")
        if self.W.shape != (self.t.size, self.xgrid.n):
            raise ValueError("field shape does not match the grids")

    @property
    def x(self) -> np.ndarray:
        return self.xgrid.nodes

    @property
    def trace(self) -> np.ndarray:
        return self.W[0]

    @classmethod
    def from_function(cls, f, xgrid: Grid1D, t, s: float) -> "ExtensionField":
        """Sample a closed-form field ``f(x, t)``; row 0 is ``f(x, 0)``."""
        t = np.concatenate([[0.0], np.asarray(t, dtype=float)])
        X, T = np.meshgrid(xgrid.nodes, t)
        return cls(np.asarray(f(X, T), dtype=float), xgrid, t, s)

    def to_csv_rows(self):
        for j, tj in enumerate(self.t):
            for i, xi in enumerate(self.x):
                yield xi, tj, self.W[j, i]


def _psi_profile(z: np.ndarray, s: float) -> np.ndarray:
    # even second antiderivative of the unit-height kernel (linear part dropped)
    pc = poisson_constant(s)
    az = np.abs(z)
    tail = stdtr(2.0 * s, -az * math.sqrt(2.0 * s))
    if abs(s - 0.5) < 1e-12:
        G = 0.5 * pc * np.log1p(z * z)
    else:
        a = 1.0 - 2.0 * s
        G = pc * (1.0 + z * z) ** (a / 2.0) / a
    return 0.5 * az - az * tail - G


def _hat_weights(mmax: int, h: float, t: float, s: float) -> np.ndarray:
    """``int hat_0(y) P_s(m h - y, t) dy`` for ``m = -mmax..mmax``."""
    m = np.arange(-mmax - 1, mmax + 2, dtype=float)
    psi = t * _psi_profile(m * h / t, s)
    return (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / h


def extension_grid(grid: Grid1D, half_width: float = 8.0) -> Grid1D:
    """Evaluation grid with the spacing of ``grid``, widened for ball traces."""
    if grid.domain_kind == "line" or half_width <= grid.half_width:
        return grid
    k = int(round(half_width / grid.h))
    return Grid1D(k * grid.h, 2 * k + 1, "line")


def extend(
    v: GridFunction,
    s: float,
    xgrid: Grid1D | None = None,
    tgrid=None,
) -> ExtensionField:
    """Poisson extension ``W(x, t)`` of the zero-exterior function ``v``.

    ``xgrid`` must have the spacing of ``v.grid`` (nodes are aligned); the
    default widens ball grids to ``[-8, 8]``.  ``tgrid`` lists the positive
    levels; the default is :func:`geometric_levels`.
    """
    s = _check_order(s)
    xgrid = xgrid if xgrid is not None else extension_grid(v.grid)
    h = v.grid.h
    if abs(xgrid.h - h) > 1e-12 * h:
        raise ValueError("extension grid must share the trace grid spacing")
    t = geometric_levels() if tgrid is None else np.asarray(tgrid, dtype=float)
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t levels must be positive and increasing")
    # node offset between the two grids (both centred at 0)
    off = (xgrid.n - v.grid.n) // 2
    src = v.values
    trace = np.zeros(xgrid.n)
    lo, hi = max(off, 0), min(off + src.size, xgrid.n)
    trace[lo:hi] = src[lo - off : hi - off]
    mmax = xgrid.n + src.size
    W = np.empty((t.size + 1, xgrid.n))
    W[0] = trace
    for j, tj in enumerate(t):
        w = _hat_weights(mmax, h, tj, s)
        full = fftconvolve(src, w, mode="full")
        W[j + 1] = full[mmax - off : mmax - off + xgrid.n]
    if v.parity == "even":
        W = 0.5 * (W + W[:, ::-1])
    elif v.parity == "odd":
        W = 0.5 * (W - W[:, ::-1])
    return ExtensionField(W, xgrid, np.concatenate([[0.0], t]), s)


def _weighted_divergence(field_: ExtensionField) -> np.ndarray:
    """``div(t^(1-2s) grad W)`` at interior nodes (rows 1..-2, cols 1..-2)."""
    s = field_.s
    W = field_.W
    t = field_.t
    hx = field_.xgrid.h
    a = 1.0 - 2.0 * s
    tm = t[1:-1]
    wx = tm[:, None] ** a * (W[1:-1, 2:] - 2.0 * W[1:-1, 1:-1] + W[1:-1, :-2]) / hx**2
    # flux t^a W_t between levels, weighted by the exact integral of t^(-a)
    # so that the 1D solutions 1 and t^(2s) are reproduced exactly
    tau = t ** (2.0 * s) / (2.0 * s)
    flux = (W[1:] - W[:-1])[:, 1:-1] / np.diff(tau)[:, None]
    dt_mid = 0.5 * (t[2:] - t[:-2])
    wt = (flux[1:] - flux[:-1]) / dt_mid[:, None]
    return wx + wt


def pde_residual(
    field_: ExtensionField,
    x_window: tuple[float, float] | None = None,
    t_window: tuple[float, float] | None = None,
) -> float:
    """Max |div(t^(1-2s) grad W)| over interior nodes inside the windows.

    The ``t = 0`` row and the lateral edges are always excluded.
    """
    t_levels = field_.t[1:-1]
    if t_levels.size < 3:
        raise ValueError("need at least three interior t levels")
    R = _weighted_divergence(field_)
    x = field_.x[1:-1]
    mx = np.ones(x.size, bool) if x_window is None else (x >= x_window[0]) & (x <= x_window[1])
    mt = np.ones(t_levels.size, bool)
    if t_window is not None:
        mt = (t_levels >= t_window[0]) & (t_levels <= t_window[1])
    sub = R[np.ix_(mt, mx)]
    if sub.size == 0:
        raise ValueError("empty residual window")
    return float(np.max(np.abs(sub)))


@dataclass
class NormalDerivative:
    values: GridFunction
    raw: np.ndarray = field(repr=False)
    t_used: np.ndarray = field(repr=False)
    spread: float = 0.0
    converged: bool = True


def _power_fit(t: np.ndarray, Y: np.ndarray, s: float) -> np.ndarray:
    # W(t) - W(0) ~ c1 t^(2s) + c2 t^2 + c3 t^(2+2s) + c4 t^4
    exps = [2 * s, 2.0, 2 + 2 * s, 4.0][: t.size]
    B = np.stack([t**e for e in exps], axis=1)
    return np.linalg.lstsq(B, Y, rcond=None)[0][0]


def normal_derivative(
    field_: ExtensionField,
    s: float | None = None,
    t_range: tuple[float, float] | None = None,
    grid: Grid1D | None = None,
    flag_tol: float = 5e-2,
) -> NormalDerivative:
    """Extrapolated ``-lim_{t->0} t^(1-2s) dW/dt`` per node.

    ``W(x, t) - W(x, 0)`` is fitted on the first four levels of ``t_range``
    (default: ``t >= 5h``, well above the scale where the piecewise-linear
    trace is felt) by the expansion ``c1 t^(2s) + c2 t^2 + c3 t^(2+2s) +
    c4 t^4``; the limit is ``-2s c1``.  A three-level refit gives the
    spread; ``converged`` is false when it exceeds ``flag_tol`` relative to
    the result.  Values are returned on ``grid`` (default: the field grid).
    """
    s = field_.s if s is None else s
    h = field_.xgrid.h
    lo, hi = (5.0 * h, np.inf) if t_range is None else t_range
    t = field_.t
    idx = np.nonzero((t >= lo) & (t <= hi))[0][:4]
    if idx.size < 4:
        raise ValueError("not enough t levels in the extrapolation window")
    Y = field_.W[idx] - field_.W[0]
    lim = -2.0 * s * _power_fit(t[idx], Y, s)
    alt = -2.0 * s * _power_fit(t[idx[:3]], Y[:3], s)
    scale = max(float(np.max(np.abs(lim))), 1e-300)
    spread = float(np.max(np.abs(lim - alt))) / scale
    out_grid = grid if grid is not None else field_.xgrid
    off = (field_.xgrid.n - out_grid.n) // 2
    vals = np.zeros(out_grid.n)
    vals[1:-1] = lim[off + 1 : off + out_grid.n - 1]
    return NormalDerivative(
        GridFunction(out_grid, vals), lim, t[idx], spread, bool(spread <= flag_tol)
    )


@dataclass
class BoundaryFit:
    psi_right: float
    psi_left: float
    slope_right: float
    slope_left: float
    residual: float
    window: tuple[float, float]


def frac_boundary_derivative(
    w: GridFunction,
    s: float,
    window: tuple[float, float] | None = None,
    max_residual: float = 5e-2,
    degree: int = 3,
) -> BoundaryFit:
    """Fractional normal derivatives ``psi_w(+-1) = lim w / (1 - |x|)^s``.

    Fits ``w = d^s (psi + a_1 d + ... + a_degree d^degree)`` with
    ``d = 1 - |x|`` by least squares over ``d`` in ``window`` (default
    ``[max(0.05, 4h), 0.4]``), separately at each endpoint.  Discrete
    Dirichlet solutions are least accurate in the last few cells, so the
    default window stays clear of them and uses the higher terms to carry
    the profile to ``d = 0``.
    """
    g = w.grid
    if g.domain_kind != "ball":
        raise ValueError("fractional boundary derivative needs a ball grid")
    h = g.h
    lo, hi = (max(0.05, 4.0 * h), 0.4) if window is None else window
    x = g.nodes
    d = 1.0 - np.abs(x)
    out = {}
    worst = 0.0
    for side, sel in (("right", x > 0), ("left", x < 0)):
        m = sel & (d >= lo - 1e-12) & (d <= hi + 1e-12)
        if m.sum() < degree + 3:
            raise ValueError("boundary window too small for the fit")
        dd = d[m]
        B = np.stack([dd ** (s + k) for k in range(degree + 1)], axis=1)
        coef, *_ = np.linalg.lstsq(B, w.values[m], rcond=None)
        fit = B @ coef
        scale = max(float(np.max(np.abs(w.values[m]))), 1e-300)
        worst = max(worst, float(np.sqrt(np.mean((fit - w.values[m]) ** 2))) / scale)
        psi = coef[0]
        out[side] = (psi, coef[1] / psi if psi != 0 else 0.0)
    if worst > max_residual:
        raise ValueError(f"boundary fit residual {worst:.3e} above threshold")
    return BoundaryFit(out["right"][0], out["left"][0], out["right"][1], out["left"][1], worst, (lo, hi))


def _cell_moment(u: GridFunction, g: np.ndarray) -> float:
    """``int x u' g dx`` with ``u'`` integrated exactly cell by cell.

    ``g`` is only meaningful inside the domain; its endpoint values are
    replaced by linear extrapolation from the interior.
    """
    x = u.grid.nodes
    du = np.diff(u.values)
    g = np.array(g, dtype=float)
    g[0] = 2.0 * g[1] - g[2]
    g[-1] = 2.0 * g[-2] - g[-3]
    xg = x * g
    return float(np.sum(du * 0.5 * (xg[1:] + xg[:-1])))


@dataclass
class PairingResult:
    terms: dict
    residual: float
    scale: float

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual


def pohozaev_pairing(
    u: GridFunction,
    w: GridFunction,
    fu: GridFunction,
    fw: GridFunction,
    s: float,
    op: FracOp | None = None,
    fit_window: tuple[float, float] | None = None,
) -> PairingResult:
    """Residual of the fractional integration-by-parts identity on ``B``.

    ``int x u' f_w = -int x w' f_u - 2 Gamma(1+s)^2 psi_u(1) psi_w(1) - (1-2s)[u, w]_s``
    where ``f_u``, ``f_w`` are the known values of ``(-Delta)^s u``, ``(-Delta)^s w``.
    """
    from .discretize import assemble

    lhs = _cell_moment(u, fw.values)
    t_w = -_cell_moment(w, fu.values)
    psi_u = frac_boundary_derivative(u, s, fit_window).psi_right
    psi_w = frac_boundary_derivative(w, s, fit_window).psi_right
    t_psi = -2.0 * gamma(1.0 + s) ** 2 * psi_u * psi_w
    if abs(1.0 - 2.0 * s) > 0:
        op = op if op is not None else assemble(u.grid, s)
        t_form = -(1.0 - 2.0 * s) * bilinear(op, u, w)
    else:
        t_form = 0.0
    terms = {"x_du_fw": lhs, "x_dw_fu": t_w, "boundary": t_psi, "form": t_form}
    res = abs(lhs - (t_w + t_psi + t_form))
    scale = sum(abs(v) for v in terms.values())
    return PairingResult(terms, res, scale)


@dataclass
class NodalDomain:
    label: int
    sign: int
    energy: float
    trace_measure: float
    trace_integral: float
    cells: int

    @property
    def has_trace(self) -> bool:
        return self.trace_measure > 0


@dataclass
class NodalDecomposition:
    labels: np.ndarray = field(repr=False)
    domains: list
    threshold: float

    @property
    def domain_count(self) -> int:
        return len(self.domains)


def _trapz_weights(z: np.ndarray) -> np.ndarray:
    w = np.zeros_like(z)
    dz = np.diff(z)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    return w


def embed(f: GridFunction, xgrid: Grid1D) -> np.ndarray:
    """Values of the zero-exterior ``f`` at the nodes of a wider aligned grid."""
    off = (xgrid.n - f.grid.n) // 2
    if off < 0 or abs(xgrid.h - f.grid.h) > 1e-12 * f.grid.h:
        raise ValueError("target grid must contain the source grid with equal spacing")
    out = np.zeros(xgrid.n)
    out[off : off + f.grid.n] = f.values
    return out


def nodal_decompose(
    field_: ExtensionField,
    threshold: float | None = None,
    potential=None,
) -> NodalDecomposition:
    """Label the nodal domains of ``W`` in the closed half-plane.

    Nodes with ``|W| <= threshold`` (default ``1e-8 max|W|``) form a buffer
    belonging to no domain; positive and negative nodes are labelled
    separately with 4-connectivity, the ``t = 0`` row included.  For each
    domain the weighted Dirichlet energy ``int t^(1-2s) |grad W|^2`` and,
    when ``potential`` (values on the x grid) is given, the trace integral
    ``int potential * W(x, 0)^2`` over the domain's trace set are returned.
    """
    W = field_.W
    t = field_.t
    x = field_.x
    s = field_.s
    tau = 1e-8 * float(np.max(np.abs(W))) if threshold is None else threshold
    structure = ndimage.generate_binary_structure(2, 1)
    lab_pos, npos = ndimage.label(W > tau, structure)
    lab_neg, nneg = ndimage.label(W < -tau, structure)
    labels = lab_pos + np.where(lab_neg > 0, lab_neg + npos, 0)
    # row-major first-appearance order
    order = []
    seen = set()
    for lab in labels.ravel():
        if lab and lab not in seen:
            seen.add(lab)
            order.append(lab)
    remap = np.zeros(npos + nneg + 1, dtype=int)
    for new, old in enumerate(order, start=1):
        remap[old] = new
    labels = remap[labels]

    dWt, dWx = np.gradient(W, t, x, edge_order=2)
    weight_t = np.where(t > 0, t, 0.0) ** (1.0 - 2.0 * s) if s != 0.5 else np.ones_like(t)
    dens = weight_t[:, None] * (dWx**2 + dWt**2)
    quad = _trapz_weights(t)[:, None] * _trapz_weights(x)[None, :]
    energy = ndimage.sum_labels(dens * quad, labels, index=np.arange(1, len(order) + 1))
    wx = _trapz_weights(x)
    if isinstance(potential, GridFunction):
        potential = embed(potential, field_.xgrid)
    domains = []
    for k in range(1, len(order) + 1):
        row0 = labels[0] == k
        meas = float(np.sum(wx[row0]))
        if potential is not None:
            tint = float(np.sum(wx[row0] * potential[row0] * W[0, row0] ** 2))
        else:
            tint = float("nan")
        sign = 1 if W[labels == k].flat[0] > 0 else -1
        domains.append(
            NodalDomain(k, sign, float(energy[k - 1]), meas, tint, int(np.sum(labels == k)))
        )
    return NodalDecomposition(labels, domains, tau)


def sign_changes(w: GridFunction, rel_tol: float = 1e-10) -> int:
    """Number of sign changes of ``w`` on ``(0, L)`` ignoring tiny values."""
    g = w.grid
    v = w.values[g.center + 1 : -1]
    scale = float(np.max(np.abs(w.values)))
    v = v[np.abs(v) > rel_tol * scale]
    return int(np.sum(np.sign(v[1:]) != np.sign(v[:-1])))


def corner_sign_change(field_: ExtensionField, radius: float, corner: float = 1.0) -> bool:
    """Whether ``W`` takes both signs within ``radius`` of ``(corner, 0)``."""
    X, T = np.meshgrid(field_.x, field_.t)
    near = (X - corner) ** 2 + T**2 <= radius**2
    vals = field_.W[near]
    tau = 1e-12 * float(np.max(np.abs(field_.W)))
    return bool(np.any(vals > tau) and np.any(vals < -tau))
