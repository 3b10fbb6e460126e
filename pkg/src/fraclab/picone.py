"""Picone-type identity for odd functions on the line.

For odd ``v`` positive on ``x > 0`` with ``(-Delta)^s v = V v`` and odd
``w`` with ``w / v`` bounded,

    [w]^2 - int V w^2 = int_{x>0} int_{y>0} H(x, y) dx dy,
    H = c_s v(x) v(y) (w/v(x) - w/v(y))^2 (|x-y|^(-1-2s) - (x+y)^(-1-2s)) >= 0.

On the grid the right side is evaluated as a direct double sum over the
positive half-grid using the pair weights of the assembled operator, so both
sides share one discretization of the singular kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretize import FracOp, Grid1D, GridFunction, _check_order, assemble, bilinear

__all__ = [
    "PiconeReport",
    "PiconeHypothesisError",
    "kernel_gap",
    "smoothstep",
    "build_cutoff",
    "pair_identity",
    "discrete_h",
    "picone_residual",
]


class PiconeHypothesisError(ValueError):
    """An input violates a hypothesis of the identity."""


@dataclass
class PiconeReport:
    lhs: float
    rhs: float
    residual: float
    h_min: float
    cutoff_level: int | None
    w_norm2: float
    H: np.ndarray | None = field(default=None, repr=False)

    @property
    def relative(self) -> float:
        return self.residual / max(abs(self.lhs), abs(self.rhs), 1e-300)

    def within(self, rtol: float = 1e-3, atol_norm: float = 1e-6) -> bool:
        return self.residual <= max(rtol * abs(self.lhs), atol_norm * self.w_norm2)


def kernel_gap(x, y, s: float):
    """``|x-y|^(-1-2s) - (x+y)^(-1-2s)`` for ``x, y > 0``, ``x != y``."""
    s = _check_order(s)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("kernel_gap needs x, y > 0")
    if np.any(x == y):
        raise ValueError("kernel_gap is singular at x = y")
    e = -1.0 - 2.0 * s
    out = np.abs(x - y) ** e - (x + y) ** e
    return float(out) if out.ndim == 0 else out


def smoothstep(z):
    """Cubic ``3z^2 - 2z^3`` clamped to ``[0, 1]``."""
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    return z * z * (3.0 - 2.0 * z)


def build_cutoff(k: int, grid: Grid1D, radius: float | None = None) -> GridFunction:
    """``zeta_k(x) = 1 - chi(k (1 - |x|/R))`` with a smoothstep plateau profile.

    ``chi = 1`` on ``[-1, 1]``, ``chi = 0`` outside ``(-2, 2)``; so ``zeta_k``
    vanishes where ``k(1 - |x|/R) <= 1`` and equals 1 where it is ``>= 2``.
    ``R`` defaults to the grid half-width (1 on the ball).
    """
    if k < 1:
        raise ValueError("cutoff level k must be at least 1")
    R = grid.half_width if radius is None else radius
    z = k * (1.0 - np.abs(grid.nodes) / R)
    return GridFunction(grid, smoothstep(z - 1.0), "even")


def pair_identity(wx, wy, vx, vy):
    """Both sides of the pointwise identity behind the Picone formula.

    Returns ``(left, right)`` with
    ``left = (wx-wy)^2 - wx^2 (vx-vy)/vx + wy^2 (vx-vy)/vy`` and
    ``right = vx vy (wx/vx - wy/vy)^2``.
    """
    wx, wy, vx, vy = (np.asarray(a, dtype=float) for a in (wx, wy, vx, vy))
    left = (wx - wy) ** 2 - wx**2 * (vx - vy) / vx + wy**2 * (vx - vy) / vy
    right = vx * vy * (wx / vx - wy / vy) ** 2
    return left, right


def _is_odd(f: GridFunction) -> bool:
    if f.parity == "odd":
        return True
    return f.detect_parity() == "odd"


def _check_hypotheses(w: GridFunction, v: GridFunction, ratio_bound: float) -> np.ndarray:
    if not _is_odd(w):
        raise PiconeHypothesisError("w must be odd (antisymmetric under x -> -x)")
    if not _is_odd(v):
        raise PiconeHypothesisError("v must be odd (antisymmetric under x -> -x)")
    g = w.grid
    right = slice(g.center + 1, g.n)
    wr, vr = w.values[right], v.values[right]
    supp = wr != 0.0
    if np.any(vr[supp] <= 0.0):
        raise PiconeHypothesisError("v must be positive for x > 0 on the support of w")
    ratio = np.zeros_like(wr)
    ratio[supp] = wr[supp] / vr[supp]
    if np.max(np.abs(ratio), initial=0.0) > ratio_bound:
        raise PiconeHypothesisError(
            f"w/v exceeds the bound {ratio_bound:g}; w/v is not continuous"
        )
    return ratio


def discrete_h(op: FracOp, w: GridFunction, v: GridFunction, ratio: np.ndarray) -> np.ndarray:
    """Discrete ``H`` on the positive half-grid (interior nodes ``x > 0``).

    Pair weights are the off-diagonal entries of the assembled operator,
    divided by ``h`` so that ``h^2 sum H`` approximates the double integral.
    """
    g = op.grid
    col = op.A[0]
    m_half = (op.size - 1) // 2
    idx = np.arange(1, m_half + 1)
    vr = v.values[g.center + 1 : g.center + 1 + m_half]
    r = ratio[:m_half]
    I, J = np.meshgrid(idx, idx, indexing="ij")
    gap = (-col[np.abs(I - J)] + col[I + J]) / g.h
    np.fill_diagonal(gap, 0.0)
    return gap * np.outer(vr, vr) * (r[:, None] - r[None, :]) ** 2


def picone_residual(
    w: GridFunction,
    v: GridFunction,
    Vpot: GridFunction,
    s: float,
    grid: Grid1D | None = None,
    op: FracOp | None = None,
    cutoff_level: int | None = None,
    ratio_bound: float = 1e6,
    keep_h: bool = False,
) -> PiconeReport:
    """Evaluate both sides of the Picone identity on the grid.

    The left side is ``[w]^2 - int V w^2`` from the bilinear form; the right
    side is ``h^2 sum_{x_i, y_j > 0} H_ij``.  ``w`` should already carry any
    cutoff (``cutoff_level`` is only recorded).
    """
    grid = grid if grid is not None else w.grid
    if w.grid != grid or v.grid != grid or Vpot.grid != grid:
        raise ValueError("w, v and V must live on the same grid")
    ratio = _check_hypotheses(w, v, ratio_bound)
    op = op if op is not None else assemble(grid, s)
    h = grid.h
    wi = w.interior
    lhs = bilinear(op, w, w) - h * float(np.dot(Vpot.interior * wi, wi))
    H = discrete_h(op, w, v, ratio)
    rhs = h * h * float(H.sum())
    hmin = float(H.min()) if H.size else 0.0
    return PiconeReport(
        lhs=lhs,
        rhs=rhs,
        residual=abs(lhs - rhs),
        h_min=hmin,
        cutoff_level=cutoff_level,
        w_norm2=h * float(np.dot(wi, wi)),
        H=H if keep_h else None,
    )
