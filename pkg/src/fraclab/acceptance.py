"""Acceptance criteria, shared by the test suite and ``fraclab verify``.

Every criterion returns a :class:`CriterionResult` with the measured
quantities.  ``tol_scale`` multiplies every tolerance; ``tol_scale=0`` turns
each tolerance check into a strict equality and is used as a negative
control.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .continuation import bound_diagnostic, trace_branch, uniqueness_probe
from .discretize import Grid1D, GridFunction, apply, assemble
from .extension import (
    ExtensionField,
    extend,
    extension_constant,
    geometric_levels,
    nodal_decompose,
    normal_derivative,
    pde_residual,
    pohozaev_pairing,
)
from .groundstate import solve_ball, solve_line
from .picone import build_cutoff, picone_residual
from .spectrum import alignment, constrained_minimum, derivative, weight, weighted_eigs

__all__ = ["CriterionResult", "CRITERIA", "GROUPS", "run", "criterion"]


@dataclass
class CriterionResult:
    number: int
    group: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} ({self.group}): {self.title}"


CRITERIA: dict = {}
GROUPS = (
    "operator",
    "soliton",
    "spectrum",
    "picone",
    "extension",
    "pairing",
    "nodal",
    "uniqueness",
    "branch",
)


def criterion(number: int, group: str, title: str):
    def register(fn):
        CRITERIA[number] = (group, title, fn)
        return fn

    return register


# shared, cached computations ---------------------------------------------

LINE_N = 4001
LINE_L = 100.0


@lru_cache(maxsize=None)
def ball_state(s: float, lam: float, p: float, n: int = 1025):
    return solve_ball(s, lam, p, Grid1D.ball(n))


@lru_cache(maxsize=None)
def line_state(n: int = LINE_N, s: float = 0.5, p: float = 2.0):
    return solve_line(s, p, Grid1D.line(n, LINE_L))


def _torsion(grid: Grid1D) -> GridFunction:
    return GridFunction.from_callable(grid, lambda x: np.sqrt(np.clip(1.0 - x * x, 0.0, None)), "even")


def _lorentzian(grid: Grid1D) -> GridFunction:
    return GridFunction.from_callable(grid, lambda x: 1.0 / (1.0 + x * x), "even")


def _ones(grid: Grid1D) -> GridFunction:
    v = np.ones(grid.n)
    v[[0, -1]] = 0.0
    return GridFunction(grid, v, "even")


# criteria -----------------------------------------------------------------


@criterion(1, "operator", "half-Laplacian of the torsion function and of the constant")
def operator_correctness(tol_scale: float = 1.0) -> CriterionResult:
    coarse, fine = Grid1D.ball(1025), Grid1D.ball(2049)
    fc = apply(assemble(coarse, 0.5), _torsion(coarse)).values
    ff = apply(assemble(fine, 0.5), _torsion(fine)).values
    # one Richardson step for the first-order scheme, on the coarse nodes
    extrap = 2.0 * ff[::2] - fc
    m = np.abs(coarse.nodes) <= 0.9
    torsion_err = float(np.max(np.abs(extrap[m] - 1.0)))
    raw_err = float(np.max(np.abs(ff[np.abs(fine.nodes) <= 0.9] - 1.0)))
    one = apply(assemble(fine, 0.5), _ones(fine)).values[fine.center]
    const_err = abs(one / (2.0 / math.pi) - 1.0)
    ok = torsion_err <= 0.02 * tol_scale and const_err <= 0.005 * tol_scale
    return CriterionResult(
        1, "operator", "", ok,
        {"torsion_error_richardson": torsion_err, "torsion_error_raw": raw_err,
         "constant_at_0": float(one), "constant_rel_error": const_err},
    )


@criterion(2, "soliton", "line soliton matches 2/(1+x^2)")
def soliton(tol_scale: float = 1.0) -> CriterionResult:
    st = line_state()
    x = st.grid.nodes
    exact = 2.0 / (1.0 + x * x)
    m = np.abs(x) <= 10.0
    err = float(np.max(np.abs(st.u.values[m] - exact[m]) / exact[m]))
    return CriterionResult(
        2, "soliton", "", err <= 0.01 * tol_scale,
        {"max_rel_error": err, "n": st.grid.n, "L": st.grid.half_width,
         "residual": st.residual_norm},
    )


@criterion(3, "spectrum", "first weighted eigenvalue equals 1 with eigenvector u")
def first_eigenvalue(tol_scale: float = 1.0) -> CriterionResult:
    cases = [("ball", s, lam) for s in (0.25, 0.5, 0.75) for lam in (0.0, 1.0)]
    cases.append(("line", 0.5, 1.0))
    rows = []
    ok = True
    for kind, s, lam in cases:
        st = ball_state(s, lam, 2.0) if kind == "ball" else line_state()
        e1 = weighted_eigs(st.op, st, "full", 2).eigenpairs[0]
        al = alignment(e1.w.interior, st.u.interior, weight(st))
        dev = abs(e1.value - 1.0)
        ok &= dev <= 5e-3 * tol_scale and al >= 1.0 - 1e-3 * tol_scale
        rows.append({"domain": kind, "s": s, "lambda": lam, "Lambda1": e1.value, "alignment": al})
    return CriterionResult(3, "spectrum", "", bool(ok), {"cases": rows})


@criterion(4, "spectrum", "odd-sector eigenvalues exceed p on the ball")
def odd_gap(tol_scale: float = 1.0) -> CriterionResult:
    configs = [(0.5, 2.0), (0.25, 1.5), (0.75, 1.5), (0.75, 3.0)]
    rows = []
    ok = True
    for s, p in configs:
        gaps = []
        for n in (1025, 2049):
            st = ball_state(s, 0.0, p, n)
            gaps.append(weighted_eigs(st.op, st, "odd", 1).values[0] - p)
        change = abs(gaps[1] - gaps[0]) / abs(gaps[0])
        ok &= min(gaps) > 0 and change <= 0.10 * tol_scale
        rows.append({"s": s, "p": p, "gap_n1025": gaps[0], "gap_n2049": gaps[1], "rel_change": change})
    return CriterionResult(4, "spectrum", "", bool(ok), {"cases": rows})


def _line_odd(n: int):
    st = line_state(n)
    sp = weighted_eigs(st.op, st, "odd", 2)
    du = derivative(st.u)
    e = sp.eigenpairs[0]
    cm = constrained_minimum(st.op, st)
    return st, e, alignment(e.w.interior, du.interior, weight(st)), cm


@criterion(5, "spectrum", "line odd sector: translation mode at p and constrained gap")
def translation_mode(tol_scale: float = 1.0) -> CriterionResult:
    st, e, al, cm = _line_odd(LINE_N)
    _, _, _, cm_coarse = _line_odd((LINE_N + 1) // 2)
    p = st.p
    gap, gap_c = cm.value - p, cm_coarse.value - p
    change = abs(gap - gap_c) / abs(gap)
    ok = (
        abs(e.value - p) <= 5e-3 * tol_scale
        and al >= 1.0 - 1e-3 * tol_scale
        and gap > 0 and gap_c > 0
        and change <= 0.10 * tol_scale
        and cm.constraint_residual <= 1e-10 * tol_scale
    )
    return CriterionResult(
        5, "spectrum", "", bool(ok),
        {"Lambda_odd": e.value, "alignment_with_du": al, "constrained_gap": gap,
         "constrained_gap_coarse": gap_c, "rel_change": change,
         "constraint_residual": cm.constraint_residual},
    )


@criterion(6, "spectrum", "full nondegeneracy at lambda = 0")
def full_nondegeneracy(tol_scale: float = 1.0) -> CriterionResult:
    rows = []
    ok = True
    for s in (0.25, 0.5, 0.75):
        for p in (1.5, 2.0, 2.5):
            st = ball_state(s, 0.0, p)
            vals = weighted_eigs(st.op, st, "full", 6).values
            near = float(np.min(np.abs(vals - p)))
            ok &= vals[1] - p > 0 and near > 5e-3 * tol_scale
            rows.append({"s": s, "p": p, "Lambda2_minus_p": vals[1] - p, "closest_to_p": near})
    return CriterionResult(6, "spectrum", "", bool(ok), {"cases": rows})


def picone_draw(rng: np.random.Generator, grid: Grid1D, op):
    """One admissible ``(w, v, V)``: random odd ``v`` positive on ``x > 0``.

    ``V = (A v) / v`` makes ``v`` an exact discrete solution of
    ``(-Delta)^s v = V v`` wherever ``v > 0``.
    """
    x = grid.nodes
    L = grid.half_width
    a = rng.normal(size=4)
    shape = np.exp(0.3 * sum(a[k] * np.cos(k * math.pi * x / L) for k in range(4)))
    vv = x * shape * np.sqrt(np.clip(1.0 - (x / L) ** 2, 0.0, None))
    v = GridFunction(grid, vv, "odd")
    b = rng.normal(size=4)
    ww = sum(b[k] * np.sin((k + 1) * math.pi * x / L) for k in range(4))
    k = int(rng.choice([2, 4, 8]))
    w = GridFunction(grid, build_cutoff(k, grid).values * ww, "odd")
    Av = apply(op, v).values
    safe = np.where(vv != 0.0, vv, 1.0)
    V = GridFunction(grid, np.where(vv != 0.0, Av / safe, 0.0))
    return w, v, V, k


@criterion(7, "picone", "Picone identity over seeded admissible draws")
def picone_suite(tol_scale: float = 1.0, draws: int = 50, seed: int = 7) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst_rel, worst_h = 0.0, math.inf
    ok = True
    for s, grid in ((0.5, Grid1D.ball(513)), (0.25, Grid1D.ball(257)), (0.75, Grid1D.ball(257))):
        op = assemble(grid, s)
        for _ in range(draws if s == 0.5 else draws // 5):
            w, v, V, k = picone_draw(rng, grid, op)
            rep = picone_residual(w, v, V, s, op=op, cutoff_level=k)
            scale = max(abs(rep.lhs), abs(rep.rhs))
            ok &= rep.residual <= 1e-3 * tol_scale * scale
            ok &= rep.h_min >= -1e-12 * scale
            worst_rel = max(worst_rel, rep.residual / scale)
            worst_h = min(worst_h, rep.h_min)
    # proportional case: w = c v, both sides vanish
    grid = Grid1D.ball(513)
    op = assemble(grid, 0.5)
    w, v, V, _ = picone_draw(rng, grid, op)
    prop = picone_residual(GridFunction(grid, 1.7 * v.values, "odd"), v, V, 0.5, op=op)
    scale = prop.w_norm2
    ok &= max(abs(prop.lhs), abs(prop.rhs)) <= 1e-10 * tol_scale * scale
    # the line solution with its physical potential
    st = line_state()
    g = st.grid
    vline = GridFunction(g, -derivative(st.u).values, "odd")
    Vline = GridFunction(g, st.p * st.u.values ** (st.p - 1.0) - st.lam)
    x = g.nodes
    wl = build_cutoff(2, g, radius=10.0).values * np.sin(math.pi * x / 10.0) * np.exp(-x * x / 8.0)
    rl = picone_residual(GridFunction(g, wl, "odd"), vline, Vline, 0.5, op=st.op, cutoff_level=2)
    ok &= rl.residual <= 1e-3 * tol_scale * abs(rl.lhs) and rl.rhs >= 0
    return CriterionResult(
        7, "picone", "", bool(ok),
        {"worst_relative_residual": worst_rel, "min_H": worst_h,
         "proportional_lhs": prop.lhs, "proportional_rhs": prop.rhs,
         "line_relative_residual": rl.relative, "draws": draws + 2 * (draws // 5)},
    )


@lru_cache(maxsize=None)
def lorentzian_field(n: int = LINE_N):
    grid = Grid1D.line(n, LINE_L)
    v = _lorentzian(grid)
    return grid, v, extend(v, 0.5)


@criterion(8, "extension", "Poisson extension, normal derivative and weighted PDE")
def extension_stack(tol_scale: float = 1.0) -> CriterionResult:
    grid, v, F = lorentzian_field()
    X, T = np.meshgrid(F.x, F.t)
    exact = (1.0 + T) / ((1.0 + T) ** 2 + X * X)
    box = (np.abs(X) <= 5.0) & (T >= 0.1) & (T <= 5.0)
    field_err = float(np.max(np.abs(F.W - exact)[box]))

    nd_errs = {}
    traces = {
        "lorentzian": (0.5, grid, v, F, np.abs(grid.nodes) <= 3.0),
    }
    ball = Grid1D.ball(1025)
    st = ball_state(0.5, 0.0, 2.0)
    inner = np.abs(ball.nodes) <= 0.9
    for name, u in (("torsion", _torsion(ball)), ("ground_state", st.u)):
        traces[name] = (0.5, ball, u, extend(u, 0.5), inner)
    for name, (s, g, u, Fu, m) in traces.items():
        nd = normal_derivative(Fu, grid=g).values.values
        ref = extension_constant(s) * apply(assemble(g, s), u).values
        nd_errs[name] = float(np.max(np.abs(nd - ref)[m]) / np.max(np.abs(ref[m])))

    xg = Grid1D.line(201, 5.0)
    t = np.arange(1, 300) * 0.02
    closed = ExtensionField.from_function(lambda X, T: (1 + T) / ((1 + T) ** 2 + X * X), xg, t, 0.5)
    res = pde_residual(closed, (-5.0, 5.0), (0.5, 5.0))
    scale = float(np.max(np.abs(closed.W)))
    ok = (
        field_err <= 1e-3 * tol_scale
        and all(e <= 0.02 * tol_scale for e in nd_errs.values())
        and res <= 1e-2 * tol_scale * scale
    )
    return CriterionResult(
        8, "extension", "", bool(ok),
        {"field_sup_error": field_err, "normal_derivative_rel_error": nd_errs,
         "pde_residual": res, "pde_scale": scale},
    )


@criterion(9, "pairing", "fractional integration-by-parts pairing")
def pairing(tol_scale: float = 1.0) -> CriterionResult:
    g = Grid1D.ball(1025)
    tor, one = _torsion(g), _ones(g)
    st = ball_state(0.5, 0.0, 2.0)
    u = st.u
    fu = GridFunction(g, u.values**st.p, "even")
    rows = {}
    for name, (a, fa, b, fb) in {
        "torsion_torsion": (tor, one, tor, one),
        "ground_ground": (u, fu, u, fu),
        "ground_torsion": (u, fu, tor, one),
    }.items():
        r = pohozaev_pairing(a, b, fa, fb, 0.5, op=st.op)
        rows[name] = {"residual": r.residual, "scale": r.scale, "relative": r.relative}
    ok = all(r["relative"] <= 1e-2 * tol_scale for r in rows.values())
    return CriterionResult(9, "pairing", "", bool(ok), rows)


def energy_levels() -> np.ndarray:
    """Geometric levels fine enough for nodal-domain energy quadrature."""
    ratio = 0.9
    return geometric_levels(1e-4, ratio, int(math.log(1e-6) / math.log(ratio)) + 1)


@criterion(10, "nodal", "second eigenfunction has exactly two nodal domains")
def nodal(tol_scale: float = 1.0) -> CriterionResult:
    st = ball_state(0.5, 0.5, 2.0)
    e2 = weighted_eigs(st.op, st, "full", 2).eigenpairs[1]
    F = extend(e2.w, 0.5, tgrid=energy_levels())
    pot = np.zeros(st.grid.n)
    pot[1:-1] = e2.value * st.u.interior ** (st.p - 1.0) - st.lam
    nd = nodal_decompose(F, potential=GridFunction(st.grid, pot))
    kap = extension_constant(0.5)
    errs = [abs(d.energy - kap * d.trace_integral) / abs(d.energy) for d in nd.domains]
    ok = (
        nd.domain_count == 2
        and all(d.has_trace for d in nd.domains)
        and max(errs) <= 0.05 * tol_scale
    )
    return CriterionResult(
        10, "nodal", "", bool(ok),
        {"domains": nd.domain_count, "Lambda": e2.value, "sector": e2.sector,
         "energy_identity_rel_error": errs,
         "trace_measures": [d.trace_measure for d in nd.domains]},
    )


@criterion(11, "uniqueness", "20-start multistart finds one solution")
def uniqueness(tol_scale: float = 1.0) -> CriterionResult:
    counts = {}
    for s, p in ((0.5, 2.0), (0.25, 2.5)):
        for n in (513, 1025):
            counts[f"s={s},p={p},n={n}"] = uniqueness_probe(s, 0.0, p, Grid1D.ball(n), 20, seed=11)
    return CriterionResult(11, "uniqueness", "", all(c == 1 for c in counts.values()), counts)


@criterion(12, "branch", "branch sweep in p with nondegeneracy and bounds")
def branch(tol_scale: float = 1.0) -> CriterionResult:
    rows = {}
    ok = True
    for lam in (0.0, 1.0):
        b = trace_branch(0.5, lam, 1.2, 4.0, Grid1D.ball(1025))
        rep = bound_diagnostic(b)
        margin = min(pt.margin for pt in b.points)
        l1 = max(abs(pt.lambda1 - 1.0) for pt in b.points)
        this = (
            b.complete
            and b.points[-1].p == 4.0
            and margin > 0
            and l1 <= 5e-3 * tol_scale
            and rep.bounded
            and rep.lower_bound_ok
        )
        ok &= this
        rows[f"lambda={lam}"] = {
            "passed": bool(this), "points": len(b.points), "complete": b.complete,
            "min_margin": margin, "max_Lambda1_dev": l1,
            "blowup_ratio": rep.blowup_ratio, "bounded": rep.bounded,
            "lower_bound_ok": rep.lower_bound_ok,
            "sup_norm_range": [float(rep.sup_norms.min()), float(rep.sup_norms.max())],
        }
    return CriterionResult(12, "branch", "", bool(ok), rows)


def run(only=None, tol_scale: float = 1.0, echo=None) -> list:
    """Run the criteria, optionally restricted to groups or numbers."""
    selected = []
    for number in sorted(CRITERIA):
        group, title, fn = CRITERIA[number]
        if only and group not in only and str(number) not in only:
            continue
        selected.append((number, group, title, fn))
    results = []
    for number, group, title, fn in selected:
        t0 = time.perf_counter()
        res = fn(tol_scale=tol_scale)
        res.title = title
        res.seconds = time.perf_counter() - t0
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
