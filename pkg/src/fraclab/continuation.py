"""Continuation of positive solution branches in the exponent ``p``.

Branches are swept with a secant predictor and a plain Newton corrector.
At every accepted point the weighted spectrum is recomputed so that the
nondegeneracy margin ``min_k |Lambda_k - p|`` is monitored along the way.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .discretize import Grid1D, _check_order, assemble, bilinear
from .groundstate import (
    DomainError,
    GroundState,
    NonconvergenceError,
    SolverOptions,
    multistart,
    solve,
)
from .spectrum import weighted_eigs

__all__ = [
    "BranchPoint",
    "Branch",
    "BranchOptions",
    "BoundReport",
    "critical_exponent",
    "sobolev_constant",
    "trace_branch",
    "uniqueness_probe",
    "bound_diagnostic",
]

log = logging.getLogger(__name__)


def critical_exponent(s: float) -> float:
    """Supremal admissible ``p`` in one dimension: ``2*_s - 1``."""
    s = _check_order(s)
    if 2.0 * s >= 1.0:
        return math.inf
    return 2.0 / (1.0 - 2.0 * s) - 1.0


def sobolev_constant(s: float) -> float:
    """Sharp ``S`` in ``[u]_s^2 >= S |u|_{2*_s}^2`` on the line, ``s < 1/2``."""
    s = _check_order(s)
    if s >= 0.5:
        raise DomainError("the Sobolev embedding constant needs s < 1/2")
    return (2.0 * math.pi) ** (2 * s) * math.gamma(0.5 + s) / math.gamma(0.5 - s)


@dataclass
class BranchPoint:
    p: float
    state: GroundState = field(repr=False)
    lambda1: float
    lambda2: float
    odd_gap: float
    even_gap: float
    margin: float
    jacobian_cond: float

    @property
    def amplitude(self) -> float:
        return self.state.amplitude


@dataclass
class BranchOptions:
    dp_init: float = 0.05
    dp_min: float = 1e-4
    dp_max: float = 0.2
    fast_iters: int = 3
    max_corrector: int = 8
    bifurcation_tol: float = 1e-4
    k: int = 4
    p_cap: float = 5.0
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class Branch:
    points: list
    s: float
    lam: float
    domain_kind: str
    stats: dict = field(default_factory=dict)
    bifurcation: bool = False
    failure: dict | None = None

    @property
    def p_values(self) -> np.ndarray:
        return np.array([pt.p for pt in self.points])

    @property
    def complete(self) -> bool:
        return self.failure is None and not self.bifurcation

    def continuity_ratios(self) -> np.ndarray:
        """Successive ratios of ``|u_{i+1} - u_i|_inf / (p_{i+1} - p_i)``."""
        rates = []
        for a, b in zip(self.points[:-1], self.points[1:]):
            du = np.max(np.abs(b.state.u.values - a.state.u.values))
            rates.append(du / (b.p - a.p))
        rates = np.array(rates)
        if rates.size < 2:
            return np.ones(0)
        return np.maximum(rates[1:], rates[:-1]) / np.minimum(rates[1:], rates[:-1])

    def to_rows(self):
        for pt in self.points:
            psi = pt.state.psi_boundary
            yield (
                pt.p,
                pt.amplitude,
                float("nan") if psi is None else psi,
                pt.lambda1,
                pt.lambda2,
                pt.odd_gap,
                pt.even_gap,
            )


def _measure(state: GroundState, k: int, jac: bool = True) -> BranchPoint:
    op, p = state.op, state.p
    even = weighted_eigs(op, state, "even", k).values
    odd = weighted_eigs(op, state, "odd", k).values
    merged = np.sort(np.concatenate([even, odd]))
    if state.domain_kind == "line":
        # the odd translation mode sits at Lambda = p by construction
        margin_vals = np.concatenate([even, odd[1:]])
    else:
        margin_vals = merged
    cond = float("nan")
    if jac:
        from .discretize import ParityFold

        fold = ParityFold(op.size, "even")
        u = fold.reduce(state.u.interior)
        J = fold.galerkin(op.A) + np.diag(fold.multiplicity * (state.lam - p * u ** (p - 1)))
        cond = float(np.linalg.cond(J))
    return BranchPoint(
        p=p,
        state=state,
        lambda1=float(merged[0]),
        lambda2=float(merged[1]),
        odd_gap=float(odd[0] - p),
        even_gap=float(even[1] - p),
        margin=float(np.min(np.abs(margin_vals - p))),
        jacobian_cond=cond,
    )


def trace_branch(
    s: float,
    lam: float,
    p_start: float,
    p_end: float | None,
    grid: Grid1D,
    opts: BranchOptions | None = None,
) -> Branch:
    """Follow the positive solution from ``p_start`` to ``p_end``.

    Secant predictor in ``p``, Newton corrector limited to
    ``opts.max_corrector`` steps.  A failed corrector halves the step; three
    consecutive fast corrections double it.  The sweep stops with
    ``bifurcation`` set when some weighted eigenvalue comes within
    ``opts.bifurcation_tol`` of ``p``, and with ``failure`` set when the
    step falls below ``opts.dp_min``.
    """
    opts = opts or BranchOptions()
    pc = critical_exponent(s)
    if p_end is None:
        p_end = min(opts.p_cap, pc) if math.isinf(pc) else pc - 1e-3
    if not 1.0 < p_start <= p_end:
        raise DomainError("need 1 < p_start <= p_end")
    if p_end >= pc:
        raise DomainError(f"p_end={p_end} not below the critical exponent {pc}")
    op = assemble(grid, s)
    corr = replace(opts.solver, max_iter=opts.max_corrector, globalize=False)
    first = solve(s, lam, p_start, grid, opts.solver, op=op)
    branch = Branch([], s, lam, grid.domain_kind)
    stats = {"accepted": 0, "rejected": 0, "min_step": math.inf, "max_step": 0.0}
    branch.stats = stats

    def accept(state):
        pt = _measure(state, opts.k)
        branch.points.append(pt)
        stats["accepted"] += 1
        if pt.margin < opts.bifurcation_tol:
            branch.bifurcation = True
            log.warning("near-singular linearization at p=%.6g (margin %.3e)", pt.p, pt.margin)
        return pt

    accept(first)
    dp = min(opts.dp_init, opts.dp_max)
    fast = 0
    while branch.points[-1].p < p_end and not branch.bifurcation:
        cur = branch.points[-1]
        step = min(dp, p_end - cur.p)
        p_new = p_end if p_end - cur.p - step < 1e-12 else cur.p + step
        u_cur = cur.state.u.interior
        if len(branch.points) >= 2:
            prev = branch.points[-2]
            slope = (u_cur - prev.state.u.interior) / (cur.p - prev.p)
            guess = u_cur + slope * (p_new - cur.p)
        else:
            guess = u_cur
        try:
            state = solve(s, lam, p_new, grid, corr, op=op, guess=guess)
        except NonconvergenceError as exc:
            stats["rejected"] += 1
            fast = 0
            dp = step / 2.0
            if dp < opts.dp_min:
                branch.failure = {"p": p_new, "reason": str(exc)}
                break
            continue
        stats["min_step"] = min(stats["min_step"], p_new - cur.p)
        stats["max_step"] = max(stats["max_step"], p_new - cur.p)
        accept(state)
        fast = fast + 1 if state.newton_iters <= opts.fast_iters else 0
        if fast >= 3:
            dp = min(2.0 * dp, opts.dp_max)
            fast = 0
    return branch


def uniqueness_probe(
    s: float,
    lam: float,
    p: float,
    grid: Grid1D,
    n_starts: int,
    seed: int = 0,
    opts: SolverOptions | None = None,
) -> int:
    """Number of distinct solutions found by seeded multistart Newton."""
    if n_starts <= 0:
        return 0
    return len(multistart(s, lam, p, grid, n_starts, seed=seed, opts=opts))


@dataclass
class BoundReport:
    bounded: bool
    lower_bound_ok: bool
    sup_norms: np.ndarray = field(repr=False)
    blowup_ratio: float
    lower_bound_kind: str
    lower_bound_slack: np.ndarray = field(repr=False)
    rescaled_peaks: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.bounded and self.lower_bound_ok


def _lower_bound_slack(pt: BranchPoint) -> tuple[str, float]:
    st = pt.state
    op = st.op
    u = st.u
    lam, p, s = st.lam, st.p, st.s
    l1 = op.lambda1
    coerc = min(1.0, 1.0 + lam / l1)
    form = bilinear(op, u, u)
    ui = u.interior
    if s < 0.5:
        q = 2.0 / (1.0 - 2.0 * s)
        lhs = op.inner(ui**q, np.ones_like(ui)) ** ((p - 1.0) / q)
        rhs = coerc * sobolev_constant(s) * 2.0 ** (-1.0 + (p + 1.0) / q)
        return "sobolev", lhs / rhs - 1.0
    # Poincare + energy: coerc [u]^2 <= [u]^2 + lam |u|^2 = int u^(p+1)
    energy = form + lam * op.inner(ui, ui)
    top = op.inner(ui ** (p + 1.0), np.ones_like(ui))
    # the right inequality is an equality for solutions: allow round-off
    chain = min(energy - coerc * form, top - energy) / abs(top) + 1e-8
    # and consequently |u|_inf^(p-1) >= coerc * lambda1
    peak = st.amplitude ** (p - 1.0) / (coerc * l1) - 1.0
    return "energy", min(chain, peak)


def bound_diagnostic(branch: Branch, blowup_limit: float = 10.0) -> BoundReport:
    """Uniform sup bound and the lower integral bound along a branch."""
    if not branch.points:
        raise ValueError("empty branch")
    sup = np.array([pt.amplitude for pt in branch.points])
    ratio = float(sup.max() / np.median(sup))
    kinds, slack = zip(*(_lower_bound_slack(pt) for pt in branch.points))
    slack = np.array(slack)
    peaks = []
    for pt in branch.points:
        b = pt.amplitude
        # v(x) = u(x / b^((p-1)/2s)) / b evaluated at x = 0
        peaks.append(pt.state.u.values[pt.state.grid.center] / b)
    return BoundReport(
        bounded=ratio <= blowup_limit,
        lower_bound_ok=bool(np.all(slack >= 0)),
        sup_norms=sup,
        blowup_ratio=ratio,
        lower_bound_kind=kinds[0],
        lower_bound_slack=slack,
        rescaled_peaks=np.array(peaks),
    )
