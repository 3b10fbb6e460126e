"""Positive solutions of ``(-Delta)^s u + lam u = u^p`` on the ball or line.

Unknowns are folded to the even sector, so every returned solution is
exactly symmetric.  Newton's method is globalized by Armijo backtracking on
the squared residual.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .discretize import FracOp, Grid1D, GridFunction, ParityFold, assemble

__all__ = [
    "SolverOptions",
    "GroundState",
    "NonconvergenceError",
    "DomainError",
    "solve_ball",
    "solve_line",
    "solve",
    "residual",
    "multistart",
]

log = logging.getLogger(__name__)

LAMBDA_MARGIN = 1e-6


class DomainError(ValueError):
    """Parameters outside the admissible range."""


class NonconvergenceError(RuntimeError):
    """Newton failed; ``last_iterate`` holds the final (interior) iterate."""

    def __init__(self, msg: str, last_iterate: np.ndarray | None = None, iters: int = 0):
        super().__init__(msg)
        self.last_iterate = last_iterate
        self.iters = iters


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 60
    armijo: float = 1e-4
    min_step: float = 1e-8
    line_lambda: float = 1.0
    check_truncation: bool = False
    truncation_tol: float = 1e-3
    globalize: bool = True


@dataclass
class GroundState:
    u: GridFunction
    s: float
    lam: float
    p: float
    domain_kind: str
    residual_norm: float
    op: FracOp = field(repr=False)
    psi_boundary: float | None = None
    newton_iters: int = 0
    tol: float = 1e-9
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid1D:
        return self.u.grid

    @property
    def amplitude(self) -> float:
        return float(self.u.values[self.grid.center])


def _power(u: np.ndarray, p: float) -> np.ndarray:
    return np.maximum(u, 0.0) ** p


def check_exponent(s: float, p: float) -> None:
    from .continuation import critical_exponent

    pc = critical_exponent(s)
    if not 1.0 < p < pc:
        raise DomainError(f"exponent p={p} outside the subcritical range (1, {pc})")


def residual(state: GroundState) -> float:
    """Max-norm of ``(-Delta)^s u + lam u - u^p`` over interior nodes."""
    u = state.u.interior
    r = state.op.A @ u + state.lam * u - _power(u, state.p)
    return float(np.max(np.abs(r)))


def _newton(op: FracOp, lam: float, p: float, v0: np.ndarray, opts: SolverOptions):
    """Damped Newton on the even half-grid. Returns (v, iterations)."""
    fold = ParityFold(op.size, "even")
    S = fold.restrict(op.A)

    def F(v):
        return S @ v + lam * v - _power(v, p)

    v = np.array(v0, dtype=float)
    r = F(v)
    phi = float(r @ r)
    for it in range(1, opts.max_iter + 1):
        if np.max(np.abs(r)) <= 0.1 * opts.tol:
            return v, it - 1
        J = S + np.diag(lam - p * _power(v, p - 1.0))
        try:
            dv = lu_solve(lu_factor(J, check_finite=False), -r, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NonconvergenceError(f"singular Newton system: {exc}", fold.expand(v), it)
        alpha = 1.0
        while True:
            trial = v + alpha * dv
            # positive part only inside the trial evaluation
            rt = S @ trial + lam * trial - _power(trial, p)
            phit = float(rt @ rt)
            if phit <= (1.0 - 2.0 * opts.armijo * alpha) * phi or phit == 0.0:
                break
            alpha *= 0.5
            if alpha < opts.min_step:
                if np.max(np.abs(r)) <= opts.tol:
                    return v, it - 1
                raise NonconvergenceError("line search stalled", fold.expand(v), it)
        v, r, phi = trial, rt, phit
    if np.max(np.abs(r)) <= opts.tol:
        return v, opts.max_iter
    raise NonconvergenceError(
        f"no convergence after {opts.max_iter} iterations "
        f"(residual {np.max(np.abs(r)):.3e})",
        fold.expand(v),
        opts.max_iter,
    )


def petviashvili(
    op: FracOp, lam: float, p: float, v0: np.ndarray, tol: float = 1e-6, max_iter: int = 500
) -> np.ndarray:
    """Stabilized fixed-point iteration ``v <- S^gamma M^{-1} v^p`` on the even half-grid.

    ``M = (-Delta)^s + lam`` and ``S = <v, M v> / <v, v^p>`` with
    ``gamma = p / (p - 1)``.  Converges from positive data to the ground
    state for power nonlinearities; used to reach the Newton basin.
    """
    fold = ParityFold(op.size, "even")
    mult = fold.multiplicity
    K = fold.galerkin(op.A) + lam * np.diag(mult)
    lu = lu_factor(K, check_finite=False)
    gam = p / (p - 1.0)
    v = np.maximum(np.asarray(v0, dtype=float), 0.0)
    for _ in range(max_iter):
        vp = _power(v, p)
        S = float(v @ (K @ v)) / float(mult @ (v * vp))
        nxt = S**gam * lu_solve(lu, mult * vp, check_finite=False)
        done = np.max(np.abs(nxt - v)) <= tol * np.max(np.abs(nxt))
        v = nxt
        if done:
            break
    return v


def _newton_globalized(op, lam, p, v0, opts):
    if not opts.globalize:
        return _newton(op, lam, p, v0, opts)
    try:
        return _newton(op, lam, p, v0, opts)
    except NonconvergenceError as first:
        log.info("Newton from the initial guess failed (%s); pre-iterating", first)
        v1 = petviashvili(op, lam, p, v0)
        v, iters = _newton(op, lam, p, v1, opts)
        return v, iters + first.iters


def _finish(op, lam, p, v, iters, opts, kind) -> GroundState:
    fold = ParityFold(op.size, "even")
    full = np.zeros(op.grid.n)
    full[1:-1] = fold.expand(v)
    if np.any(full[1:-1] <= 0.0):
        raise NonconvergenceError("converged iterate is not strictly positive", full[1:-1], iters)
    # positive solutions have max(u)^(p-1) >= lambda1 + min(lam, 0) (ball) or lam (line)
    floor = op.lambda1 + min(lam, 0.0) if kind == "ball" else lam
    if np.max(full) ** (p - 1.0) < 0.5 * floor:
        raise NonconvergenceError("converged to the trivial solution", full[1:-1], iters)
    u = GridFunction(op.grid, full, "even")
    state = GroundState(
        u=u, s=op.s, lam=float(lam), p=float(p), domain_kind=kind,
        residual_norm=0.0, op=op, newton_iters=iters, tol=opts.tol,
    )
    state.residual_norm = residual(state)
    if state.residual_norm > opts.tol:
        raise NonconvergenceError(
            f"residual {state.residual_norm:.3e} above tolerance", full[1:-1], iters
        )
    return state


def ball_guess(op: FracOp, lam: float, p: float) -> np.ndarray:
    """One-mode Galerkin guess ``alpha e1``.

    Testing the equation against ``e1`` gives
    ``alpha^(p-1) = (lambda1 + lam) <e1, e1> / <e1^p, e1>``.
    """
    e1 = op.first_eigenfunction
    ratio = np.dot(e1, e1) / np.dot(e1**p, e1)
    alpha = ((op.lambda1 + lam) * ratio) ** (1.0 / (p - 1.0))
    return alpha * e1


def line_guess(grid: Grid1D, s: float, lam: float, p: float) -> np.ndarray:
    """Localized algebraically decaying bump, amplitude from the local ODE."""
    x = grid.nodes[1:-1]
    amp = (lam * (p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    width = lam ** (-1.0 / (2.0 * s))
    return amp * (1.0 + (x / width) ** 2) ** (-(1.0 + 2.0 * s) / 2.0)


def solve_ball(
    s: float,
    lam: float,
    p: float,
    grid: Grid1D,
    opts: SolverOptions | None = None,
    op: FracOp | None = None,
    guess: np.ndarray | None = None,
) -> GroundState:
    """Positive solution of the Dirichlet problem on ``B = (-1, 1)``."""
    from .extension import frac_boundary_derivative

    opts = opts or SolverOptions()
    if grid.domain_kind != "ball":
        raise DomainError("solve_ball needs a ball grid")
    check_exponent(s, p)
    op = op if op is not None else assemble(grid, s)
    if lam <= -op.lambda1 + LAMBDA_MARGIN:
        raise DomainError(f"lam={lam} must exceed -lambda1(B) = {-op.lambda1:.6f}")
    u0 = ball_guess(op, lam, p) if guess is None else np.asarray(guess, dtype=float)
    fold = ParityFold(op.size, "even")
    v, iters = _newton_globalized(op, lam, p, fold.reduce(u0), opts)
    state = _finish(op, lam, p, v, iters, opts, "ball")
    try:
        fit = frac_boundary_derivative(state.u, s)
        state.psi_boundary = float(fit.psi_right)
        state.diagnostics["psi_fit_residual"] = fit.residual
    except ValueError as exc:
        state.diagnostics["psi_error"] = str(exc)
    return state


def _decay_diagnostic(state: GroundState) -> dict:
    g = state.grid
    x = g.nodes
    u = state.u.values
    L = g.half_width
    i_far = int(np.argmin(np.abs(x - 0.8 * L)))
    i_mid = int(np.argmin(np.abs(x - 0.4 * L)))
    ratio = u[i_far] / u[i_mid]
    expected = (x[i_mid] / x[i_far]) ** (1.0 + 2.0 * state.s)
    return {
        "decay_ratio": float(ratio),
        "decay_expected": float(expected),
        "decay_ok": bool(abs(ratio / expected - 1.0) <= 0.2),
    }


def solve_line(
    s: float,
    p: float,
    grid: Grid1D,
    opts: SolverOptions | None = None,
    op: FracOp | None = None,
    guess: np.ndarray | None = None,
) -> GroundState:
    """Even decaying solution of ``(-Delta)^s u + lam u = u^p`` on the truncated line.

    ``lam`` is taken from ``opts.line_lambda`` (default 1).
    """
    opts = opts or SolverOptions()
    if grid.domain_kind != "line":
        raise DomainError("solve_line needs a line grid")
    check_exponent(s, p)
    lam = opts.line_lambda
    if lam <= 0:
        raise DomainError("the line problem needs lam > 0")
    op = op if op is not None else assemble(grid, s)
    u0 = line_guess(grid, s, lam, p) if guess is None else np.asarray(guess, dtype=float)
    fold = ParityFold(op.size, "even")
    v, iters = _newton_globalized(op, lam, p, fold.reduce(u0), opts)
    state = _finish(op, lam, p, v, iters, opts, "line")
    if state.amplitude <= 0:
        raise NonconvergenceError("trivial solution", state.u.interior, iters)
    state.diagnostics.update(_decay_diagnostic(state))
    if opts.check_truncation:
        wide = Grid1D.line(2 * grid.n - 1, 2.0 * grid.half_width)
        big = solve_line(s, p, wide, replace(opts, check_truncation=False))
        shift = abs(big.amplitude - state.amplitude)
        state.diagnostics["truncation_shift"] = shift
        state.diagnostics["truncation_dominated"] = bool(shift > opts.truncation_tol)
    return state


def solve(s, lam, p, grid, opts=None, op=None, guess=None) -> GroundState:
    """Dispatch on ``grid.domain_kind``."""
    if grid.domain_kind == "ball":
        return solve_ball(s, lam, p, grid, opts, op=op, guess=guess)
    opts = replace(opts or SolverOptions(), line_lambda=lam)
    return solve_line(s, p, grid, opts, op=op, guess=guess)


def _random_even_factor(rng: np.random.Generator, x: np.ndarray, L: float) -> np.ndarray:
    modes = 6
    coef = rng.normal(size=modes) / np.arange(1, modes + 1)
    k = np.arange(modes)[:, None]
    g = (coef[:, None] * np.cos(k * math.pi * x[None, :] / (2.0 * L))).sum(axis=0)
    return np.exp(0.5 * g)


def multistart(
    s: float,
    lam: float,
    p: float,
    grid: Grid1D,
    n_starts: int,
    seed: int = 0,
    opts: SolverOptions | None = None,
    dedup_tol: float = 1e-6,
) -> list[GroundState]:
    """Newton from randomized positive guesses; distinct solutions only.

    Guesses are the default guess times a random amplitude in ``[0.3, 3]``
    and a random smooth even positive factor.  Starts that fail to converge
    are dropped and counted in the log.
    """
    if n_starts <= 0:
        return []
    opts = opts or SolverOptions()
    op = assemble(grid, s)
    rng = np.random.default_rng(seed)
    x = grid.nodes[1:-1]
    if grid.domain_kind == "ball":
        base = ball_guess(op, lam, p)
    else:
        base = line_guess(grid, s, lam, p)
    found: list[GroundState] = []
    failed = 0
    for _ in range(n_starts):
        scale = math.exp(rng.uniform(math.log(0.3), math.log(3.0)))
        u0 = scale * base * _random_even_factor(rng, x, grid.half_width)
        try:
            st = solve(s, lam, p, grid, opts, op=op, guess=u0)
        except NonconvergenceError:
            failed += 1
            continue
        if all(
            math.sqrt(op.inner(st.u.interior - o.u.interior, st.u.interior - o.u.interior))
            > dedup_tol
            for o in found
        ):
            found.append(st)
    if failed:
        log.info("multistart: %d of %d starts did not converge", failed, n_starts)
    return found
