"""Command-line entry point: ``fraclab <command> [flags]``.

Every command writes a CSV (with a ``# fraclab ...`` header line), a JSON
summary and, unless ``--no-plot`` is given, a figure into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .groundstate import DomainError, NonconvergenceError

log = logging.getLogger("fraclab")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_VERIFY = 0, 1, 2, 3

COMMANDS = ("solve", "spectrum", "picone", "extend", "branch", "verify")

# defaults per command; these are also the only accepted config keys
DEFAULTS = {
    "solve": {"domain": "ball", "s": 0.5, "lambda": 0.0, "p": 2.0, "n": 1025, "L": 50.0, "tol": 1e-9},
    "spectrum": {
        "domain": "ball", "s": 0.5, "lambda": 0.0, "p": 2.0, "n": 513, "L": 50.0,
        "sector": "full", "k": 4,
    },
    "picone": {"s": 0.5, "n": 513, "seed": 0, "cutoff": 4},
    "extend": {"trace": "lorentzian", "s": 0.5, "n": 2001, "L": 50.0, "p": 2.0, "t_max": 5.0, "levels": 100},
    "branch": {
        "domain": "ball", "s": 0.5, "lambda": 0.0, "n": 257, "L": 50.0,
        "p_start": 1.2, "p_end": 4.0, "dp": 0.05,
    },
    "verify": {"only": [], "tol_scale": 1.0},
}

CHOICES = {
    "domain": ("ball", "line"),
    "sector": ("even", "odd", "full"),
    "trace": ("lorentzian", "torsion", "groundstate"),
}


class ConfigError(ValueError):
    """Bad command-line or config-file input."""


@dataclass
class RunConfig:
    command: str
    params: dict
    out: Path = Path("fraclab-out")
    formats: tuple = ("csv", "json")
    plot: bool = True
    extra: dict = field(default_factory=dict)


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fraclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", type=Path, help="JSON file of parameters; flags override it")
        sp.add_argument("--out", type=Path, help="output directory (default fraclab-out)")
        sp.add_argument("--format", choices=("csv", "json", "both"), help="which tables to write")
        sp.add_argument("--no-plot", action="store_true", help="skip figures")
        for key, default in DEFAULTS[cmd].items():
            if key == "only":
                sp.add_argument("--only", action="append", help="criterion group or number; repeatable")
            elif key in CHOICES:
                sp.add_argument(_flag(key), dest=key, choices=CHOICES[key])
            else:
                sp.add_argument(_flag(key), dest=key, type=type(default))
    return parser


def load_config(ns: argparse.Namespace) -> RunConfig:
    """Merge defaults, the optional JSON file and explicit flags, then validate."""
    cmd = ns.command
    given = vars(ns).copy()
    given.pop("command")
    cfg_path = given.pop("config", None)
    out = given.pop("out", Path("fraclab-out"))
    fmt = given.pop("format", "both")
    plot = not given.pop("no_plot", False)
    params = dict(DEFAULTS[cmd])
    if cfg_path is not None:
        try:
            data = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(params))
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd!r}: {', '.join(unknown)}")
        for key, val in data.items():
            params[key] = _coerce(key, val, DEFAULTS[cmd][key])
    params.update(given)
    formats = ("csv", "json") if fmt == "both" else (fmt,)
    config = RunConfig(cmd, params, Path(out), formats, plot)
    validate(config)
    return config


def _coerce(key, val, default):
    if isinstance(default, list):
        return [str(v) for v in (val if isinstance(val, list) else [val])]
    if isinstance(default, bool) or val is None:
        raise ConfigError(f"bad value for {key!r}: {val!r}")
    try:
        out = type(default)(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {val!r}") from exc
    if isinstance(default, int) and out != val:
        raise ConfigError(f"{key!r} must be an integer")
    return out


def validate(config: RunConfig) -> None:
    """Check numeric parameters against the module preconditions."""
    from .continuation import critical_exponent

    P = config.params
    for key, allowed in CHOICES.items():
        if key in P and P[key] not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {P[key]!r}")
    if config.command == "verify":
        if not P["tol_scale"] >= 0:
            raise ConfigError("tol_scale must be >= 0")
        return
    s = P["s"]
    if not 0.0 < s < 1.0:
        raise ConfigError(f"s={s} outside the range (0, 1)")
    n = P["n"]
    if n < 9 or n % 2 == 0:
        raise ConfigError(f"n={n} must be odd and at least 9")
    if P.get("L", 1.0) <= 0:
        raise ConfigError("L must be positive")
    pc = critical_exponent(s)
    for key in ("p", "p_start", "p_end"):
        if key in P and not 1.0 < P[key] < pc:
            raise ConfigError(f"{key}={P[key]} outside the subcritical range (1, {pc:g})")
    if config.command == "branch":
        if P["p_start"] > P["p_end"]:
            raise ConfigError("p_start must not exceed p_end")
        if not P["dp"] > 0:
            raise ConfigError("dp must be positive")
    if P.get("domain") == "line" and P["lambda"] <= 0:
        raise ConfigError("the line problem needs lambda > 0")
    if config.command == "spectrum" and P["k"] < 1:
        raise ConfigError("k must be at least 1")
    if config.command == "picone" and P["cutoff"] < 1:
        raise ConfigError("cutoff level must be at least 1")
    if config.command == "extend" and (P["levels"] < 3 or not P["t_max"] > 0):
        raise ConfigError("extend needs levels >= 3 and t_max > 0")


# commands -----------------------------------------------------------------


def _grid(P):
    from .discretize import Grid1D

    if P.get("domain", "ball") == "line":
        return Grid1D.line(P["n"], P["L"])
    return Grid1D.ball(P["n"])


def _emit(config, stem, columns, rows, results):
    from .io import write_csv, write_json

    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in config.formats:
        written.append(write_csv(out / f"{stem}.csv", config.command, config.params, columns, rows))
    if "json" in config.formats:
        written.append(write_json(out / "summary.json", config.command, config.params, results))
    return written


def cmd_solve(config: RunConfig) -> int:
    from .groundstate import SolverOptions, residual, solve

    P = config.params
    grid = _grid(P)
    st = solve(P["s"], P["lambda"], P["p"], grid, SolverOptions(tol=P["tol"]))
    u = st.u.values
    results = {
        "residual": residual(st),
        "u0": st.amplitude,
        "u_max": float(u.max()),
        "psi": st.psi_boundary,
        "newton_iters": st.newton_iters,
        "lambda1": st.op.lambda1,
        "diagnostics": st.diagnostics,
    }
    _emit(config, "solution", ("x", "u"), zip(grid.nodes, u), results)
    if config.plot:
        from .plots import line_plot

        line_plot(config.out / "solution.svg", grid.nodes, {"u": u}, ylabel="u")
    return EXIT_OK


def cmd_spectrum(config: RunConfig) -> int:
    from .groundstate import solve
    from .spectrum import morse_index, weighted_eigs

    P = config.params
    grid = _grid(P)
    st = solve(P["s"], P["lambda"], P["p"], grid)
    spec = weighted_eigs(st.op, st, P["sector"], P["k"])
    results = {
        "eigenvalues": [e.value for e in spec.eigenpairs],
        "sectors": [e.sector for e in spec.eigenpairs],
        "gaps": [e.value - st.p for e in spec.eigenpairs],
        "u0": st.amplitude,
    }
    try:
        results["morse_index"] = morse_index(spec, st.p)
    except DomainError as exc:
        results["morse_index"] = None
        results["morse_note"] = str(exc)
    rows = ((k, val, sec) for k, val, sec in spec.to_rows())
    _emit(config, "eigenvalues", ("k", "Lambda", "sector"), rows, results)
    if config.plot:
        from .plots import line_plot

        curves = {f"k={i} ({e.sector}) {e.value:.4g}": e.w.values for i, e in enumerate(spec.eigenpairs, 1)}
        line_plot(config.out / "eigenfunctions.svg", grid.nodes, curves, ylabel="w")
    return EXIT_OK


def cmd_picone(config: RunConfig) -> int:
    from .acceptance import picone_draw
    from .discretize import Grid1D, GridFunction, assemble
    from .picone import build_cutoff, picone_residual

    P = config.params
    grid = Grid1D.ball(P["n"])
    op = assemble(grid, P["s"])
    rng = np.random.default_rng(P["seed"])
    _, v, V, _ = picone_draw(rng, grid, op)
    x = grid.nodes
    b = rng.normal(size=4)
    direction = sum(b[k] * np.sin((k + 1) * math.pi * x) for k in range(4))
    w = GridFunction(grid, build_cutoff(P["cutoff"], grid).values * direction, "odd")
    rep = picone_residual(w, v, V, P["s"], op=op, cutoff_level=P["cutoff"], keep_h=True)
    results = {
        "lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual,
        "relative": rep.relative, "h_min": rep.h_min, "within": rep.within(),
    }
    xh = x[grid.center + 1 : grid.center + 1 + rep.H.shape[0]]
    rows = ((xi, rep.H[i].sum() * grid.h) for i, xi in enumerate(xh))
    _emit(config, "picone", ("x", "H_row_integral"), rows, results)
    if config.plot:
        from .plots import heatmap

        heatmap(config.out / "picone_H.png", xh, xh, rep.H, xlabel="x", ylabel="y", title="H(x, y)")
    return EXIT_OK


def _trace(P):
    from .discretize import Grid1D, GridFunction

    if P["trace"] == "lorentzian":
        grid = Grid1D.line(P["n"], P["L"])
        return GridFunction.from_callable(grid, lambda x: 1.0 / (1.0 + x * x), "even")
    grid = Grid1D.ball(P["n"])
    if P["trace"] == "torsion":
        return GridFunction.from_callable(grid, lambda x: np.clip(1.0 - x * x, 0.0, None) ** P["s"], "even")
    from .groundstate import solve_ball

    return solve_ball(P["s"], 0.0, P["p"], grid).u


def cmd_extend(config: RunConfig) -> int:
    from .extension import extend, normal_derivative, pde_residual

    P = config.params
    v = _trace(P)
    t = np.linspace(0.0, P["t_max"], P["levels"] + 1)[1:]
    F = extend(v, P["s"], tgrid=t)
    half = min(5.0, 0.5 * F.xgrid.half_width)
    res = pde_residual(F, (-half, half), (0.1 * P["t_max"], 0.9 * P["t_max"]))
    results = {
        "pde_residual": res,
        "field_max": float(np.max(np.abs(F.W))),
        "trace": P["trace"],
        "levels": int(F.t.size),
    }
    try:
        nd = normal_derivative(extend(v, P["s"]), grid=v.grid)
        results["normal_derivative_at_0"] = float(nd.values.values[v.grid.center])
        results["normal_derivative_spread"] = nd.spread
    except ValueError as exc:
        results["normal_derivative_error"] = str(exc)
    _emit(config, "field", ("x", "t", "W"), F.to_csv_rows(), results)
    if config.plot:
        from .plots import heatmap

        keep = np.abs(F.x) <= 2.0 * half
        heatmap(config.out / "extension.png", F.x[keep], F.t, F.W[:, keep], title="W(x, t)")
    return EXIT_OK


def cmd_branch(config: RunConfig) -> int:
    from .continuation import BranchOptions, bound_diagnostic, trace_branch

    P = config.params
    grid = _grid(P)
    opts = BranchOptions(dp_init=P["dp"])
    b = trace_branch(P["s"], P["lambda"], P["p_start"], P["p_end"], grid, opts)
    results = {
        "points": len(b.points),
        "complete": b.complete,
        "bifurcation": b.bifurcation,
        "failure": b.failure,
        "stats": b.stats,
        "min_margin": float(min(pt.margin for pt in b.points)),
        "max_jacobian_cond": float(max(pt.jacobian_cond for pt in b.points)),
    }
    if len(b.points) >= 2:
        rep = bound_diagnostic(b)
        results.update(bounded=rep.bounded, blowup_ratio=rep.blowup_ratio, lower_bound_ok=rep.lower_bound_ok)
    cols = ("p", "u0", "psi", "Lambda1", "Lambda2", "odd_gap", "even_gap")
    _emit(config, "branch", cols, b.to_rows(), results)
    if config.plot:
        from .plots import line_plot

        line_plot(config.out / "branch.svg", b.p_values, {"u(0)": [pt.amplitude for pt in b.points]},
                  xlabel="p", ylabel="u(0)")
    if b.failure is not None:
        log.error("branch stopped at p=%g: %s", b.failure["p"], b.failure["reason"])
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    from .acceptance import run
    from .io import write_json

    P = config.params
    only = set()
    for item in P["only"]:
        only.update(x.strip() for x in item.split(",") if x.strip())
    results = run(only=only or None, tol_scale=P["tol_scale"], echo=print)
    if not results:
        raise ConfigError(f"--only matched no criteria: {sorted(only)}")
    report = {
        "criteria": [
            {"number": r.number, "group": r.group, "title": r.title, "passed": r.passed, "measured": r.measured}
            for r in results
        ],
        "failures": [r.number for r in results if not r.passed],
        "passed": all(r.passed for r in results),
    }
    config.out.mkdir(parents=True, exist_ok=True)
    write_json(config.out / "report.json", "verify", P, report)
    if report["failures"]:
        print("failed criteria: " + ", ".join(map(str, report["failures"])), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


HANDLERS = {
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "picone": cmd_picone,
    "extend": cmd_extend,
    "branch": cmd_branch,
    "verify": cmd_verify,
}


def _thread_limit():
    raw = os.environ.get("FRACLAB_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"FRACLAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("FRACLAB_THREADS must be a positive integer")
    return n


def _write_error(config: RunConfig, exc: Exception) -> None:
    from .io import write_json

    try:
        config.out.mkdir(parents=True, exist_ok=True)
        write_json(config.out / "error.json", config.command, config.params,
                   {"error": type(exc).__name__, "message": str(exc)})
    except OSError:
        pass


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config = load_config(ns)
        threads = _thread_limit()
    except (ConfigError, DomainError, ValueError) as exc:
        print(f"fraclab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=threads):
        try:
            return HANDLERS[config.command](config)
        except (ConfigError, DomainError) as exc:
            print(f"fraclab: config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (NonconvergenceError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
            print(f"fraclab: computation failed: {exc}", file=sys.stderr)
            _write_error(config, exc)
            return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
