"""Reproducible experiment runner.

Subcommands: solve, mc, convergence, picard-diagnose, spde, oracle-check,
paths.  Config values come from an optional flat key=value file with CLI
flags taking precedence; every CSV gets a header row and a JSON metadata
sidecar (config echo, versions, seed), and numbers are serialized with 17
significant digits so outputs round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import backend_name
from .errors import BdsdeError, NumericFailureError
from .explicit_solver import solve_backward_explicit
from .grid_noise import make_grid, sample_path, walk_values
from .model import builtin, registry_keys, Coefficient
from .montecarlo import convergence_study, estimate
from .oracle import run_oracle_checks
from .picard import picard_solve
from .spde import ForwardSpec, spec_from_coefficients, u_surface
from .tree_solver import solve_backward, tree_rows

SCHEMES = ("implicit", "explicit", "picard")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_sidecar(path: Path, config: dict, seed) -> None:
    payload = {
        "config": config,
        "seed": seed,
        "versions": {
            "bdsde": __version__,
            "numpy": np.__version__,
            "backend": backend_name(),
        },
    }
    sidecar = path.with_name(path.name + ".meta.json")
    sidecar.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_config(path) -> dict:
    """Flat key = value file; '#' starts a comment, values stay strings."""
    config = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BdsdeError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        config[key.strip().replace("-", "_")] = value.strip()
    return config


class _Resolver:
    """Applies precedence: explicit flag > config file > default."""

    def __init__(self, args):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}
        self.resolved = {}

    def get(self, key, default=None, cast=str, required=False):
        value = getattr(self.args, key, None)
        if value is None and key in self.config:
            value = self.config[key]
        if value is None:
            value = default
        if value is None and required:
            raise BdsdeError(f"missing required option --{key.replace('_', '-')}")
        if value is not None and cast is bool and isinstance(value, str):
            value = value.lower() in ("1", "true", "yes", "on")
        elif value is not None:
            value = cast(value)
        self.resolved[key] = value
        return value


def _parse_coefficient(text: str) -> Coefficient:
    """Parse 'zero', 'constant:c', 'linear:a,b', 'x' (first-slot value),
    'sine:a' into a coefficient."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    params = [float(v) for v in rest.split(",") if v.strip()]
    if kind == "zero":
        return Coefficient.zero()
    if kind == "constant":
        return Coefficient.constant(params[0] if params else 0.0)
    if kind == "linear":
        if len(params) != 2:
            raise BdsdeError("linear coefficient needs 'linear:a,b'")
        return Coefficient.linear(*params)
    if kind in ("x", "state"):
        return Coefficient.time_only()
    if kind == "sine":
        return Coefficient.sine(params[0] if params else 1.0)
    raise BdsdeError(f"unknown coefficient spec {text!r}")


def _cmd_solve(args) -> int:
    r = _Resolver(args)
    model = r.get("model", required=True)
    T = r.get("T", 1.0, float)
    n = r.get("n", required=True, cast=int)
    seed = r.get("seed", 0, int)
    index = r.get("index", 0, int)
    scheme = r.get("scheme", "implicit")
    tol = r.get("tol", 1e-12, float)
    tree_csv = r.get("tree_csv", None)
    out = r.get("out", None)
    if scheme not in SCHEMES:
        raise BdsdeError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    spec = builtin(model)
    grid = make_grid(T, n)
    path = sample_path(grid, seed, index=index)
    keep = tree_csv is not None
    if scheme == "picard":
        it, diags = picard_solve(spec, grid, path.eps)
        payload = {
            "y0": float(it.y_flat[0]),
            "z0": float(it.z_flat[0]),
            "scheme": "picard",
            "picard_iterations": diags.iterations,
            "picard_converged": diags.converged,
        }
        report = None
    else:
        if scheme == "implicit":
            report = solve_backward(spec, grid, path.eps, keep_tree=keep, tol=tol)
        else:
            report = solve_backward_explicit(spec, grid, path.eps, keep_tree=keep)
        payload = {
            "y0": report.y0,
            "z0": report.z0,
            "fixed_point_iterations": report.fixed_point_iterations,
            "residual": report.residual,
            "scheme": report.scheme,
        }
    payload.update({"model": model, "T": T, "n": n, "seed": seed, "index": index})
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
        _write_sidecar(Path(out), r.resolved, seed)
    else:
        print(text)
    if tree_csv and report is not None:
        _write_csv(Path(tree_csv), ("level", "node", "W", "y", "z", "scheme"),
                   tree_rows(report, grid))
        _write_sidecar(Path(tree_csv), r.resolved, seed)
    return 0


def _cmd_mc(args) -> int:
    r = _Resolver(args)
    model = r.get("model", required=True)
    T = r.get("T", 1.0, float)
    n = r.get("n", required=True, cast=int)
    samples = r.get("samples", required=True, cast=int)
    seed = r.get("seed", 0, int)
    scheme = r.get("scheme", "implicit")
    out = Path(r.get("out", "mc.csv"))
    if scheme not in SCHEMES:
        raise BdsdeError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    spec = builtin(model)
    grid = make_grid(T, n)
    report = estimate(spec, grid, samples, seed, scheme=scheme)
    _write_csv(
        out,
        ("n", "samples", "mean", "var", "ci", "l2err"),
        [(n, report.n_samples, report.mean_y0, report.var_y0, report.ci_halfwidth,
          report.l2_error_vs_oracle)],
    )
    _write_sidecar(out, r.resolved, seed)
    return 0


def _cmd_convergence(args) -> int:
    r = _Resolver(args)
    model = r.get("model", required=True)
    T = r.get("T", 1.0, float)
    n_list = [int(v) for v in str(r.get("n_list", required=True)).split(",") if v.strip()]
    samples = r.get("samples", required=True, cast=int)
    seed = r.get("seed", 0, int)
    out = Path(r.get("out", "convergence.csv"))
    spec = builtin(model)
    table = convergence_study(spec, n_list, samples, seed, T=T)
    _write_csv(
        out,
        ("n", "err", "ci"),
        [(row.n, row.error, row.ci_halfwidth) for row in table.rows],
    )
    _write_sidecar(out, {**r.resolved, "slope": table.slope}, seed)
    return 0


def _cmd_picard_diagnose(args) -> int:
    r = _Resolver(args)
    model = r.get("model", required=True)
    T = r.get("T", 1.0, float)
    n = r.get("n", required=True, cast=int)
    seed = r.get("seed", 0, int)
    gamma = r.get("gamma", math.e, float)
    p_max = r.get("p_max", 50, int)
    tol = r.get("tol", 1e-16, float)
    out = Path(r.get("out", "picard.csv"))
    spec = builtin(model)
    grid = make_grid(T, n)
    path = sample_path(grid, seed)
    _, diags = picard_solve(spec, grid, path.eps, p_max=p_max, tol=tol, gamma=gamma,
                            seed=seed)
    rows = [
        (p, diags.norms[p], None if math.isnan(diags.ratios[p]) else diags.ratios[p])
        for p in range(len(diags.norms))
    ]
    _write_csv(out, ("p", "norm_sq", "ratio"), rows)
    _write_sidecar(
        out,
        {**r.resolved, "converged": diags.converged,
         "norms_gamma1": list(diags.norms_gamma1)},
        seed,
    )
    return 0


def _cmd_spde(args) -> int:
    r = _Resolver(args)
    T = r.get("T", 1.0, float)
    n = r.get("n", required=True, cast=int)
    seed = r.get("seed", 0, int)
    f = _parse_coefficient(r.get("f", "zero"))
    g = _parse_coefficient(r.get("g", "constant:1"))
    h_kind = r.get("h", "square")
    h_param = r.get("h_param", 0.0, float)
    b0 = r.get("b0", 0.0, float)
    b1 = r.get("b1", 0.0, float)
    sigma = r.get("sigma", 1.0, float)
    x_min = r.get("x_min", -1.0, float)
    x_max = r.get("x_max", 1.0, float)
    x_points = r.get("x_points", 11, int)
    out = Path(r.get("out", "surface.csv"))
    fwd = ForwardSpec(b0=b0, b1=b1, sigma=sigma, h_kind=h_kind, h_param=h_param)
    spec = spec_from_coefficients(f, g)
    grid = make_grid(T, n)
    path = sample_path(grid, seed)
    x_grid = np.linspace(x_min, x_max, x_points)
    surface = u_surface(fwd, spec, grid, x_grid, path.eps, path_tag=f"seed={seed}")
    _write_csv(
        out,
        ("x", "u0", "eps_seed"),
        [(x, u, seed) for x, u in zip(surface.x_grid, surface.u)],
    )
    _write_sidecar(out, r.resolved, seed)
    return 0


def _cmd_oracle_check(args) -> int:
    r = _Resolver(args)
    out = r.get("out", None)
    records = run_oracle_checks()
    all_pass = all(rec["pass"] for rec in records)
    for rec in records:
        status = "PASS" if rec["pass"] else "FAIL"
        print(f"{status} {rec['claim']}: lhs={_fmt(rec['lhs'])} rhs={_fmt(rec['rhs'])}")
    if out:
        Path(out).write_text(
            json.dumps({"checks": records, "all_pass": all_pass}, sort_keys=True,
                       indent=2) + "\n"
        )
    return 0 if all_pass else 1


def _cmd_paths(args) -> int:
    r = _Resolver(args)
    T = r.get("T", 1.0, float)
    n = r.get("n", required=True, cast=int)
    seed = r.get("seed", 0, int)
    out = Path(r.get("out", "paths.csv"))
    grid = make_grid(T, n)
    path = sample_path(grid, seed)
    walks = walk_values(path, grid)
    b_rev = walks.B[-1] - walks.B
    _write_csv(
        out,
        ("t", "W", "B_rev"),
        [(grid.times[j], walks.W[j], b_rev[j]) for j in range(n + 1)],
    )
    _write_sidecar(out, r.resolved, seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdsde",
        description="Backward doubly stochastic differential equation lab",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output file")
        p.add_argument("--seed", type=int)
        p.add_argument("--T", type=float)
        p.add_argument("--n", type=int)
        return p

    p = add("solve", _cmd_solve, help="one backward solve for a sampled eps-path")
    p.add_argument("--model")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--index", type=int, help="substream index of the path")
    p.add_argument("--tol", type=float)
    p.add_argument("--tree-csv", dest="tree_csv", help="dump the full tree as CSV")

    p = add("mc", _cmd_mc, help="Monte-Carlo estimate of the root value")
    p.add_argument("--model")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--samples", type=int)

    p = add("convergence", _cmd_convergence, help="error vs step count study")
    p.add_argument("--model")
    p.add_argument("--n-list", dest="n_list", help="comma-separated step counts")
    p.add_argument("--samples", type=int)

    p = add("picard-diagnose", _cmd_picard_diagnose,
            help="Picard contraction diagnostics")
    p.add_argument("--model")
    p.add_argument("--gamma", type=float, help="weight base of the norm")
    p.add_argument("--p-max", dest="p_max", type=int)
    p.add_argument("--tol", type=float)

    p = add("spde", _cmd_spde, help="u(0, x) surface for one eps-path")
    p.add_argument("--f", help="coefficient spec, e.g. zero, linear:0.1,0.2")
    p.add_argument("--g", help="coefficient spec, e.g. constant:1, x")
    p.add_argument("--h", choices=("identity", "constant", "square", "call"))
    p.add_argument("--h-param", dest="h_param", type=float)
    p.add_argument("--b0", type=float)
    p.add_argument("--b1", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--x-min", dest="x_min", type=float)
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--x-points", dest="x_points", type=int)

    add("oracle-check", _cmd_oracle_check, help="run the oracle invariant suite")

    add("paths", _cmd_paths, help="emit (t, W_t, B_T - B_t) path columns")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericFailureError as err:
        diagnostic = {
            "error": "numeric-failure",
            "message": str(err),
            "level": err.level,
            "node": err.node,
            "residual": err.residual,
        }
        print(json.dumps(diagnostic, sort_keys=True), file=sys.stderr)
        return 1
    except BdsdeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
