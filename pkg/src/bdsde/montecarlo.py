"""Monte-Carlo estimation over backward-noise paths and convergence studies.

Each sample draws one independent noise path from its own (seed, index)
substream, runs the chosen scheme, and aggregates root statistics; models
with a closed form additionally get the discrete error metric

    sup_j |y_j - Y_j|^2 + delta * sum_{j<n} |z_j - Z_j|^2

along the realized forward path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyReportError, InvalidArgumentError, NumericFailureError
from .grid_noise import TimeGrid, make_grid, sample_path
from .model import ProblemSpec
from .oracle import ExactSolution, exact_time_integral, exact_transport
from .picard import picard_solve
from .tree_solver import PreparedSolver, values_along_beta

#: models with a closed-form solution usable as an error oracle
_EXACT_ORACLES = {
    "transport": exact_transport,
    "time_integral": exact_time_integral,
}


@dataclass(eq=False)
class McReport:
    """Monte-Carlo summary of the root value y0 (normal-approximation CI)."""

    n_samples: int
    mean_y0: float
    var_y0: float
    ci_halfwidth: float
    seed: object
    scheme: str
    l2_error_vs_oracle: Optional[float] = None
    sq_error_y0: Optional[float] = None
    n_failures: int = 0
    samples: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(eq=False)
class ConvergenceRow:
    n: int
    error: float
    samples: int
    ci_halfwidth: float


@dataclass(eq=False)
class ConvergenceTable:
    rows: list[ConvergenceRow]
    slope: Optional[float]


def _mc_stats(values: np.ndarray) -> tuple[float, float, float]:
    mean = float(np.mean(values))
    var = float(np.var(values, ddof=1)) if len(values) > 1 else 0.0
    ci = 1.96 * math.sqrt(var / len(values))
    return mean, var, ci


def estimate(spec: ProblemSpec, grid: TimeGrid, n_samples: int, seed,
             scheme: str = "implicit", *, keep_samples: bool = False) -> McReport:
    """Sample ``n_samples`` independent backward paths and aggregate y0.

    When the model has a closed-form oracle, also reports the sample means
    of (y0 - Y0)^2 and of the discrete sup/sum error metric along the
    realized forward path.  Solver failures are counted and skipped.
    """
    if n_samples < 1:
        raise EmptyReportError(f"n_samples must be >= 1, got {n_samples}")
    if scheme not in ("implicit", "explicit", "picard"):
        raise InvalidArgumentError(f"unknown scheme {scheme!r}")
    oracle = _EXACT_ORACLES.get(spec.name)
    prepared = None
    if scheme in ("implicit", "explicit"):
        prepared = PreparedSolver(spec, grid, scheme=scheme)
    need_tree = oracle is not None
    y0s = np.empty(n_samples)
    sq_errors = np.empty(n_samples) if oracle else None
    l2_errors = np.empty(n_samples) if oracle else None
    n_ok = 0
    n_failures = 0
    for i in range(n_samples):
        path = sample_path(grid, seed, index=i)
        try:
            if prepared is not None:
                report = prepared.report(path.eps, keep_tree=need_tree)
            else:
                it, _ = picard_solve(spec, grid, path.eps)
                from .tree_solver import SolveReport

                report = SolveReport(
                    y0=float(it.y_flat[0]), z0=float(it.z_flat[0]),
                    fixed_point_iterations=0, residual=0.0, scheme="picard",
                    n=grid.n, y_flat=it.y_flat, z_flat=it.z_flat,
                )
        except NumericFailureError:
            n_failures += 1
            continue
        y0s[n_ok] = report.y0
        if oracle is not None:
            exact = oracle(grid, path)
            y_num, z_num = values_along_beta(report, path.beta)
            dy = y_num - exact.y_path
            dz = z_num - exact.z_path
            sq_errors[n_ok] = (report.y0 - exact.y_path[0]) ** 2
            l2_errors[n_ok] = float(
                np.max(dy**2) + grid.delta * np.sum(dz**2)
            )
        n_ok += 1
    if n_ok == 0:
        raise EmptyReportError("all samples failed")
    y0s = y0s[:n_ok]
    mean, var, ci = _mc_stats(y0s)
    return McReport(
        n_samples=n_ok,
        mean_y0=mean,
        var_y0=var,
        ci_halfwidth=ci,
        seed=seed,
        scheme=scheme,
        l2_error_vs_oracle=float(np.mean(l2_errors[:n_ok])) if oracle else None,
        sq_error_y0=float(np.mean(sq_errors[:n_ok])) if oracle else None,
        n_failures=n_failures,
        samples=y0s if keep_samples else None,
    )


def convergence_study(spec: ProblemSpec, n_list, samples: int, seed,
                      T: float = 1.0) -> ConvergenceTable:
    """Error metric per step count, plus the fitted log-log slope.

    Models with a closed form use the exact-oracle metric; others use the
    implicit-vs-explicit gap (same eps, same realized forward path), whose
    decay bounds the scheme error's order.  Slope is omitted when errors sit
    at the exactness floor.
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise InvalidArgumentError("n_list must not be empty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidArgumentError(f"n_list must be strictly increasing, got {n_list}")
    if samples < 1:
        raise EmptyReportError(f"samples must be >= 1, got {samples}")
    oracle = _EXACT_ORACLES.get(spec.name)
    rows = []
    for n in n_list:
        grid = make_grid(T, n)
        errors = np.empty(samples)
        if oracle is not None:
            prepared = PreparedSolver(spec, grid, "implicit")
            for i in range(samples):
                path = sample_path(grid, (seed, n), index=i)
                report = prepared.report(path.eps, keep_tree=True)
                exact = oracle(grid, path)
                y_num, z_num = values_along_beta(report, path.beta)
                errors[i] = float(
                    np.max((y_num - exact.y_path) ** 2)
                    + grid.delta * np.sum((z_num - exact.z_path) ** 2)
                )
        else:
            pre_i = PreparedSolver(spec, grid, "implicit")
            pre_e = PreparedSolver(spec, grid, "explicit")
            for i in range(samples):
                path = sample_path(grid, (seed, n), index=i)
                rep_i = pre_i.report(path.eps, keep_tree=True)
                rep_e = pre_e.report(path.eps, keep_tree=True)
                y_i, z_i = values_along_beta(rep_i, path.beta)
                y_e, z_e = values_along_beta(rep_e, path.beta)
                errors[i] = float(
                    np.max((y_i - y_e) ** 2) + grid.delta * np.sum((z_i - z_e) ** 2)
                )
        mean, _, ci = _mc_stats(errors)
        rows.append(ConvergenceRow(n=n, error=mean, samples=samples, ci_halfwidth=ci))
    floor = 1e-12
    slope = None
    if all(r.error > floor for r in rows) and len(rows) >= 2:
        slope = float(
            np.polyfit(
                np.log([r.n for r in rows]), np.log([r.error for r in rows]), 1
            )[0]
        )
    return ConvergenceTable(rows=rows, slope=slope)
