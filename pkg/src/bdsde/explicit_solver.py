"""Modified explicit scheme: f evaluated at the conditional mean of the next
level, removing the implicit inversion entirely.

The g-term uses the conditional expectation over the next forward sign (the
average of the two branch values), consistent with the implicit scheme's
branch algebra.
"""

from __future__ import annotations

import numpy as np

from ._kernels_py import explicit_level_step
from .errors import InvalidArgumentError
from .grid_noise import TimeGrid
from .model import ProblemSpec, validate_spec
from .tree_solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    LevelValues,
    PreparedSolver,
    SolveReport,
    _check_eps,
)


def explicit_step(next_level: LevelValues, eps_sign: float, spec: ProblemSpec,
                  grid: TimeGrid) -> LevelValues:
    """One explicit step from level j+1 to level j."""
    spec = validate_spec(spec, grid)
    j = next_level.level - 1
    if j < 0:
        raise InvalidArgumentError("cannot step backward from level 0")
    y, z = explicit_level_step(
        next_level.y,
        next_level.z,
        float(eps_sign),
        j,
        grid.times,
        grid.delta,
        spec.f.kernel_descriptor(grid),
        spec.g.kernel_descriptor(grid),
    )
    return LevelValues(level=j, y=y, z=z)


def solve_backward_explicit(spec: ProblemSpec, grid: TimeGrid, eps, *,
                            keep_tree: bool = False) -> SolveReport:
    """Explicit scheme over the whole tree; shares the terminal layer with
    the implicit solver."""
    return PreparedSolver(spec, grid, "explicit").report(eps, keep_tree)


def scheme_residual_explicit(report: SolveReport, spec: ProblemSpec, grid: TimeGrid,
                             eps) -> float:
    """Max violation of the explicit one-step equation over all nodes and
    both forward branches (f at the conditional mean of the next level)."""
    if report.y_flat is None:
        raise InvalidArgumentError("scheme_residual needs a report with keep_tree")
    eps = _check_eps(eps, grid.n)
    sq = grid.sqrt_delta
    worst = 0.0
    levels = report.levels
    for j in range(grid.n):
        cur, nxt = levels[j], levels[j + 1]
        t_j, t_next = grid.times[j], grid.times[j + 1]
        ymid = 0.5 * (nxt.y[1:] + nxt.y[:-1])
        fval = np.asarray(spec.f.value(t_j, ymid, cur.z))
        for branch, (y_next, z_next) in (
            (+1.0, (nxt.y[1:], nxt.z[1:])),
            (-1.0, (nxt.y[:-1], nxt.z[:-1])),
        ):
            gval = np.asarray(spec.g.value(t_next, y_next, z_next))
            recon = y_next + fval * grid.delta + gval * sq * eps[j] - cur.z * sq * branch
            worst = max(worst, float(np.max(np.abs(cur.y - recon))))
    return worst


def apriori_gate(spec: ProblemSpec, grid: TimeGrid) -> bool:
    """Whether (1 + 2K + 7K^2) * delta < 1, the smallness condition the
    second-moment bound of the explicit scheme assumes."""
    return (1.0 + 2.0 * spec.K + 7.0 * spec.K**2) * grid.delta < 1.0
