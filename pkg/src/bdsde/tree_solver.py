"""Implicit backward induction on the recombining W-tree for one eps-path.

Conditioning on the two branches of the next forward sign reduces each step
to a slope formula for z and a one-dimensional monotone inversion
y - f(t, y, z)*delta = rhs for y.  The inversion has a closed form for every
coefficient kind affine in y and a guaranteed contraction iteration
otherwise (delta*K < 1).

Time-argument convention: f is evaluated at t_j, g at t_{j+1}.  The step
from level j+1 to level j consumes eps[j] (0-based storage of the (j+1)-th
backward sign).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from ._backend import tri_offset, tri_size
from ._kernels_py import implicit_level_step, theta_invert_desc
from .errors import InvalidArgumentError, UnsupportedModelError
from .grid_noise import TimeGrid
from .model import ProblemSpec, validate_spec

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100


def node_positions(grid: TimeGrid, level: int) -> np.ndarray:
    """W-values of the tree nodes at a level: (2i - level) * sqrt(delta)."""
    return (2.0 * np.arange(level + 1) - level) * grid.sqrt_delta


@dataclass(frozen=True, eq=False)
class LevelValues:
    """Node-indexed (y, z) arrays on one time level, for a fixed eps-suffix."""

    level: int
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if len(self.y) != self.level + 1 or len(self.z) != self.level + 1:
            raise InvalidArgumentError("level arrays must have level+1 entries")


@dataclass(eq=False)
class SolveReport:
    """Result of one backward solve (root values plus solve diagnostics)."""

    y0: float
    z0: float
    fixed_point_iterations: int
    residual: float
    scheme: str
    n: int
    y_flat: Optional[np.ndarray] = field(default=None, repr=False)
    z_flat: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def levels(self) -> Optional[list[LevelValues]]:
        if self.y_flat is None:
            return None
        out = []
        for j in range(self.n + 1):
            off = tri_offset(j)
            out.append(
                LevelValues(
                    level=j,
                    y=self.y_flat[off : off + j + 1],
                    z=self.z_flat[off : off + j + 1],
                )
            )
        return out


def gradient_z(y: np.ndarray, sqrt_delta: float) -> np.ndarray:
    """Discrete gradient of node values along the W-axis.

    Central difference over the 2*sqrt(delta) node spacing in the interior,
    one-sided at the two extreme nodes.
    """
    y = np.asarray(y, dtype=float)
    z = np.empty_like(y)
    if len(y) < 2:
        z[:] = 0.0
        return z
    z[1:-1] = (y[2:] - y[:-2]) / (4.0 * sqrt_delta)
    z[0] = (y[1] - y[0]) / (2.0 * sqrt_delta)
    z[-1] = (y[-1] - y[-2]) / (2.0 * sqrt_delta)
    return z


def terminal_layer(spec: ProblemSpec, grid: TimeGrid) -> LevelValues:
    """Terminal level: y from the terminal functional on the nodes, z from
    the discrete gradient of y (the terminal-slope rule)."""
    if not spec.phi.terminal_only:
        raise UnsupportedModelError(
            "tree solvers need a terminal functional of W_T only"
        )
    y = np.asarray(spec.phi.terminal_value(node_positions(grid, grid.n)), dtype=float)
    z = gradient_z(y, grid.sqrt_delta)
    return LevelValues(level=grid.n, y=y, z=z)


def theta_invert(rhs, z, t, spec: ProblemSpec, grid: TimeGrid, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER):
    """Solve y - f(t, y, z)*delta = rhs (closed form when f is affine in y)."""
    validate_spec(spec, grid)
    fdesc = spec.f.kernel_descriptor(grid)
    j = int(round(t / grid.delta))
    scalar = np.isscalar(rhs)
    y, _, _ = theta_invert_desc(
        fdesc, j, t, np.asarray(z, dtype=float), np.atleast_1d(np.asarray(rhs, dtype=float)),
        grid.delta, tol, max_iter
    )
    return float(y[0]) if scalar else y


def implicit_step(next_level: LevelValues, eps_sign: float, spec: ProblemSpec,
                  grid: TimeGrid, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> LevelValues:
    """One implicit step from level j+1 to level j (j = next_level.level - 1)."""
    spec = validate_spec(spec, grid)
    j = next_level.level - 1
    if j < 0:
        raise InvalidArgumentError("cannot step backward from level 0")
    y, z, _, _ = implicit_level_step(
        next_level.y,
        next_level.z,
        float(eps_sign),
        j,
        grid.times,
        grid.delta,
        spec.f.kernel_descriptor(grid),
        spec.g.kernel_descriptor(grid),
        tol,
        max_iter,
    )
    return LevelValues(level=j, y=y, z=z)


def _check_eps(eps, n) -> np.ndarray:
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    if eps.shape != (n,):
        raise InvalidArgumentError(f"eps must have length n={n}, got {eps.shape}")
    if not np.all(np.abs(eps) == 1.0):
        raise InvalidArgumentError("eps entries must be exactly +1 or -1")
    return eps


class PreparedSolver:
    """Reusable solver for one (spec, grid, scheme): the terminal layer and
    the kernel descriptors do not depend on the eps-path, so Monte-Carlo
    loops amortize them across samples."""

    def __init__(self, spec: ProblemSpec, grid: TimeGrid, scheme: str = "implicit",
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        if scheme not in ("implicit", "explicit"):
            raise InvalidArgumentError(f"unknown scheme {scheme!r}")
        self.spec = validate_spec(spec, grid)
        self.grid = grid
        self.scheme = scheme
        self.tol = tol
        self.max_iter = max_iter
        term = terminal_layer(spec, grid)
        self._y_term = term.y
        self._z_term = term.z
        self._fdesc = spec.f.kernel_descriptor(grid)
        self._gdesc = spec.g.kernel_descriptor(grid)

    def flats(self, eps):
        """Run the sweep; returns (y_flat, z_flat, iterations, residual)."""
        eps = _check_eps(eps, self.grid.n)
        if self.scheme == "implicit":
            return _backend.sweep_implicit(
                self._y_term, self._z_term, eps, self.grid.times, self.grid.delta,
                self._fdesc, self._gdesc, self.tol, self.max_iter,
            )
        y_flat, z_flat = _backend.sweep_explicit(
            self._y_term, self._z_term, eps, self.grid.times, self.grid.delta,
            self._fdesc, self._gdesc,
        )
        return y_flat, z_flat, 0, 0.0

    def report(self, eps, keep_tree: bool = False) -> SolveReport:
        y_flat, z_flat, iters, resid = self.flats(eps)
        return SolveReport(
            y0=float(y_flat[0]),
            z0=float(z_flat[0]),
            fixed_point_iterations=int(iters),
            residual=float(resid),
            scheme=self.scheme,
            n=self.grid.n,
            y_flat=y_flat if keep_tree else None,
            z_flat=z_flat if keep_tree else None,
        )


def solve_backward(spec: ProblemSpec, grid: TimeGrid, eps, *, keep_tree: bool = False,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   terminal_z: str = "gradient") -> SolveReport:
    """Implicit scheme: backward induction from the terminal layer using
    eps[j] at the step from level j+1 to level j.

    ``terminal_z='psi'`` replaces the first step's z-formula by the terminal
    fixed point in z (g evaluated at the unknown z), for nonsmooth terminal
    functionals; the default uses the terminal gradient rule.
    """
    if terminal_z not in ("gradient", "psi"):
        raise InvalidArgumentError(f"unknown terminal_z option {terminal_z!r}")
    if terminal_z == "psi":
        return _solve_backward_psi(spec, grid, eps, keep_tree=keep_tree, tol=tol,
                                   max_iter=max_iter)
    return PreparedSolver(spec, grid, "implicit", tol, max_iter).report(eps, keep_tree)


def _solve_backward_psi(spec, grid, eps, *, keep_tree, tol, max_iter):
    """Variant solving the first step's z as a fixed point in z itself."""
    from .errors import NumericFailureError

    spec = validate_spec(spec, grid)
    eps = _check_eps(eps, grid.n)
    n = grid.n
    term = terminal_layer(spec, grid)
    sq = grid.sqrt_delta
    t_n = grid.times[n]
    yp, ym = term.y[1:], term.y[:-1]
    slope = (yp - ym) / (2.0 * sq)
    es = eps[n - 1]
    z = slope.copy()
    converged = False
    for _ in range(max_iter):
        z_new = slope + 0.5 * (
            np.asarray(spec.g.value(t_n, yp, z)) - np.asarray(spec.g.value(t_n, ym, z))
        ) * es
        if np.max(np.abs(z_new - z)) <= tol:
            z = z_new
            converged = True
            break
        z = z_new
    if not converged:
        raise NumericFailureError(
            "terminal psi fixed point did not converge", level=n - 1,
            residual=float(np.max(np.abs(z_new - z))),
        )
    gp = np.asarray(spec.g.value(t_n, yp, z), dtype=float)
    gm = np.asarray(spec.g.value(t_n, ym, z), dtype=float)
    rhs = 0.5 * (yp + ym) + 0.5 * sq * (gp + gm) * es
    fdesc = spec.f.kernel_descriptor(grid)
    gdesc = spec.g.kernel_descriptor(grid)
    y, iters0, resid0 = theta_invert_desc(
        fdesc, n - 1, grid.times[n - 1], z, rhs, grid.delta, tol, max_iter
    )
    if n == 1:
        y_flat = np.concatenate((y, term.y))
        z_flat = np.concatenate((z, term.z))
        iters, resid = iters0, resid0
    else:
        sub_y, sub_z, iters, resid = _backend.sweep_implicit(
            y, z, eps[: n - 1], grid.times, grid.delta, fdesc, gdesc, tol, max_iter
        )
        y_flat = np.concatenate((sub_y, term.y))
        z_flat = np.concatenate((sub_z, term.z))
        iters = max(iters, iters0)
        resid = max(resid, resid0)
    return SolveReport(
        y0=float(y_flat[0]), z0=float(z_flat[0]), fixed_point_iterations=int(iters),
        residual=float(resid), scheme="implicit", n=n,
        y_flat=y_flat if keep_tree else None, z_flat=z_flat if keep_tree else None,
    )


def scheme_residual(report: SolveReport, spec: ProblemSpec, grid: TimeGrid, eps) -> float:
    """Max violation of the one-step equation over all nodes and both
    forward branches (reconstructs level j+1 from level j values)."""
    if report.y_flat is None:
        raise InvalidArgumentError("scheme_residual needs a report with keep_tree")
    eps = _check_eps(eps, grid.n)
    sq = grid.sqrt_delta
    worst = 0.0
    levels = report.levels
    for j in range(grid.n):
        cur, nxt = levels[j], levels[j + 1]
        t_j, t_next = grid.times[j], grid.times[j + 1]
        fval = np.asarray(spec.f.value(t_j, cur.y, cur.z))
        for branch, (y_next, z_next) in (
            (+1.0, (nxt.y[1:], nxt.z[1:])),
            (-1.0, (nxt.y[:-1], nxt.z[:-1])),
        ):
            gval = np.asarray(spec.g.value(t_next, y_next, z_next))
            recon = y_next + fval * grid.delta + gval * sq * eps[j] - cur.z * sq * branch
            worst = max(worst, float(np.max(np.abs(cur.y - recon))))
    return worst


def values_along_beta(report: SolveReport, beta) -> tuple[np.ndarray, np.ndarray]:
    """Read (y_j, z_j) along one forward path; needs a kept tree.

    Returns y of length n+1 and z of length n (z at the visited node of
    levels 0..n-1)."""
    if report.y_flat is None:
        raise InvalidArgumentError("values_along_beta needs a report with keep_tree")
    beta = np.asarray(beta, dtype=float)
    n = report.n
    if beta.shape != (n,):
        raise InvalidArgumentError(f"beta must have length n={n}")
    ups = (beta > 0).astype(np.int64)
    idx = np.concatenate(([0], np.cumsum(ups)))
    offs = np.array([tri_offset(j) for j in range(n + 1)], dtype=np.int64)
    flat_idx = offs + idx
    return report.y_flat[flat_idx], report.z_flat[flat_idx[:n]]


def tree_rows(report: SolveReport, grid: TimeGrid):
    """Yield (level, node, W, y, z, scheme) rows for the tree-dump CSV."""
    if report.y_flat is None:
        raise InvalidArgumentError("tree dump needs a report with keep_tree")
    for j in range(report.n + 1):
        off = tri_offset(j)
        w = node_positions(grid, j)
        for i in range(j + 1):
            yield (j, i, w[i], report.y_flat[off + i], report.z_flat[off + i], report.scheme)
