"""Surfaces u(t, x) via the probabilistic representation: a forward lattice
for the state plus backward induction with coefficients evaluated at the
node's state value.

The forward diffusion is restricted to constant volatility so the lattice
recombines; affine drift is carried as a per-level deterministic shift
(exact for drift constant in x, first-order frozen-at-center otherwise).
In this mode the first coefficient slot is the forward state X, not time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels_py import theta_invert_desc
from .errors import InvalidArgumentError, UnsupportedModelError
from .grid_noise import TimeGrid, make_grid
from .model import Coefficient, ProblemSpec, TerminalFunctional, validate_spec
from .tree_solver import DEFAULT_MAX_ITER, DEFAULT_TOL, gradient_z, node_positions


@dataclass(frozen=True, eq=False)
class ForwardSpec:
    """Forward diffusion dX = (b0 + b1*X) dt + sigma dW and terminal h(X_T).

    ``h_kind`` is one of identity, constant, square, call.
    """

    b0: float = 0.0
    b1: float = 0.0
    sigma: float = 1.0
    h_kind: str = "identity"
    h_param: float = 0.0

    def __post_init__(self):
        if not np.isscalar(self.sigma) or isinstance(self.sigma, str):
            raise UnsupportedModelError("sigma must be a constant scalar")
        if float(self.sigma) <= 0.0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if self.h_kind not in ("identity", "constant", "square", "call"):
            raise InvalidArgumentError(f"unknown terminal h kind {self.h_kind!r}")

    def h(self, x):
        x = np.asarray(x, dtype=float)
        if self.h_kind == "identity":
            return x
        if self.h_kind == "constant":
            return np.full_like(x, self.h_param)
        if self.h_kind == "square":
            return x**2
        return np.maximum(x - self.h_param, 0.0)


@dataclass(frozen=True, eq=False)
class Surface:
    """u(t_start, x) over an x-grid for the realized eps-path."""

    x_grid: np.ndarray
    u: np.ndarray
    path_tag: str


def spec_from_coefficients(f: Coefficient, g: Coefficient) -> ProblemSpec:
    """Wrap state-evaluated coefficients into a spec with conservative
    Lipschitz metadata derived from the declarative kinds."""
    def _k(c: Coefficient) -> float:
        if c.kind == "linear_yz":
            return max(abs(c.a), abs(c.b))
        if c.kind == "scaled_sine":
            return abs(c.a)
        if c.kind == "tabulated_affine":
            return max(max(abs(v) for v in c.a_values), max(abs(v) for v in c.b_values))
        return 0.0

    alpha = abs(g.b) if g.kind == "linear_yz" and g.b != 0.0 else 0.5
    exactness_only = alpha >= 1.0
    return ProblemSpec(
        f=f,
        g=g,
        phi=TerminalFunctional.constant(0.0),
        K=max(_k(f), _k(g)),
        alpha=alpha,
        name="spde",
        exactness_only=exactness_only,
    )


def _forward_lattice(fwd: ForwardSpec, x: float, grid: TimeGrid) -> list[np.ndarray]:
    """State values per (level, node): x + drift shift d_j + sigma*W-node,
    with d_{j+1} = d_j + (b0 + b1*(x + d_j)) * delta."""
    shifts = np.empty(grid.n + 1)
    shifts[0] = 0.0
    for j in range(grid.n):
        shifts[j + 1] = shifts[j] + (fwd.b0 + fwd.b1 * (x + shifts[j])) * grid.delta
    return [
        x + shifts[j] + fwd.sigma * node_positions(grid, j) for j in range(grid.n + 1)
    ]


def _solve_state_tree(fwd: ForwardSpec, spec: ProblemSpec, grid: TimeGrid,
                      x: float, eps, tol: float, max_iter: int) -> float:
    """Backward induction with f, g evaluated at (X-node, y, z); returns the
    root y."""
    X = _forward_lattice(fwd, x, grid)
    sq = grid.sqrt_delta
    # terminal value and slope along the node axis (z approximates sigma * du/dx)
    y_next = np.asarray(fwd.h(X[grid.n]), dtype=float)
    z_next = gradient_z(y_next, sq)
    fdesc = spec.f.kernel_descriptor(grid)
    for j in range(grid.n - 1, -1, -1):
        yp, ym = y_next[1:], y_next[:-1]
        zp, zm = z_next[1:], z_next[:-1]
        x_next = X[j + 1]
        gp = np.asarray(spec.g.value(x_next[1:], yp, zp), dtype=float)
        gm = np.asarray(spec.g.value(x_next[:-1], ym, zm), dtype=float)
        gp, gm = np.broadcast_to(gp, yp.shape), np.broadcast_to(gm, ym.shape)
        z = (yp - ym) / (2.0 * sq) + 0.5 * (gp - gm) * eps[j]
        rhs = 0.5 * (yp + ym) + 0.5 * sq * (gp + gm) * eps[j]
        if not spec.f.depends_y:
            fval = np.asarray(spec.f.value(X[j], rhs, z), dtype=float)
            y = rhs + fval * grid.delta
        elif spec.f.kind == "linear_yz":
            y = (rhs + spec.f.b * z * grid.delta) / (1.0 - spec.f.a * grid.delta)
        else:
            # state-independent nonlinear f: reuse the contraction inversion
            y, _, _ = theta_invert_desc(fdesc, j, grid.times[j], z, rhs,
                                        grid.delta, tol, max_iter)
        y_next, z_next = np.asarray(y, dtype=float), z
    return float(y_next[0])


def u_surface(fwd: ForwardSpec, spec: ProblemSpec, grid: TimeGrid, x_grid, eps,
              *, t_index: int = 0, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, path_tag: str = "") -> Surface:
    """u(t_{t_index}, x) per x, for the given eps-path.

    ``t_index > 0`` starts the forward lattice at t_{t_index} and consumes
    the eps-suffix eps[t_index:], i.e. the surface conditioned on the
    remaining backward noise.
    """
    spec = validate_spec(spec, grid)
    eps = np.ascontiguousarray(eps, dtype=float)
    if eps.shape != (grid.n,):
        raise InvalidArgumentError(f"eps must have length n={grid.n}")
    if not (0 <= t_index <= grid.n - 1):
        raise InvalidArgumentError(f"t_index must be in [0, n-1], got {t_index}")
    x_grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if not np.all(np.isfinite(x_grid)):
        raise InvalidArgumentError("x_grid must be finite")
    if t_index == 0:
        sub_grid, sub_eps = grid, eps
    else:
        sub_grid = make_grid(grid.T - grid.times[t_index], grid.n - t_index)
        sub_eps = eps[t_index:]
    u = np.array(
        [
            _solve_state_tree(fwd, spec, sub_grid, float(x), sub_eps, tol, max_iter)
            for x in x_grid
        ]
    )
    return Surface(x_grid=x_grid, u=u, path_tag=path_tag)
