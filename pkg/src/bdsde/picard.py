"""Discrete Picard iteration with weighted-norm contraction diagnostics.

Each iteration is a fully explicit backward sweep with f and g frozen at the
previous iterate's tree; the implicit solution is a fixed point.  Distances
between successive iterates are measured in the exponentially weighted norm

    E[ sup_k gamma^(k*delta) |dy_k|^2
       + delta * sum_{k<n} gamma^(k*delta) |dz_k|^2 ]

with the expectation over forward paths: exact enumeration up to a cap,
common seeded sampling beyond it (the same path set is reused across
iterations so ratio sequences are not polluted by resampling noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._backend import tri_offset, tri_size
from .errors import InvalidArgumentError
from .grid_noise import TimeGrid, rng_stream
from .model import ProblemSpec, validate_spec
from .tree_solver import _check_eps, terminal_layer

#: largest n for exact forward-path enumeration inside the norm
NORM_ENUM_CAP = 12
DEFAULT_NORM_PATHS = 4096
RATIO_FLOOR = 1e-30


@dataclass(frozen=True, eq=False)
class PicardIterate:
    """One Picard iterate: full (y, z) trees in flat triangular storage."""

    p: int
    n: int
    y_flat: np.ndarray
    z_flat: np.ndarray

    @property
    def tree_y(self) -> tuple:
        return tuple(
            self.y_flat[tri_offset(j) : tri_offset(j) + j + 1] for j in range(self.n + 1)
        )

    @property
    def tree_z(self) -> tuple:
        return tuple(
            self.z_flat[tri_offset(j) : tri_offset(j) + j + 1] for j in range(self.n + 1)
        )

    def level(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        off = tri_offset(j)
        return self.y_flat[off : off + j + 1], self.z_flat[off : off + j + 1]


@dataclass(eq=False)
class ContractionDiagnostics:
    """Per-iteration weighted norms of successive differences.

    ``ratios[p]`` is norms[p]/norms[p-1] (nan when undefined, i.e. p = 0 or
    the denominator is below the numeric floor).  ``norms_gamma1`` repeats
    the sequence with unit weights for comparison.
    """

    norms: np.ndarray
    ratios: np.ndarray
    alpha_base: float
    delta: float
    converged: bool
    iterations: int
    norms_gamma1: np.ndarray


def zero_iterate(grid: TimeGrid) -> PicardIterate:
    """The starting iterate: identically zero trees (including terminal)."""
    size = tri_size(grid.n)
    return PicardIterate(p=0, n=grid.n, y_flat=np.zeros(size), z_flat=np.zeros(size))


def iterate_from_flats(p: int, n: int, y_flat, z_flat) -> PicardIterate:
    y_flat = np.ascontiguousarray(y_flat, dtype=float)
    z_flat = np.ascontiguousarray(z_flat, dtype=float)
    if y_flat.shape != (tri_size(n),) or z_flat.shape != (tri_size(n),):
        raise InvalidArgumentError("flat trees must have (n+1)(n+2)/2 entries")
    return PicardIterate(p=p, n=n, y_flat=y_flat, z_flat=z_flat)


def picard_step(prev: PicardIterate, spec: ProblemSpec, grid: TimeGrid, eps) -> PicardIterate:
    """One sweep of the frozen-coefficient recursion; the terminal layer is
    pinned to the terminal functional and its gradient z."""
    spec = validate_spec(spec, grid)
    eps = _check_eps(eps, grid.n)
    if prev.n != grid.n:
        raise InvalidArgumentError("previous iterate is on a different grid")
    term = terminal_layer(spec, grid)
    y_flat, z_flat = _backend.sweep_picard(
        term.y,
        term.z,
        prev.y_flat,
        prev.z_flat,
        eps,
        grid.times,
        grid.delta,
        spec.f.kernel_descriptor(grid),
        spec.g.kernel_descriptor(grid),
    )
    return PicardIterate(p=prev.p + 1, n=grid.n, y_flat=y_flat, z_flat=z_flat)


def _forward_path_nodes(n: int, enum_cap: int, n_paths: int, seed) -> np.ndarray:
    """Index matrix (paths, n+1) of visited node indices per level.

    Exact enumeration of all 2**n paths when n <= enum_cap, otherwise
    ``n_paths`` sampled paths from a seeded stream.
    """
    if n <= enum_cap:
        m = np.arange(1 << n, dtype=np.int64)[:, None]
        ups = 1 - ((m >> (n - 1 - np.arange(n))) & 1)
    else:
        rng = rng_stream(("picard-norm", seed))
        ups = rng.integers(0, 2, size=(n_paths, n))
    idx = np.zeros((ups.shape[0], n + 1), dtype=np.int64)
    np.cumsum(ups, axis=1, out=idx[:, 1:])
    return idx


class _NormEvaluator:
    """Weighted norm over a fixed forward-path set (gather indices cached)."""

    def __init__(self, grid: TimeGrid, gamma: float, enum_cap: int = NORM_ENUM_CAP,
                 n_paths: int = DEFAULT_NORM_PATHS, seed=0):
        if gamma <= 0.0:
            raise InvalidArgumentError(f"gamma must be positive, got {gamma}")
        n = grid.n
        idx = _forward_path_nodes(n, enum_cap, n_paths, seed)
        offs = np.array([tri_offset(j) for j in range(n + 1)], dtype=np.int64)
        self._gather = offs[None, :] + idx
        self._weights = gamma ** (np.arange(n + 1) * grid.delta)
        self._delta = grid.delta
        self._n = n

    def __call__(self, dy_flat: np.ndarray, dz_flat: np.ndarray) -> float:
        y_paths = dy_flat[self._gather]
        z_paths = dz_flat[self._gather[:, : self._n]]
        sup_term = np.max(self._weights * y_paths**2, axis=1)
        z_term = self._delta * np.sum(self._weights[: self._n] * z_paths**2, axis=1)
        return float(np.mean(sup_term + z_term))


def weighted_norm(diff_y, diff_z, gamma: float, grid: TimeGrid, *,
                  enum_cap: int = NORM_ENUM_CAP, n_paths: int = DEFAULT_NORM_PATHS,
                  seed=0) -> float:
    """Weighted norm of a (dy, dz) tree pair; accepts per-level arrays or
    flat triangular storage."""
    dy = _to_flat(diff_y, grid.n)
    dz = _to_flat(diff_z, grid.n)
    return _NormEvaluator(grid, gamma, enum_cap, n_paths, seed)(dy, dz)


def _to_flat(tree, n: int) -> np.ndarray:
    if isinstance(tree, np.ndarray) and tree.ndim == 1 and tree.shape == (tri_size(n),):
        return tree
    parts = [np.asarray(level, dtype=float) for level in tree]
    if len(parts) != n + 1 or any(len(p) != j + 1 for j, p in enumerate(parts)):
        raise InvalidArgumentError("tree must have levels 0..n with j+1 entries each")
    return np.concatenate(parts)


def picard_solve(spec: ProblemSpec, grid: TimeGrid, eps, *, p_max: int = 50,
                 tol: float = 1e-16, gamma: float = math.e,
                 enum_cap: int = NORM_ENUM_CAP, n_paths: int = DEFAULT_NORM_PATHS,
                 seed=0) -> tuple[PicardIterate, ContractionDiagnostics]:
    """Iterate until the weighted norm of the increment drops below ``tol``
    (squared norm) or ``p_max`` sweeps.

    Non-convergence is reported through the diagnostics, not raised.
    """
    spec = validate_spec(spec, grid)
    eps = _check_eps(eps, grid.n)
    norm_g = _NormEvaluator(grid, gamma, enum_cap, n_paths, seed)
    norm_1 = _NormEvaluator(grid, 1.0, enum_cap, n_paths, seed)
    prev = zero_iterate(grid)
    norms: list[float] = []
    norms1: list[float] = []
    converged = False
    cur = prev
    for _ in range(p_max):
        cur = picard_step(prev, spec, grid, eps)
        dy = cur.y_flat - prev.y_flat
        dz = cur.z_flat - prev.z_flat
        norms.append(norm_g(dy, dz))
        norms1.append(norm_1(dy, dz))
        if norms[-1] < tol:
            converged = True
            break
        prev = cur
    norms_arr = np.asarray(norms)
    ratios = np.full(len(norms), np.nan)
    for i in range(1, len(norms)):
        if norms_arr[i - 1] > RATIO_FLOOR:
            ratios[i] = norms_arr[i] / norms_arr[i - 1]
    diags = ContractionDiagnostics(
        norms=norms_arr,
        ratios=ratios,
        alpha_base=gamma,
        delta=grid.delta,
        converged=converged,
        iterations=len(norms),
        norms_gamma1=np.asarray(norms1),
    )
    return cur, diags
