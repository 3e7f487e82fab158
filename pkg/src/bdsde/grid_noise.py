"""Time grids, scaled +-1 random walks, and exhaustive sign-path enumeration.

Two independent Bernoulli sign sequences drive everything: ``eps`` feeds the
backward walk B, ``beta`` feeds the forward walk W.  Both walks move by
exactly +-sqrt(delta) per step, so all grid moments are exact rationals in
delta and can be checked by enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import InvalidArgumentError, ResourceLimitError

#: Hard cap on exhaustive sign-sequence enumeration (2**20 ~ 1e6 paths).
ENUMERATION_CAP = 20


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform partition of [0, T] into n steps of width delta = T/n."""

    T: float
    n: int
    delta: float
    times: np.ndarray  # t_j = j*delta for j = 0..n

    @property
    def sqrt_delta(self) -> float:
        return math.sqrt(self.delta)


@dataclass(frozen=True, eq=False)
class NoisePath:
    """One joint realization of the two sign sequences.

    ``eps`` drives B (backward noise), ``beta`` drives W (forward noise);
    both hold exactly +-1.0 and are sampled with P(+1) = P(-1) = 1/2.
    """

    eps: np.ndarray
    beta: np.ndarray
    seed: tuple


@dataclass(frozen=True, eq=False)
class WalkValues:
    """Prefix sums of the two sign sequences scaled by sqrt(delta)."""

    B: np.ndarray  # length n+1, B[0] = 0
    W: np.ndarray  # length n+1, W[0] = 0


def make_grid(T: float, n: int) -> TimeGrid:
    """Build the uniform grid; T must be positive and n a positive integer."""
    if not (isinstance(n, (int, np.integer)) and not isinstance(n, bool)):
        raise InvalidArgumentError(f"step count must be an integer, got {n!r}")
    if n < 1:
        raise InvalidArgumentError(f"step count must be >= 1, got {n}")
    T = float(T)
    if not (T > 0.0) or not math.isfinite(T):
        raise InvalidArgumentError(f"horizon must be positive and finite, got {T}")
    delta = T / n
    times = np.arange(n + 1, dtype=np.float64) * delta
    return TimeGrid(T=T, n=int(n), delta=delta, times=_readonly(times))


def _entropy(seed):
    """Normalize a seed token (int, str, or tuple of those) to ints."""
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, str):
        return int.from_bytes(seed.encode(), "little")
    if isinstance(seed, (tuple, list)):
        return [_entropy(part) for part in seed]
    raise InvalidArgumentError(f"unsupported seed token {seed!r}")


def rng_stream(seed, index: int = 0) -> np.random.Generator:
    """Counter-based generator for substream ``index`` of ``seed``.

    Streams for distinct (seed, index) pairs are statistically independent,
    so Monte-Carlo batches are order-independent and parallelizable.
    """
    if seed is None:
        raise InvalidArgumentError("seed must not be None")
    ss = np.random.SeedSequence(entropy=_entropy(seed), spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def sample_path(grid: TimeGrid, seed, index: int = 0) -> NoisePath:
    """Sample the two independent sign sequences for one experiment.

    The same (seed, index) always yields the identical path; ``eps`` is drawn
    before ``beta`` from the substream.
    """
    rng = rng_stream(seed, index)
    eps = 2.0 * rng.integers(0, 2, size=grid.n) - 1.0
    beta = 2.0 * rng.integers(0, 2, size=grid.n) - 1.0
    return NoisePath(eps=_readonly(eps), beta=_readonly(beta), seed=(seed, index))


def walk_values(path: NoisePath, grid: TimeGrid) -> WalkValues:
    """Scaled prefix sums B_j = sqrt(delta) * sum(eps[:j]), same for W."""
    if len(path.eps) != grid.n or len(path.beta) != grid.n:
        raise InvalidArgumentError(
            f"path length {len(path.eps)} does not match grid n={grid.n}"
        )
    sq = grid.sqrt_delta
    B = np.concatenate(([0.0], sq * np.cumsum(path.eps)))
    W = np.concatenate(([0.0], sq * np.cumsum(path.beta)))
    return WalkValues(B=_readonly(B), W=_readonly(W))


def enumerate_sign_sequences(n: int, cap: int = ENUMERATION_CAP) -> Iterator[np.ndarray]:
    """Yield all 2**n sign sequences once, in lexicographic order (+1 < -1).

    Sequence m maps bit (n-1-j) of m to entry j, bit 0 meaning +1; the
    ordering is stable so golden files stay comparable.
    """
    if n < 0:
        raise InvalidArgumentError(f"step count must be >= 0, got {n}")
    if n > cap:
        raise ResourceLimitError(
            f"enumeration of 2**{n} sequences exceeds the cap n <= {cap}"
        )
    shifts = n - 1 - np.arange(n)

    def _gen():
        for m in range(1 << n):
            yield _readonly(1.0 - 2.0 * ((m >> shifts) & 1))

    return _gen()
