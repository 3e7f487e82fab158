"""Ground truth: closed forms, exhaustive-enumeration expectations, the
discrete Gronwall series, the second-moment a-priori bound, and the discrete
martingale-representation check.

Everything here is independent of the solver code paths it is used to
verify: expectations come from explicit enumeration with exact probability
weights, closed forms from the models' algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DivergentSeriesError,
    InvalidArgumentError,
    ResourceLimitError,
    StepTooCoarseError,
)
from .grid_noise import NoisePath, TimeGrid, enumerate_sign_sequences, make_grid, walk_values
from .model import ProblemSpec, TerminalFunctional
from .tree_solver import PreparedSolver, SolveReport

#: cap for oracles that enumerate one full sign sequence per solver run
JOINT_ENUMERATION_CAP = 12


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Exact (Y, Z) along one realized noise path: Y has n+1 entries, Z has
    n (levels 0..n-1)."""

    y_path: np.ndarray
    z_path: np.ndarray


def exact_transport(grid: TimeGrid, path: NoisePath) -> ExactSolution:
    """Closed form for the pure-transport model: Y_j = (B_n - B_j) + W_j,
    Z identically 1."""
    walks = walk_values(path, grid)
    y = (walks.B[-1] - walks.B) + walks.W
    return ExactSolution(y_path=y, z_path=np.ones(grid.n))


def exact_time_integral(grid: TimeGrid, path: NoisePath) -> ExactSolution:
    """Closed form for the backward time integral: Y_j is the tail sum
    sqrt(delta) * sum_{m>=j} t_{m+1} * eps_{m+1}, Z identically 0."""
    increments = grid.sqrt_delta * grid.times[1:] * path.eps
    y = np.concatenate((np.cumsum(increments[::-1])[::-1], [0.0]))
    return ExactSolution(y_path=y, z_path=np.zeros(grid.n))


def functional_root_y(report: SolveReport, grid: TimeGrid, eps) -> float:
    return report.y0


def functional_root_y_squared(report: SolveReport, grid: TimeGrid, eps) -> float:
    return report.y0**2


def brute_force_expectation(spec: ProblemSpec, grid: TimeGrid,
                            functional: Callable[[SolveReport, TimeGrid, np.ndarray], float],
                            solver: str = "implicit",
                            cap: int = JOINT_ENUMERATION_CAP) -> float:
    """Exact expectation of a per-run statistic under the discrete law.

    Enumerates all 2**n backward sign sequences with weight 2**-n each and
    runs the chosen scheme per sequence; the solved tree already integrates
    over the forward signs, so functionals may take forward expectations via
    node weights.
    """
    if grid.n > cap:
        raise ResourceLimitError(
            f"brute force over 2**{grid.n} sequences exceeds the cap n <= {cap}"
        )
    prepared = PreparedSolver(spec, grid, scheme=solver)
    values = [
        functional(prepared.report(eps, keep_tree=True), grid, eps)
        for eps in enumerate_sign_sequences(grid.n, cap=cap)
    ]
    return float(np.mean(values))


def binomial_weights(level: int) -> np.ndarray:
    """Forward-path probabilities of the recombining-tree nodes at a level."""
    return np.array([math.comb(level, i) for i in range(level + 1)]) / 2.0**level


def level_second_moments(report: SolveReport, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-level E|y_j|^2 and E|z_j|^2 over forward paths (exact, via node
    weights), for a kept tree."""
    if report.y_flat is None:
        raise InvalidArgumentError("level_second_moments needs a kept tree")
    ey = np.empty(grid.n + 1)
    ez = np.empty(grid.n + 1)
    for j, lv in enumerate(report.levels):
        w = binomial_weights(j)
        ey[j] = float(np.dot(w, lv.y**2))
        ez[j] = float(np.dot(w, lv.z**2))
    return ey, ez


def apriori_lhs(spec: ProblemSpec, grid: TimeGrid, cap: int = JOINT_ENUMERATION_CAP) -> float:
    """Exact sup_j E|y_j|^2 + delta * sum_{j=0..n} E|z_j|^2 for the explicit
    scheme, averaging over all backward sequences and forward node weights."""
    if grid.n > cap:
        raise ResourceLimitError(
            f"enumeration over 2**{grid.n} sequences exceeds the cap n <= {cap}"
        )
    prepared = PreparedSolver(spec, grid, scheme="explicit")
    acc_y = np.zeros(grid.n + 1)
    acc_z = np.zeros(grid.n + 1)
    count = 0
    for eps in enumerate_sign_sequences(grid.n, cap=cap):
        ey, ez = level_second_moments(prepared.report(eps, keep_tree=True), grid)
        acc_y += ey
        acc_z += ez
        count += 1
    acc_y /= count
    acc_z /= count
    return float(np.max(acc_y) + grid.delta * np.sum(acc_z))


def terminal_second_moment(phi: TerminalFunctional, grid: TimeGrid,
                           cap: int = JOINT_ENUMERATION_CAP) -> float:
    """Exact E|xi|^2 of the terminal functional under the walk law."""
    from .tree_solver import node_positions

    if phi.terminal_only:
        w = binomial_weights(grid.n)
        vals = np.asarray(phi.terminal_value(node_positions(grid, grid.n)), dtype=float)
        return float(np.dot(w, vals**2))
    if grid.n > cap:
        raise ResourceLimitError(
            f"enumeration over 2**{grid.n} paths exceeds the cap n <= {cap}"
        )
    total = [
        phi.path_value(np.concatenate(([0.0], grid.sqrt_delta * np.cumsum(beta))), grid) ** 2
        for beta in enumerate_sign_sequences(grid.n, cap=cap)
    ]
    return float(np.mean(total))


def gronwall_epsilon(delta: float, b: float, rtol: float = 1e-16,
                     max_terms: int = 10**6) -> float:
    """Partial sums of the discrete-Gronwall amplification series
    1 + sum_p b^p/p! * (1+delta)...(1+(p-1)delta); requires b*delta < 1.

    Terms follow term_{p+1} = term_p * b * (1 + p*delta) / (p + 1); summation
    stops once the next term is below rtol times the accumulated value.
    """
    if delta <= 0.0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    if b < 0.0:
        raise InvalidArgumentError(f"rate must be nonnegative, got {b}")
    if b == 0.0:
        return 1.0
    if b * delta >= 1.0:
        raise DivergentSeriesError(
            f"series diverges for b*delta = {b * delta:g} >= 1"
        )
    total = 1.0
    term = b
    p = 1
    while term >= rtol * total:
        total += term
        term = term * b * (1.0 + p * delta) / (p + 1.0)
        p += 1
        if p > max_terms:
            break
    return total


def _origin_magnitude(coeff, grid: TimeGrid) -> float:
    """sup over grid times of |coefficient(t, 0, 0)|; constant when the
    coefficient is time-independent."""
    vals = np.abs(np.asarray(coeff.value(grid.times, 0.0, 0.0), dtype=float))
    return float(np.max(vals))


def apriori_bound_rhs(spec: ProblemSpec, grid: TimeGrid, xi_second_moment: float) -> float:
    """Right-hand side of the explicit-scheme second-moment bound:
    C * exp((1 + 2K + 7K^2) * T) with
    C = |f(0,0)|^2 + 3|g(0,0)|^2
        + (1 + K*delta + 3K^2*delta + 3*alpha^2*sqrt(delta)) * E|xi|^2.

    Requires (1 + 2K + 7K^2) * delta < 1.  For time-dependent coefficients
    the origin values are taken as sups over grid times.
    """
    rate = 1.0 + 2.0 * spec.K + 7.0 * spec.K**2
    if rate * grid.delta >= 1.0:
        minimal_n = math.floor(rate * grid.T) + 1
        raise StepTooCoarseError(
            f"(1+2K+7K^2)*delta = {rate * grid.delta:g} >= 1; need n >= {minimal_n}",
            minimal_n=minimal_n,
        )
    f0 = _origin_magnitude(spec.f, grid)
    g0 = _origin_magnitude(spec.g, grid)
    c = (
        f0**2
        + 3.0 * g0**2
        + (
            1.0
            + spec.K * grid.delta
            + 3.0 * spec.K**2 * grid.delta
            + 3.0 * spec.alpha**2 * grid.sqrt_delta
        )
        * xi_second_moment
    )
    return float(c * math.exp(rate * grid.T))


def martingale_representation(terminal_rv: Callable[[np.ndarray], float],
                              grid: TimeGrid,
                              cap: int = JOINT_ENUMERATION_CAP) -> tuple[list, list]:
    """Discrete martingale representation on the forward path tree.

    ``terminal_rv`` maps a W-path (n+1 values) to a real.  Returns per-level
    arrays (M, Z) indexed by path prefix (most-significant bit first, bit 0
    meaning +1): M_j is the conditional expectation of the terminal value
    given the prefix, Z_j = (M_{j+1}^+ - M_{j+1}^-) / (2 sqrt(delta)), and
    M_{j+1} - M_j = Z_j * sqrt(delta) * beta_{j+1} holds identically.
    """
    n = grid.n
    if n > cap:
        raise ResourceLimitError(
            f"path tree with 2**{n} leaves exceeds the cap n <= {cap}"
        )
    m = np.arange(1 << n, dtype=np.int64)[:, None]
    signs = 1.0 - 2.0 * ((m >> (n - 1 - np.arange(n))) & 1)
    w_paths = np.concatenate(
        (np.zeros((1 << n, 1)), grid.sqrt_delta * np.cumsum(signs, axis=1)), axis=1
    )
    M = [None] * (n + 1)
    M[n] = np.array([float(terminal_rv(w_paths[p])) for p in range(1 << n)])
    Z = [None] * n
    for j in range(n - 1, -1, -1):
        plus = M[j + 1][0::2]
        minus = M[j + 1][1::2]
        M[j] = 0.5 * (plus + minus)
        Z[j] = (plus - minus) / (2.0 * grid.sqrt_delta)
    return M, Z


def representation_error(M: Sequence[np.ndarray], Z: Sequence[np.ndarray],
                         grid: TimeGrid) -> float:
    """Max violation of M_{j+1} - M_j = Z_j sqrt(delta) beta_{j+1} over the
    whole path tree."""
    worst = 0.0
    sq = grid.sqrt_delta
    for j in range(len(Z)):
        plus = M[j + 1][0::2] - M[j] - Z[j] * sq
        minus = M[j + 1][1::2] - M[j] + Z[j] * sq
        worst = max(worst, float(np.max(np.abs(plus))), float(np.max(np.abs(minus))))
    return worst


def run_oracle_checks() -> list[dict]:
    """The oracle invariant suite as JSON-ready records
    (claim id, lhs, rhs, pass)."""
    import warnings

    from .model import ExactnessOnlyWarning, builtin, registry_keys
    from .tree_solver import node_positions

    records = []

    def record(claim, lhs, rhs, ok):
        records.append(
            {"claim": claim, "lhs": float(lhs), "rhs": float(rhs), "pass": bool(ok)}
        )

    # discrete martingale representation is exact on the path tree
    grid = make_grid(1.0, 8)
    for label, rv in (
        ("terminal-walk", lambda w: w[-1]),
        ("terminal-walk-squared", lambda w: w[-1] ** 2),
        ("running-max", lambda w: np.max(w)),
    ):
        M, Z = martingale_representation(rv, grid)
        err = representation_error(M, Z, grid)
        record(f"martingale-representation/{label}", err, 1e-12, err < 1e-12)

    # Gronwall series approaches e^b from above as delta shrinks
    errors = [abs(gronwall_epsilon(d, 1.0) - math.e) for d in (1e-2, 1e-3, 1e-4)]
    record("gronwall-monotone-error", errors[2], errors[0],
           errors[0] > errors[1] > errors[2])
    record("gronwall-limit", errors[1], 0.01, errors[1] <= 0.01)

    # transport: scheme values equal the closed form at every node, every eps
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExactnessOnlyWarning)
        spec = builtin("transport")
        grid = make_grid(1.0, 8)
        prepared = PreparedSolver(spec, grid)
        worst = 0.0
        for eps in enumerate_sign_sequences(grid.n):
            report = prepared.report(eps, keep_tree=True)
            tail = grid.sqrt_delta * np.concatenate(
                (np.cumsum(eps[::-1])[::-1], [0.0])
            )
            for j, lv in enumerate(report.levels):
                expected = node_positions(grid, j) + tail[j]
                worst = max(worst, float(np.max(np.abs(lv.y - expected))))
                worst = max(worst, float(np.max(np.abs(lv.z - 1.0))))
        record("transport-exactness", worst, 1e-12, worst < 1e-12)

    # second-moment bound for the explicit scheme on gated admissible models
    for key in registry_keys():
        spec = builtin(key)
        if spec.exactness_only:
            continue
        for n in (2, 4, 8):
            grid = make_grid(1.0, n)
            if (1.0 + 2.0 * spec.K + 7.0 * spec.K**2) * grid.delta >= 1.0:
                continue
            lhs = apriori_lhs(spec, grid)
            rhs = apriori_bound_rhs(spec, grid, terminal_second_moment(spec.phi, grid))
            record(f"apriori-bound/{key}/n={n}", lhs, rhs, lhs < rhs)

    # walk law by enumeration
    grid = make_grid(1.0, 10)
    w_terminal = np.array(
        [grid.sqrt_delta * np.sum(beta) for beta in enumerate_sign_sequences(grid.n)]
    )
    record("walk-mean", abs(float(np.mean(w_terminal))), 1e-14,
           abs(float(np.mean(w_terminal))) < 1e-14)
    record("walk-variance", abs(float(np.mean(w_terminal**2)) - grid.T), 1e-14,
           abs(float(np.mean(w_terminal**2)) - grid.T) < 1e-14)

    return records
