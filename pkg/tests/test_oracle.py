import math

import numpy as np
import pytest

from bdsde import (
    DivergentSeriesError,
    InvalidArgumentError,
    NoisePath,
    ResourceLimitError,
    StepTooCoarseError,
    apriori_bound_rhs,
    brute_force_expectation,
    builtin,
    exact_time_integral,
    exact_transport,
    gronwall_epsilon,
    make_grid,
    martingale_representation,
    sample_path,
    solve_backward,
)
from bdsde.oracle import (
    apriori_lhs,
    binomial_weights,
    functional_root_y,
    functional_root_y_squared,
    representation_error,
    run_oracle_checks,
    terminal_second_moment,
)


def _path(eps, beta):
    return NoisePath(eps=np.asarray(eps, float), beta=np.asarray(beta, float), seed=("manual", 0))


def test_exact_transport_hand_values():
    grid = make_grid(1.0, 4)
    sol = exact_transport(grid, _path([1, -1, 1, 1], [1, 1, -1, -1]))
    assert sol.y_path[0] == 1.0  # B_4 - B_0
    assert sol.y_path[4] == 0.0  # W_4 on this beta path
    np.testing.assert_array_equal(sol.z_path, np.ones(4))


def test_exact_transport_constant_path():
    grid = make_grid(2.0, 2)  # delta = 1
    sol = exact_transport(grid, _path([1, 1], [1, 1]))
    np.testing.assert_allclose(sol.y_path, [2.0, 2.0, 2.0], atol=0)


def test_exact_time_integral_hand_value():
    grid = make_grid(1.0, 4)
    sol = exact_time_integral(grid, _path([1, 1, 1, 1], [1, 1, 1, 1]))
    assert sol.y_path[0] == pytest.approx(1.25, abs=1e-15)
    assert sol.y_path[4] == 0.0
    np.testing.assert_array_equal(sol.z_path, np.zeros(4))


def test_exact_time_integral_sign_flip():
    grid = make_grid(1.0, 6)
    eps = np.array([1.0, -1.0, 1.0, 1.0, -1.0, -1.0])
    a = exact_time_integral(grid, _path(eps, np.ones(6)))
    b = exact_time_integral(grid, _path(-eps, np.ones(6)))
    np.testing.assert_allclose(a.y_path, -b.y_path, atol=0)


def test_brute_force_transport_mean_and_variance():
    grid = make_grid(1.0, 4)
    spec = builtin("transport")
    mean = brute_force_expectation(spec, grid, functional_root_y)
    second = brute_force_expectation(spec, grid, functional_root_y_squared)
    assert abs(mean) < 1e-15
    assert abs(second - 1.0) < 1e-14  # Var(B_T) = T = 1


def test_brute_force_zero_model_is_martingale():
    grid = make_grid(1.0, 6)
    assert abs(brute_force_expectation(builtin("zero"), grid, functional_root_y)) < 1e-15


def test_brute_force_cap():
    grid = make_grid(1.0, 13)
    with pytest.raises(ResourceLimitError):
        brute_force_expectation(builtin("zero"), grid, functional_root_y)


def test_gronwall_zero_rate():
    assert gronwall_epsilon(0.5, 0.0) == 1.0


def test_gronwall_close_to_e():
    assert abs(gronwall_epsilon(1e-3, 1.0) - math.e) <= 0.01


def test_gronwall_divergence_gate():
    with pytest.raises(DivergentSeriesError):
        gronwall_epsilon(0.5, 2.0)
    with pytest.raises(DivergentSeriesError):
        gronwall_epsilon(1.0, 1.0)


def test_gronwall_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        gronwall_epsilon(0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        gronwall_epsilon(0.5, -1.0)


def test_gronwall_error_decays_monotonically():
    errors = [abs(gronwall_epsilon(d, 1.0) - math.e) for d in (1e-2, 1e-3, 1e-4)]
    assert errors[0] > errors[1] > errors[2]


def test_gronwall_partial_sum_oracle():
    # direct evaluation of the first terms of the series
    delta, b = 0.1, 0.5
    expected = 1.0
    term = 1.0
    for p in range(1, 60):
        term = term * b / p * (1.0 + (p - 1) * delta) if p > 1 else b
        expected += term
    assert gronwall_epsilon(delta, b) == pytest.approx(expected, rel=1e-12)


def test_apriori_bound_rhs_frozen_value():
    # f(0,0)=g(0,0)=0, K=0, alpha=0.5, delta=0.25, E|xi|^2=1, T=1
    # -> (1 + 3*0.25*0.5) * e = 1.375 e.
    grid = make_grid(1.0, 4)
    spec = builtin("zero")  # K=0, alpha=0.5, f(0,0)=g(0,0)=0
    rhs = apriori_bound_rhs(spec, grid, xi_second_moment=1.0)
    assert rhs == pytest.approx(1.375 * math.e, abs=1e-12)
    assert rhs == pytest.approx(3.737637514, abs=1e-6)


def test_apriori_bound_zero_terminal():
    grid = make_grid(1.0, 4)
    assert apriori_bound_rhs(builtin("zero"), grid, 0.0) == 0.0


def test_apriori_bound_gate():
    grid = make_grid(1.0, 4)
    spec = builtin("linear", a=1.0, b=0.0, c=0.0, d=0.0)  # K=1 -> rate 10
    with pytest.raises(StepTooCoarseError):
        apriori_bound_rhs(spec, grid, 1.0)


def test_apriori_lhs_below_rhs_zero_model():
    grid = make_grid(1.0, 4)
    spec = builtin("zero")
    lhs = apriori_lhs(spec, grid)
    rhs = apriori_bound_rhs(spec, grid, terminal_second_moment(spec.phi, grid))
    assert lhs < rhs


def test_terminal_second_moment_identity():
    grid = make_grid(1.0, 8)
    spec = builtin("zero")
    assert terminal_second_moment(spec.phi, grid) == pytest.approx(1.0, abs=1e-14)


def test_binomial_weights_sum_to_one():
    for level in (0, 1, 5, 12):
        assert np.sum(binomial_weights(level)) == pytest.approx(1.0, abs=1e-15)


def test_martingale_representation_walk():
    grid = make_grid(1.0, 6)
    M, Z = martingale_representation(lambda w: w[-1], grid)
    # M_j must equal W_j: check the root and the exact representation
    assert M[0][0] == pytest.approx(0.0, abs=1e-15)
    for z_level in Z:
        np.testing.assert_allclose(z_level, 1.0, atol=1e-13)
    assert representation_error(M, Z, grid) < 1e-13


def test_martingale_representation_walk_squared():
    grid = make_grid(1.0, 6)
    M, Z = martingale_representation(lambda w: w[-1] ** 2, grid)
    assert representation_error(M, Z, grid) < 1e-12
    # closed form M_j = W_j^2 + (n - j) * delta at the root
    assert M[0][0] == pytest.approx(grid.T, abs=1e-13)
    # and at level 1: W_1 = +-sqrt(delta)
    expected = grid.delta + (grid.n - 1) * grid.delta
    np.testing.assert_allclose(M[1], expected, atol=1e-13)


def test_martingale_representation_constant():
    grid = make_grid(1.0, 5)
    M, Z = martingale_representation(lambda w: 4.5, grid)
    for m_level in M:
        np.testing.assert_array_equal(m_level, 4.5)
    for z_level in Z:
        np.testing.assert_array_equal(z_level, 0.0)


def test_martingale_representation_running_max():
    grid = make_grid(1.0, 8)
    M, Z = martingale_representation(lambda w: np.max(w), grid)
    assert representation_error(M, Z, grid) < 1e-12


def test_martingale_representation_cap():
    with pytest.raises(ResourceLimitError):
        martingale_representation(lambda w: w[-1], make_grid(1.0, 13))


def test_transport_solver_matches_exact_on_enumerated_paths():
    grid = make_grid(1.0, 6)
    spec = builtin("transport")
    from bdsde.grid_noise import enumerate_sign_sequences
    from bdsde.tree_solver import values_along_beta

    rng = np.random.default_rng(0)
    for eps in enumerate_sign_sequences(6):
        report = solve_backward(spec, grid, eps, keep_tree=True)
        beta = 2.0 * rng.integers(0, 2, size=6) - 1.0
        path = NoisePath(eps=eps, beta=beta, seed=("manual", 0))
        exact = exact_transport(grid, path)
        y_path, z_path = values_along_beta(report, beta)
        assert np.max(np.abs(y_path - exact.y_path)) < 1e-13
        assert np.max(np.abs(z_path - exact.z_path)) < 1e-13


def test_oracle_check_suite_passes():
    records = run_oracle_checks()
    assert records, "suite must not be empty"
    failures = [r for r in records if not r["pass"]]
    assert not failures, failures
    claims = {r["claim"] for r in records}
    assert any(c.startswith("martingale-representation") for c in claims)
    assert any(c.startswith("apriori-bound") for c in claims)
    assert "transport-exactness" in claims
