import numpy as np
import pytest

from bdsde import (
    EmptyReportError,
    InvalidArgumentError,
    brute_force_expectation,
    builtin,
    convergence_study,
    estimate,
    make_grid,
)
from bdsde.oracle import functional_root_y


def test_estimate_deterministic():
    grid = make_grid(1.0, 8)
    spec = builtin("linear")
    a = estimate(spec, grid, 500, seed=3)
    b = estimate(spec, grid, 500, seed=3)
    assert a.mean_y0 == b.mean_y0
    assert a.var_y0 == b.var_y0
    assert a.ci_halfwidth == b.ci_halfwidth


def test_estimate_rejects_zero_samples():
    grid = make_grid(1.0, 4)
    with pytest.raises(EmptyReportError):
        estimate(builtin("zero"), grid, 0, seed=0)


def test_estimate_rejects_unknown_scheme():
    grid = make_grid(1.0, 4)
    with pytest.raises(InvalidArgumentError):
        estimate(builtin("zero"), grid, 10, seed=0, scheme="newton")


def test_estimate_transport_is_exact():
    grid = make_grid(1.0, 8)
    report = estimate(builtin("transport"), grid, 200, seed=1)
    assert report.l2_error_vs_oracle is not None
    assert report.l2_error_vs_oracle <= 1e-20
    assert report.sq_error_y0 <= 1e-20
    # Y0 = B_T has mean 0, variance T; a healthy seed's CI covers 0
    assert abs(report.mean_y0) <= 5 * report.ci_halfwidth


def test_estimate_ci_formula():
    grid = make_grid(1.0, 6)
    report = estimate(builtin("linear"), grid, 300, seed=9)
    assert report.ci_halfwidth == pytest.approx(
        1.96 * np.sqrt(report.var_y0 / report.n_samples), rel=1e-12
    )


def test_estimate_explicit_and_picard_schemes_run():
    grid = make_grid(1.0, 6)
    spec = builtin("sine")
    a = estimate(spec, grid, 50, seed=2, scheme="explicit")
    b = estimate(spec, grid, 50, seed=2, scheme="picard")
    assert np.isfinite(a.mean_y0) and np.isfinite(b.mean_y0)
    assert a.scheme == "explicit" and b.scheme == "picard"


def test_estimate_consistent_with_brute_force():
    grid = make_grid(1.0, 8)
    spec = builtin("linear")
    exact = brute_force_expectation(spec, grid, functional_root_y)
    report = estimate(spec, grid, 20_000, seed=5)
    assert abs(report.mean_y0 - exact) <= 5 * report.ci_halfwidth


def test_ci_calibration_transport():
    # 95% CIs for mean of Y0 = B_T over independent runs should cover 0 in
    # at least 90% of 200 runs.
    grid = make_grid(1.0, 8)
    spec = builtin("transport")
    covered = 0
    for run in range(200):
        report = estimate(spec, grid, 128, seed=(1000, run))
        if abs(report.mean_y0) <= report.ci_halfwidth:
            covered += 1
    assert covered >= 180


def test_convergence_transport_at_floor():
    table = convergence_study(builtin("transport"), (8, 16, 32), samples=50, seed=4)
    assert all(row.error < 1e-12 for row in table.rows)
    assert table.slope is None


def test_convergence_rejects_bad_n_list():
    spec = builtin("sine")
    with pytest.raises(InvalidArgumentError):
        convergence_study(spec, (), samples=10, seed=0)
    with pytest.raises(InvalidArgumentError):
        convergence_study(spec, (16, 8), samples=10, seed=0)
    with pytest.raises(EmptyReportError):
        convergence_study(spec, (8, 16), samples=0, seed=0)


def test_convergence_sine_decays():
    table = convergence_study(builtin("sine"), (8, 64), samples=2000, seed=6)
    lo, hi = table.rows
    assert hi.error < lo.error
    assert hi.error + hi.ci_halfwidth < lo.error - lo.ci_halfwidth
    assert table.slope is not None and table.slope < 0


def test_estimate_keep_samples():
    grid = make_grid(1.0, 4)
    report = estimate(builtin("linear"), grid, 100, seed=7, keep_samples=True)
    assert report.samples.shape == (100,)
    assert report.mean_y0 == pytest.approx(float(np.mean(report.samples)), rel=1e-15)
