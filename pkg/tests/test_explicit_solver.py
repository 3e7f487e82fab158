import math

import numpy as np
import pytest

from bdsde import (
    Coefficient,
    ProblemSpec,
    TerminalFunctional,
    builtin,
    make_grid,
    sample_path,
    solve_backward,
    solve_backward_explicit,
)
from bdsde.explicit_solver import apriori_gate, explicit_step, scheme_residual_explicit
from bdsde.tree_solver import LevelValues, implicit_step

from conftest import random_signs


def test_explicit_step_frozen_values():
    # f(y, z) = y, g = 0, delta = 0.1, next level (0, 2):
    # z = 2 / (2 sqrt(0.1)), y = 1 + f(1, z) * 0.1 = 1.1.
    grid = make_grid(0.1, 1)
    spec = ProblemSpec(
        f=Coefficient.linear(1.0, 0.0),
        g=Coefficient.zero(),
        phi=TerminalFunctional.identity(),
        K=1.0,
        alpha=0.5,
    )
    nxt = LevelValues(level=1, y=np.array([0.0, 2.0]), z=np.zeros(2))
    cur = explicit_step(nxt, +1.0, spec, grid)
    assert cur.z[0] == pytest.approx(3.1622776601683795, abs=1e-12)
    assert cur.y[0] == pytest.approx(1.1, abs=1e-15)


def test_explicit_equals_implicit_when_f_zero():
    grid = make_grid(1.0, 8)
    rng = np.random.default_rng(1)
    for name in ("transport", "time_integral", "zero"):
        spec = builtin(name)
        eps = random_signs(rng, 8)
        a = solve_backward(spec, grid, eps, keep_tree=True)
        b = solve_backward_explicit(spec, grid, eps, keep_tree=True)
        assert np.max(np.abs(a.y_flat - b.y_flat)) < 1e-14, name
        assert np.max(np.abs(a.z_flat - b.z_flat)) < 1e-14, name


def test_explicit_step_matches_implicit_step_zero_f():
    grid = make_grid(1.0, 1)
    spec = builtin("zero")
    nxt = LevelValues(level=1, y=np.array([-0.7, 1.3]), z=np.array([0.2, 0.4]))
    a = implicit_step(nxt, -1.0, spec, grid)
    b = explicit_step(nxt, -1.0, spec, grid)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.z, b.z)


def test_explicit_reconstruction_residual_sine():
    grid = make_grid(1.0, 16)
    spec = builtin("sine")
    eps = random_signs(np.random.default_rng(2), 16)
    report = solve_backward_explicit(spec, grid, eps, keep_tree=True)
    assert np.all(np.isfinite(report.y_flat))
    assert scheme_residual_explicit(report, spec, grid, eps) < 1e-12


def test_scheme_gap_decays_with_n():
    # Mean implicit-vs-explicit tree gap over sampled paths shrinks as delta
    # halves (at-least-linear decay of the scheme difference).  The root
    # itself sits on the model's odd-symmetry axis where both schemes give 0.
    spec = builtin("linear", a=0.3, b=0.0, c=0.2, d=0.0)
    gaps = []
    for n in (8, 16, 32):
        grid = make_grid(1.0, n)
        total = 0.0
        for i in range(100):
            eps = sample_path(grid, (77, n), index=i).eps
            a = solve_backward(spec, grid, eps, keep_tree=True)
            b = solve_backward_explicit(spec, grid, eps, keep_tree=True)
            total += np.max(np.abs(a.y_flat - b.y_flat))
        gaps.append(total / 100)
    assert gaps[1] < gaps[0]
    assert gaps[2] < gaps[1]


def test_apriori_gate():
    assert apriori_gate(builtin("zero"), make_grid(1.0, 2))
    assert not apriori_gate(builtin("sine"), make_grid(1.0, 8))  # (1+2+7)/8 >= 1


def test_explicit_report_tags_scheme():
    grid = make_grid(1.0, 4)
    report = solve_backward_explicit(builtin("zero"), grid, np.ones(4))
    assert report.scheme == "explicit"
    assert report.fixed_point_iterations == 0
