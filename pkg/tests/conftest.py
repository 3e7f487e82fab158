import numpy as np
import pytest

from bdsde.model import ExactnessOnlyWarning, builtin, registry_keys


@pytest.fixture(autouse=True)
def _quiet_exactness_only_warning():
    """The transport model intentionally sits outside (H.1); silence the
    advisory warning in tests that are not about it."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExactnessOnlyWarning)
        yield


@pytest.fixture
def all_builtins():
    return [builtin(key) for key in registry_keys()]


def bisect_root(fn, lo, hi, tol=1e-14, max_iter=200):
    """Plain bisection; independent oracle for monotone one-dimensional
    equations."""
    flo, fhi = fn(lo), fn(hi)
    assert flo * fhi <= 0, "root not bracketed"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if abs(hi - lo) < tol:
            return mid
        if flo * fmid <= 0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def random_signs(rng, n):
    return 2.0 * rng.integers(0, 2, size=n) - 1.0
