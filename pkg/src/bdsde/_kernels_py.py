"""Pure-numpy backward-induction kernels (fallback backend).

Trees are stored flat in triangular layout: level j occupies offsets
tri_offset(j) .. tri_offset(j)+j, node i at level j having walk value
(2i - j) * sqrt(delta).  The compiled backend in ``_kernels.pyx`` implements
the same three sweeps with identical arithmetic.

Coefficient descriptors are the 5-tuples produced by
``Coefficient.kernel_descriptor``: (kind code, p0, p1, a table, b table),
with tables indexed by the grid time index.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericFailureError


def tri_offset(j: int) -> int:
    return j * (j + 1) // 2


def tri_size(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def coeff_eval(desc, j, t, y, z):
    """Evaluate a coefficient descriptor at time index j / time t."""
    code, p0, p1, ta, tb = desc
    if code == 0:
        return 0.0
    if code == 1:
        return p0
    if code == 2:
        return p0 * y + p1 * z
    if code == 3:
        return t
    if code == 4:
        return p0 * np.sin(y)
    return ta[j] * y + tb[j] * z


def theta_invert_desc(fdesc, j, t, z, rhs, delta, tol, max_iter):
    """Solve y - f(t, y, z)*delta = rhs per node.

    Closed forms cover every kind affine in y; the sine kind falls back to
    the contraction iteration y <- rhs + f(y)*delta (valid for delta*K < 1).
    Returns (y, iterations, max residual).
    """
    code, p0, p1, ta, tb = fdesc
    rhs = np.asarray(rhs, dtype=float)
    if code == 0:
        return rhs.copy(), 0, 0.0
    if code == 1:
        y = rhs + p0 * delta
        return y, 0, float(np.max(np.abs(y - p0 * delta - rhs)))
    if code == 3:
        y = rhs + t * delta
        return y, 0, float(np.max(np.abs(y - t * delta - rhs)))
    if code in (2, 5):
        a = p0 if code == 2 else ta[j]
        b = p1 if code == 2 else tb[j]
        y = (rhs + b * z * delta) / (1.0 - a * delta)
        res = np.abs(y - (a * y + b * z) * delta - rhs)
        return y, 0, float(np.max(res))
    # scaled sine: fixed point
    y = rhs.copy()
    for it in range(1, max_iter + 1):
        y = rhs + p0 * np.sin(y) * delta
        res = np.abs(y - p0 * np.sin(y) * delta - rhs)
        worst = float(np.max(res))
        if worst <= tol:
            return y, it, worst
    bad = int(np.argmax(res))
    raise NumericFailureError(
        f"fixed-point inversion did not reach tol={tol:g} in {max_iter} iterations",
        node=bad,
        residual=worst,
    )


def implicit_level_step(y_next, z_next, eps_sign, j, times, delta, fdesc, gdesc, tol, max_iter):
    """One implicit backward step from level j+1 to level j.

    Per node i (with up-neighbour i+1 at the next level):
      z[i] = (Y+ - Y-)/(2 sqrt(delta)) + (g+ - g-)/2 * eps
      y[i] solves y - f(t_j, y, z)*delta
                  = (Y+ + Y-)/2 + sqrt(delta)/2 * (g+ + g-) * eps
    where g+- = g(t_{j+1}, Y+-, z+-_{j+1}).
    """
    sq = math.sqrt(delta)
    yp, ym = y_next[1:], y_next[:-1]
    zp, zm = z_next[1:], z_next[:-1]
    t_next = times[j + 1]
    gp = coeff_eval(gdesc, j + 1, t_next, yp, zp)
    gm = coeff_eval(gdesc, j + 1, t_next, ym, zm)
    z = (yp - ym) / (2.0 * sq) + 0.5 * (gp - gm) * eps_sign
    rhs = 0.5 * (yp + ym) + 0.5 * sq * (gp + gm) * eps_sign
    try:
        y, iters, resid = theta_invert_desc(
            fdesc, j, times[j], z, rhs, delta, tol, max_iter
        )
    except NumericFailureError as err:
        err.level = j
        raise
    return np.asarray(y, dtype=float), np.asarray(z, dtype=float), iters, resid


def explicit_level_step(y_next, z_next, eps_sign, j, times, delta, fdesc, gdesc):
    """One modified-scheme step: f is evaluated at the conditional mean
    (Y+ + Y-)/2 of the next level instead of at the unknown y, so no
    inversion is needed."""
    sq = math.sqrt(delta)
    yp, ym = y_next[1:], y_next[:-1]
    zp, zm = z_next[1:], z_next[:-1]
    t_next = times[j + 1]
    gp = coeff_eval(gdesc, j + 1, t_next, yp, zp)
    gm = coeff_eval(gdesc, j + 1, t_next, ym, zm)
    z = (yp - ym) / (2.0 * sq) + 0.5 * (gp - gm) * eps_sign
    ymid = 0.5 * (yp + ym)
    fval = coeff_eval(fdesc, j, times[j], ymid, z)
    y = ymid + fval * delta + 0.5 * sq * (gp + gm) * eps_sign
    return np.asarray(y, dtype=float), np.asarray(z, dtype=float)


def picard_level_step(
    y_next_new, prev_y_j, prev_z_j, prev_y_next, prev_z_next, eps_sign, j, times, delta, fdesc, gdesc
):
    """One Picard step: f and g frozen at the previous iterate's tree."""
    sq = math.sqrt(delta)
    t_next = times[j + 1]
    gp = coeff_eval(gdesc, j + 1, t_next, prev_y_next[1:], prev_z_next[1:])
    gm = coeff_eval(gdesc, j + 1, t_next, prev_y_next[:-1], prev_z_next[:-1])
    z = (y_next_new[1:] - y_next_new[:-1]) / (2.0 * sq) + 0.5 * (gp - gm) * eps_sign
    fval = coeff_eval(fdesc, j, times[j], prev_y_j, prev_z_j)
    y = (
        0.5 * (y_next_new[1:] + y_next_new[:-1])
        + fval * delta
        + 0.5 * sq * (gp + gm) * eps_sign
    )
    return np.asarray(y, dtype=float), np.asarray(z, dtype=float)


def _new_tree(n, y_term, z_term):
    y_flat = np.empty(tri_size(n))
    z_flat = np.empty(tri_size(n))
    off = tri_offset(n)
    y_flat[off:] = y_term
    z_flat[off:] = z_term
    return y_flat, z_flat


def sweep_implicit(y_term, z_term, eps, times, delta, fdesc, gdesc, tol, max_iter):
    """Full implicit backward induction; returns (y_flat, z_flat, iters, resid)."""
    n = len(eps)
    y_flat, z_flat = _new_tree(n, y_term, z_term)
    y_next, z_next = np.asarray(y_term, dtype=float), np.asarray(z_term, dtype=float)
    max_iters = 0
    max_resid = 0.0
    for j in range(n - 1, -1, -1):
        y, z, iters, resid = implicit_level_step(
            y_next, z_next, eps[j], j, times, delta, fdesc, gdesc, tol, max_iter
        )
        off = tri_offset(j)
        y_flat[off : off + j + 1] = y
        z_flat[off : off + j + 1] = z
        max_iters = max(max_iters, iters)
        max_resid = max(max_resid, resid)
        y_next, z_next = y, z
    return y_flat, z_flat, max_iters, max_resid


def sweep_explicit(y_term, z_term, eps, times, delta, fdesc, gdesc):
    """Full modified-scheme backward induction; returns (y_flat, z_flat)."""
    n = len(eps)
    y_flat, z_flat = _new_tree(n, y_term, z_term)
    y_next, z_next = np.asarray(y_term, dtype=float), np.asarray(z_term, dtype=float)
    for j in range(n - 1, -1, -1):
        y, z = explicit_level_step(
            y_next, z_next, eps[j], j, times, delta, fdesc, gdesc
        )
        off = tri_offset(j)
        y_flat[off : off + j + 1] = y
        z_flat[off : off + j + 1] = z
        y_next, z_next = y, z
    return y_flat, z_flat


def sweep_picard(y_term, z_term, prev_y_flat, prev_z_flat, eps, times, delta, fdesc, gdesc):
    """One full Picard iteration over the tree; terminal layer is pinned to
    (y_term, z_term) regardless of the previous iterate."""
    n = len(eps)
    y_flat, z_flat = _new_tree(n, y_term, z_term)
    y_next_new = np.asarray(y_term, dtype=float)
    for j in range(n - 1, -1, -1):
        off = tri_offset(j)
        off_next = tri_offset(j + 1)
        y, z = picard_level_step(
            y_next_new,
            prev_y_flat[off : off + j + 1],
            prev_z_flat[off : off + j + 1],
            prev_y_flat[off_next : off_next + j + 2],
            prev_z_flat[off_next : off_next + j + 2],
            eps[j],
            j,
            times,
            delta,
            fdesc,
            gdesc,
        )
        y_flat[off : off + j + 1] = y
        z_flat[off : off + j + 1] = z
        y_next_new = y
    return y_flat, z_flat
