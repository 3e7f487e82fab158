# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backward-induction kernels.

Same contracts and arithmetic as ``_kernels_py``; one scalar loop per tree
node instead of per-level numpy calls.  Trees use the flat triangular layout
(level j at offset j*(j+1)/2).
"""

from libc.math cimport fabs, sin, sqrt

import numpy as np

from .errors import NumericFailureError


cdef inline double coeff_val(int kind, double p0, double p1,
                             const double* ta, const double* tb,
                             Py_ssize_t j, double t, double y, double z) noexcept nogil:
    if kind == 0:
        return 0.0
    elif kind == 1:
        return p0
    elif kind == 2:
        return p0 * y + p1 * z
    elif kind == 3:
        return t
    elif kind == 4:
        return p0 * sin(y)
    return ta[j] * y + tb[j] * z


cdef inline double theta_solve(int kind, double p0, double p1,
                               const double* ta, const double* tb,
                               Py_ssize_t j, double t, double z, double rhs,
                               double delta, double tol, int max_iter,
                               int* iters, int* ok) noexcept nogil:
    cdef double y, a, b, res
    cdef int it
    iters[0] = 0
    ok[0] = 1
    if kind == 0:
        return rhs
    if kind == 1:
        return rhs + p0 * delta
    if kind == 3:
        return rhs + t * delta
    if kind == 2 or kind == 5:
        a = p0 if kind == 2 else ta[j]
        b = p1 if kind == 2 else tb[j]
        return (rhs + b * z * delta) / (1.0 - a * delta)
    # scaled sine: contraction iteration, factor delta*K < 1
    y = rhs
    for it in range(1, max_iter + 1):
        y = rhs + p0 * sin(y) * delta
        res = fabs(y - p0 * sin(y) * delta - rhs)
        iters[0] = it
        if res <= tol:
            return y
    ok[0] = 0
    return y


cdef inline Py_ssize_t tri_offset(Py_ssize_t j) noexcept nogil:
    return j * (j + 1) // 2


def sweep_implicit(y_term, z_term, eps, times, delta, fdesc, gdesc, tol, max_iter):
    """Full implicit backward induction; returns (y_flat, z_flat, iters, resid)."""
    fk, fp0, fp1, fta, ftb = fdesc
    gk, gp0, gp1, gta, gtb = gdesc
    cdef const double[::1] ytv = np.ascontiguousarray(y_term, dtype=np.float64)
    cdef const double[::1] ztv = np.ascontiguousarray(z_term, dtype=np.float64)
    cdef const double[::1] ev = np.ascontiguousarray(eps, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[::1] fta_v = np.ascontiguousarray(fta, dtype=np.float64)
    cdef const double[::1] ftb_v = np.ascontiguousarray(ftb, dtype=np.float64)
    cdef const double[::1] gta_v = np.ascontiguousarray(gta, dtype=np.float64)
    cdef const double[::1] gtb_v = np.ascontiguousarray(gtb, dtype=np.float64)
    cdef Py_ssize_t n = ev.shape[0]
    y_flat = np.empty((n + 1) * (n + 2) // 2, dtype=np.float64)
    z_flat = np.empty((n + 1) * (n + 2) // 2, dtype=np.float64)
    cdef double[::1] yv = y_flat
    cdef double[::1] zv = z_flat
    cdef int c_fk = fk, c_gk = gk, c_max_iter = max_iter
    cdef double c_fp0 = fp0, c_fp1 = fp1, c_gp0 = gp0, c_gp1 = gp1
    cdef double c_delta = delta, c_tol = tol
    cdef double sq = sqrt(c_delta)
    cdef Py_ssize_t j, i, off, off_next
    cdef double es, t_j, t_next, yp, ym, zp, zm, gp, gm, zi, rhs, yi, resid
    cdef int it_used = 0, ok = 1, max_it_used = 0
    cdef double max_resid = 0.0
    cdef Py_ssize_t fail_level = -1, fail_node = -1
    cdef double fail_res = 0.0
    with nogil:
        off = tri_offset(n)
        for i in range(n + 1):
            yv[off + i] = ytv[i]
            zv[off + i] = ztv[i]
        for j in range(n - 1, -1, -1):
            off = tri_offset(j)
            off_next = tri_offset(j + 1)
            es = ev[j]
            t_j = tv[j]
            t_next = tv[j + 1]
            for i in range(j + 1):
                yp = yv[off_next + i + 1]
                ym = yv[off_next + i]
                zp = zv[off_next + i + 1]
                zm = zv[off_next + i]
                gp = coeff_val(c_gk, c_gp0, c_gp1, &gta_v[0], &gtb_v[0], j + 1, t_next, yp, zp)
                gm = coeff_val(c_gk, c_gp0, c_gp1, &gta_v[0], &gtb_v[0], j + 1, t_next, ym, zm)
                zi = (yp - ym) / (2.0 * sq) + 0.5 * (gp - gm) * es
                rhs = 0.5 * (yp + ym) + 0.5 * sq * (gp + gm) * es
                yi = theta_solve(c_fk, c_fp0, c_fp1, &fta_v[0], &ftb_v[0], j, t_j,
                                 zi, rhs, c_delta, c_tol, c_max_iter, &it_used, &ok)
                resid = fabs(yi - coeff_val(c_fk, c_fp0, c_fp1, &fta_v[0], &ftb_v[0],
                                            j, t_j, yi, zi) * c_delta - rhs)
                if not ok:
                    fail_level = j
                    fail_node = i
                    fail_res = resid
                    break
                if resid > max_resid:
                    max_resid = resid
                if it_used > max_it_used:
                    max_it_used = it_used
                yv[off + i] = yi
                zv[off + i] = zi
            if fail_level >= 0:
                break
    if fail_level >= 0:
        raise NumericFailureError(
            f"fixed-point inversion did not reach tol={tol:g} in {max_iter} iterations",
            level=int(fail_level),
            node=int(fail_node),
            residual=float(fail_res),
        )
    return y_flat, z_flat, int(max_it_used), float(max_resid)


def sweep_explicit(y_term, z_term, eps, times, delta, fdesc, gdesc):
    """Full modified-scheme backward induction; returns (y_flat, z_flat)."""
    fk, fp0, fp1, fta, ftb = fdesc
    gk, gp0, gp1, gta, gtb = gdesc
    cdef const double[::1] ytv = np.ascontiguousarray(y_term, dtype=np.float64)
    cdef const double[::1] ztv = np.ascontiguousarray(z_term, dtype=np.float64)
    cdef const double[::1] ev = np.ascontiguousarray(eps, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[::1] fta_v = np.ascontiguousarray(fta, dtype=np.float64)
    cdef const double[::1] ftb_v = np.ascontiguousarray(ftb, dtype=np.float64)
    cdef const double[::1] gta_v = np.ascontiguousarray(gta, dtype=np.float64)
    cdef const double[::1] gtb_v = np.ascontiguousarray(gtb, dtype=np.float64)
    cdef Py_ssize_t n = ev.shape[0]
    y_flat = np.empty((n + 1) * (n + 2) // 2, dtype=np.float64)
    z_flat = np.empty((n + 1) * (n + 2) // 2, dtype=np.float64)
    cdef double[::1] yv = y_flat
    cdef double[::1] zv = z_flat
    cdef int c_fk = fk, c_gk = gk
    cdef double c_fp0 = fp0, c_fp1 = fp1, c_gp0 = gp0, c_gp1 = gp1
    cdef double c_delta = delta
    cdef double sq = sqrt(c_delta)
    cdef Py_ssize_t j, i, off, off_next
    cdef double es, t_j, t_next, yp, ym, zp, zm, gp, gm, zi, ymid, fval
    with nogil:
        off = tri_offset(n)
        for i in range(n + 1):
            yv[off + i] = ytv[i]
            zv[off + i] = ztv[i]
        for j in range(n - 1, -1, -1):
            off = tri_offset(j)
            off_next = tri_offset(j + 1)
            es = ev[j]
            t_j = tv[j]
            t_next = tv[j + 1]
            for i in range(j + 1):
                yp = yv[off_next + i + 1]
                ym = yv[off_next + i]
                zp = zv[off_next + i + 1]
                zm = zv[off_next + i]
                gp = coeff_val(c_gk, c_gp0, c_gp1, &gta_v[0], &gtb_v[0], j + 1, t_next, yp, zp)
                gm = coeff_val(c_gk, c_gp0, c_gp1, &gta_v[0], &gtb_v[0], j + 1, t_next, ym, zm)
                zi = (yp - ym) / (2.0 * sq) + 0.5 * (gp - gm) * es
                ymid = 0.5 * (yp + ym)
                fval = coeff_val(c_fk, c_fp0, c_fp1, &fta_v[0], &ftb_v[0], j, t_j, ymid, zi)
                yv[off + i] = ymid + fval * c_delta + 0.5 * sq * (gp + gm) * es
                zv[off + i] = zi
    return y_flat, z_flat


def sweep_picard(y_term, z_term, prev_y_flat, prev_z_flat, eps, times, delta, fdesc, gdesc):
    """One full Picard iteration (f, g frozen at the previous iterate)."""
    fk, fp0, fp1, fta, ftb = fdesc
    gk, gp0, gp1, gta, gtb = gdesc
    cdef const double[::1] ytv = np.ascontiguousarray(y_term, dtype=np.float64)
    cdef const double[::1] ztv = np.ascontiguousarray(z_term, dtype=np.float64)
    cdef const double[::1] pyv = np.ascontiguousarray(prev_y_flat, dtype=np.float64)
    cdef const double[::1] pzv = np.ascontiguousarray(prev_z_flat, dtype=np.float64)
    cdef const double[::1] ev = np.ascontiguousarray(eps, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[::1] fta_v = np.ascontiguousarray(fta, dtype=np.float64)
    cdef const double[::1] ftb_v = np.ascontiguousarray(ftb, dtype=np.float64)
    cdef const double[::1] gta_v = np.ascontiguousarray(gta, dtype=np.float64)
    cdef const double[::1] gtb_v = np.ascontiguousarray(gtb, dtype=np.float64)
    cdef Py_ssize_t n = ev.shape[0]
    y_flat = np.empty((n + 1) * (n + 2) // 2, dtype=np.float64)
    z_flat = np.empty((n + 1) * (n + 2) // 2, dtype=np.float64)
    cdef double[::1] yv = y_flat
    cdef double[::1] zv = z_flat
    cdef int c_fk = fk, c_gk = gk
    cdef double c_fp0 = fp0, c_fp1 = fp1, c_gp0 = gp0, c_gp1 = gp1
    cdef double c_delta = delta
    cdef double sq = sqrt(c_delta)
    cdef Py_ssize_t j, i, off, off_next
    cdef double es, t_j, t_next, ynp, ynm, gp, gm, zi, fval
    with nogil:
        off = tri_offset(n)
        for i in range(n + 1):
            yv[off + i] = ytv[i]
            zv[off + i] = ztv[i]
        for j in range(n - 1, -1, -1):
            off = tri_offset(j)
            off_next = tri_offset(j + 1)
            es = ev[j]
            t_j = tv[j]
            t_next = tv[j + 1]
            for i in range(j + 1):
                gp = coeff_val(c_gk, c_gp0, c_gp1, &gta_v[0], &gtb_v[0], j + 1, t_next,
                               pyv[off_next + i + 1], pzv[off_next + i + 1])
                gm = coeff_val(c_gk, c_gp0, c_gp1, &gta_v[0], &gtb_v[0], j + 1, t_next,
                               pyv[off_next + i], pzv[off_next + i])
                ynp = yv[off_next + i + 1]
                ynm = yv[off_next + i]
                zi = (ynp - ynm) / (2.0 * sq) + 0.5 * (gp - gm) * es
                fval = coeff_val(c_fk, c_fp0, c_fp1, &fta_v[0], &ftb_v[0], j, t_j,
                                 pyv[off + i], pzv[off + i])
                yv[off + i] = 0.5 * (ynp + ynm) + fval * c_delta + 0.5 * sq * (gp + gm) * es
                zv[off + i] = zi
    return y_flat, z_flat
