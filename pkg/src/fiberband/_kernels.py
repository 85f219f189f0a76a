"""Compiled kernels for symmetric tridiagonal (and cyclic tridiagonal) matrices.

All routines are ``nopython`` and release the GIL so that independent slices
can be solved from a thread pool.  Nothing here validates its inputs; the
public wrappers in :mod:`fiberband.eig1d` do that.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_KW = dict(cache=True, nogil=True)


@njit(**_KW)
def pivmin(d, e2):
    """Smallest pivot magnitude allowed in a Sturm recurrence."""
    scale = 1.0
    for i in range(d.shape[0]):
        a = abs(d[i])
        if a > scale:
            scale = a
    for i in range(e2.shape[0]):
        if e2[i] > scale:
            scale = e2[i]
    return 2.2250738585072014e-308 / 2.220446049250313e-16 * scale + 1e-300


@njit(**_KW)
def sturm_count(d, e2, x, pmin):
    """Number of eigenvalues strictly below ``x``.

    ``d`` is the diagonal and ``e2`` the squared off-diagonal.  The recurrence
    is the LDLᵀ pivot sequence of ``T - x``; by Sylvester's law of inertia the
    number of negative pivots equals the number of eigenvalues below ``x``.
    """
    count = 0
    q = d[0] - x
    if abs(q) < pmin:
        q = -pmin
    if q < 0.0:
        count += 1
    for i in range(1, d.shape[0]):
        q = d[i] - x - e2[i - 1] / q
        if abs(q) < pmin:
            q = -pmin
        if q < 0.0:
            count += 1
    return count


@njit(**_KW)
def cyclic_sturm_count(d, e, corner, x, pmin):
    """Inertia count for a symmetric cyclic tridiagonal matrix.

    The matrix has diagonal ``d``, super/sub-diagonal ``e`` and the extra
    symmetric entry ``corner`` at positions (0, n-1) and (n-1, 0).  Gaussian
    elimination without pivoting only fills the last column, so the pivots
    are obtained in O(n) and counted as in :func:`sturm_count`.
    """
    n = d.shape[0]
    count = 0
    p = d[0] - x
    if abs(p) < pmin:
        p = -pmin
    if p < 0.0:
        count += 1
    g = corner  # coupling of the current pivot row with the last node
    dn = d[n - 1] - x
    for i in range(0, n - 2):
        ratio = e[i] / p
        p_next = d[i + 1] - x - e[i] * ratio
        if i + 1 == n - 2:
            g_next = e[n - 2] - ratio * g
        else:
            g_next = -ratio * g
        dn -= g * g / p
        p = p_next
        if abs(p) < pmin:
            p = -pmin
        if p < 0.0:
            count += 1
        g = g_next
    dn -= g * g / p
    if dn < 0.0:
        count += 1
    return count


@njit(**_KW)
def _gershgorin(d, e):
    n = d.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i < n - 1:
            r += abs(e[i])
        if d[i] - r < lo:
            lo = d[i] - r
        if d[i] + r > hi:
            hi = d[i] + r
    return lo, hi


@njit(**_KW)
def bisect_lowest(d, e, j_max, rtol, max_iter):
    """Lowest ``j_max`` eigenvalues of a symmetric tridiagonal matrix.

    Returns ``(values, lower, upper, status)``.  ``status`` is 0 on success
    and ``i + 1`` if the bracket for index ``i`` did not shrink below the
    tolerance within ``max_iter`` halvings; ``lower``/``upper`` then carry
    the diagnostic interval.
    """
    n = d.shape[0]
    e2 = np.empty(n - 1)
    for i in range(n - 1):
        e2[i] = e[i] * e[i]
    pmin = pivmin(d, e2)
    glo, ghi = _gershgorin(d, e)
    span = max(ghi - glo, 1.0)
    glo -= 1e-12 * span
    ghi += 1e-12 * span
    values = np.empty(j_max)
    lower = np.empty(j_max)
    upper = np.empty(j_max)
    left = glo
    for idx in range(j_max):
        lo = left
        hi = ghi
        converged = False
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if hi - lo <= rtol * (abs(mid) + 1.0):
                converged = True
                break
            if sturm_count(d, e2, mid, pmin) > idx:
                hi = mid
            else:
                lo = mid
        values[idx] = 0.5 * (lo + hi)
        lower[idx] = lo
        upper[idx] = hi
        if not converged:
            return values, lower, upper, idx + 1
        # eigenvalue idx+1 is >= eigenvalue idx: reuse the lower bracket end
        left = lo
    return values, lower, upper, 0


@njit(**_KW)
def bisect_lowest_cyclic(d, e, corner, j_max, rtol, max_iter):
    """Cyclic counterpart of :func:`bisect_lowest`."""
    n = d.shape[0]
    e2 = np.empty(n - 1)
    for i in range(n - 1):
        e2[i] = e[i] * e[i]
    pmin = pivmin(d, e2)
    glo, ghi = _gershgorin(d, e)
    glo -= abs(corner)
    ghi += abs(corner)
    span = max(ghi - glo, 1.0)
    glo -= 1e-12 * span
    ghi += 1e-12 * span
    values = np.empty(j_max)
    lower = np.empty(j_max)
    upper = np.empty(j_max)
    left = glo
    for idx in range(j_max):
        lo = left
        hi = ghi
        converged = False
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if hi - lo <= rtol * (abs(mid) + 1.0):
                converged = True
                break
            if cyclic_sturm_count(d, e, corner, mid, pmin) > idx:
                hi = mid
            else:
                lo = mid
        values[idx] = 0.5 * (lo + hi)
        lower[idx] = lo
        upper[idx] = hi
        if not converged:
            return values, lower, upper, idx + 1
        left = lo
    return values, lower, upper, 0


@njit(**_KW)
def count_below(d, e, x):
    """Public Sturm count of eigenvalues strictly below ``x``."""
    n = d.shape[0]
    e2 = np.empty(n - 1)
    for i in range(n - 1):
        e2[i] = e[i] * e[i]
    return sturm_count(d, e2, x, pivmin(d, e2))


@njit(**_KW)
def count_below_cyclic(d, e, corner, x):
    n = d.shape[0]
    e2 = np.empty(n - 1)
    for i in range(n - 1):
        e2[i] = e[i] * e[i]
    return cyclic_sturm_count(d, e, corner, x, pivmin(d, e2))


@njit(**_KW)
def tridiag_solve(d, e, shift, rhs):
    """Solve ``(T - shift) y = rhs`` by LU with partial pivoting.

    Zero pivots are replaced by a tiny multiple of the matrix scale, which is
    exactly what inverse iteration needs when the shift is an eigenvalue.
    """
    n = d.shape[0]
    # LU storage: main diagonal u0, first and second super diagonals u1, u2,
    # multipliers l and row-swap flags
    u0 = np.empty(n)
    u1 = np.zeros(n)
    u2 = np.zeros(n)
    lmul = np.zeros(n)
    swap = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        u0[i] = d[i] - shift
    for i in range(n - 1):
        u1[i] = e[i]
    scale = 0.0
    for i in range(n):
        if abs(u0[i]) > scale:
            scale = abs(u0[i])
    for i in range(n - 1):
        if abs(e[i]) > scale:
            scale = abs(e[i])
    tiny = 2.220446049250313e-16 * max(scale, 1e-300)
    sub = e  # the sub-diagonal equals the super-diagonal (symmetric)
    for i in range(n - 1):
        a = u0[i]
        b = sub[i]
        if abs(a) >= abs(b):
            if a == 0.0:
                a = tiny
                u0[i] = a
            m = b / a
            lmul[i] = m
            u0[i + 1] -= m * u1[i]
            # u2[i] stays zero
        else:
            # swap rows i and i+1
            m = a / b
            lmul[i] = m
            swap[i] = True
            u0[i] = b
            t = u1[i]
            u1[i] = u0[i + 1]
            u0[i + 1] = t - m * u0[i + 1]
            if i < n - 2:
                u2[i] = u1[i + 1]
                u1[i + 1] = -m * u1[i + 1]
    if u0[n - 1] == 0.0:
        u0[n - 1] = tiny
    y = rhs.copy()
    for i in range(n - 1):
        if swap[i]:
            t = y[i]
            y[i] = y[i + 1]
            y[i + 1] = t - lmul[i] * y[i + 1]
        else:
            y[i + 1] -= lmul[i] * y[i]
    y[n - 1] /= u0[n - 1]
    if n > 1:
        y[n - 2] = (y[n - 2] - u1[n - 2] * y[n - 1]) / u0[n - 2]
    for i in range(n - 3, -1, -1):
        y[i] = (y[i] - u1[i] * y[i + 1] - u2[i] * y[i + 2]) / u0[i]
    return y


@njit(**_KW)
def tridiag_matvec(d, e, x):
    n = d.shape[0]
    y = np.empty(n)
    for i in range(n):
        s = d[i] * x[i]
        if i > 0:
            s += e[i - 1] * x[i - 1]
        if i < n - 1:
            s += e[i] * x[i + 1]
        y[i] = s
    return y
