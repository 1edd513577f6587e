# Compiled double-double kernels: dot products, matrix-vector products and
# the implicit-shift QL tridiagonal eigensolver, all in ~106-bit arithmetic.
# Semantics must match lanczos_lab._kernels_pure exactly (same error-free
# transformations); the pure module is the import-time fallback.

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt as c_sqrt

cnp.import_array()

cdef double SPLITTER = 134217729.0
cdef double DD_EPS = 4.93038065763132e-32  # 2**-104


ctypedef struct dd_t:
    double hi
    double lo


cdef inline dd_t dd_make(double hi, double lo) noexcept nogil:
    cdef dd_t r
    r.hi = hi
    r.lo = lo
    return r


cdef inline dd_t dd_two_sum(double a, double b) noexcept nogil:
    cdef dd_t r
    cdef double bb
    r.hi = a + b
    bb = r.hi - a
    r.lo = (a - (r.hi - bb)) + (b - bb)
    return r


cdef inline dd_t dd_quick_two_sum(double a, double b) noexcept nogil:
    cdef dd_t r
    r.hi = a + b
    r.lo = b - (r.hi - a)
    return r


cdef inline dd_t dd_two_prod(double a, double b) noexcept nogil:
    cdef dd_t r
    cdef double ca, ahi, alo, cb, bhi, blo
    r.hi = a * b
    ca = SPLITTER * a
    ahi = ca - (ca - a)
    alo = a - ahi
    cb = SPLITTER * b
    bhi = cb - (cb - b)
    blo = b - bhi
    r.lo = ((ahi * bhi - r.hi) + ahi * blo + alo * bhi) + alo * blo
    return r


cdef inline dd_t dd_add(dd_t x, dd_t y) noexcept nogil:
    cdef dd_t s = dd_two_sum(x.hi, y.hi)
    cdef dd_t t = dd_two_sum(x.lo, y.lo)
    cdef dd_t r
    s.lo = s.lo + t.hi
    r = dd_quick_two_sum(s.hi, s.lo)
    r.lo = r.lo + t.lo
    return dd_quick_two_sum(r.hi, r.lo)


cdef inline dd_t dd_neg(dd_t x) noexcept nogil:
    return dd_make(-x.hi, -x.lo)


cdef inline dd_t dd_sub(dd_t x, dd_t y) noexcept nogil:
    return dd_add(x, dd_neg(y))


cdef inline dd_t dd_mul(dd_t x, dd_t y) noexcept nogil:
    cdef dd_t p = dd_two_prod(x.hi, y.hi)
    p.lo = p.lo + (x.hi * y.lo + x.lo * y.hi)
    return dd_quick_two_sum(p.hi, p.lo)


cdef inline dd_t dd_mul_d(double a, dd_t y) noexcept nogil:
    cdef dd_t p = dd_two_prod(a, y.hi)
    p.lo = p.lo + a * y.lo
    return dd_quick_two_sum(p.hi, p.lo)


cdef inline dd_t dd_div(dd_t x, dd_t y) noexcept nogil:
    cdef double q1, q2, q3
    cdef dd_t r, s, q
    q1 = x.hi / y.hi
    r = dd_sub(x, dd_mul_d(q1, y))
    q2 = r.hi / y.hi
    s = dd_sub(r, dd_mul_d(q2, y))
    q3 = s.hi / y.hi
    q = dd_quick_two_sum(q1, q2)
    return dd_add(q, dd_make(q3, 0.0))


cdef inline dd_t dd_sqrt(dd_t x) noexcept nogil:
    cdef double y
    cdef dd_t p, r
    if x.hi == 0.0 and x.lo == 0.0:
        return dd_make(0.0, 0.0)
    y = c_sqrt(x.hi)
    p = dd_two_prod(y, y)
    r = dd_sub(x, p)
    return dd_quick_two_sum(y, r.hi / (2.0 * y))


cdef inline dd_t dd_hypot(dd_t a, dd_t b) noexcept nogil:
    return dd_sqrt(dd_add(dd_mul(a, a), dd_mul(b, b)))


cdef inline double dd_absd(dd_t a) noexcept nogil:
    return -a.hi if a.hi < 0.0 else a.hi


def dot_dd(double[::1] xh, double[::1] xl, double[::1] yh, double[::1] yl):
    """Double-double dot product of two dd vectors."""
    cdef Py_ssize_t n = xh.shape[0], i
    cdef dd_t acc = dd_make(0.0, 0.0)
    cdef dd_t x, y
    with nogil:
        for i in range(n):
            x = dd_make(xh[i], xl[i])
            y = dd_make(yh[i], yl[i])
            acc = dd_add(acc, dd_mul(x, y))
    return acc.hi, acc.lo


def matvec_f64_dd(double[:, ::1] A, double[::1] xh, double[::1] xl):
    """y = A @ x with binary64 A and dd x, accumulated in dd."""
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, j
    yh_arr = np.empty(n)
    yl_arr = np.empty(n)
    cdef double[::1] yh = yh_arr
    cdef double[::1] yl = yl_arr
    cdef dd_t acc, x
    with nogil:
        for i in range(n):
            acc = dd_make(0.0, 0.0)
            for j in range(m):
                x = dd_make(xh[j], xl[j])
                acc = dd_add(acc, dd_mul_d(A[i, j], x))
            yh[i] = acc.hi
            yl[i] = acc.lo
    return yh_arr, yl_arr


def matvec_dd_dd(double[:, ::1] Qh, double[:, ::1] Ql,
                 double[::1] ch, double[::1] cl):
    """y = Q @ c with dd Q (n, k) and dd c (k)."""
    cdef Py_ssize_t n = Qh.shape[0], k = Qh.shape[1], i, j
    yh_arr = np.empty(n)
    yl_arr = np.empty(n)
    cdef double[::1] yh = yh_arr
    cdef double[::1] yl = yl_arr
    cdef dd_t acc, q, c
    with nogil:
        for i in range(n):
            acc = dd_make(0.0, 0.0)
            for j in range(k):
                q = dd_make(Qh[i, j], Ql[i, j])
                c = dd_make(ch[j], cl[j])
                acc = dd_add(acc, dd_mul(q, c))
            yh[i] = acc.hi
            yl[i] = acc.lo
    return yh_arr, yl_arr


def gramt_dd(double[:, ::1] Qh, double[:, ::1] Ql,
             double[::1] xh, double[::1] xl):
    """g = Q.T @ x with dd Q (n, k) and dd x (n)."""
    cdef Py_ssize_t n = Qh.shape[0], k = Qh.shape[1], i, j
    gh_arr = np.zeros(k)
    gl_arr = np.zeros(k)
    cdef double[::1] gh = gh_arr
    cdef double[::1] gl = gl_arr
    cdef dd_t acc, q, x
    with nogil:
        for j in range(k):
            acc = dd_make(0.0, 0.0)
            for i in range(n):
                q = dd_make(Qh[i, j], Ql[i, j])
                x = dd_make(xh[i], xl[i])
                acc = dd_add(acc, dd_mul(q, x))
            gh[j] = acc.hi
            gl[j] = acc.lo
    return gh_arr, gl_arr


def ql_implicit_dd(double[::1] dh, double[::1] dl,
                   double[::1] eh, double[::1] el,
                   double[:, ::1] zh, double[:, ::1] zl,
                   int max_iter):
    """Implicit-shift QL with Wilkinson shift, in dd arithmetic.

    d (length k) holds the diagonal, e (length k, last entry zero) the
    subdiagonal; both are overwritten with eigenvalues / zeros.  z is an
    (m, k) block of row vectors that accumulates the rotations, so row r ends
    up holding (z_r^T s_0, ..., z_r^T s_{k-1}) for eigenvectors s_i.
    Returns 0 on success, l+1 if eigenvalue l failed to converge.
    """
    cdef Py_ssize_t k = dh.shape[0], nrows = zh.shape[0]
    cdef Py_ssize_t l, m, i, j, rr
    cdef int it, err = 0
    cdef dd_t g, r, s, c, p, f, b, tmp, zi, zi1
    cdef dd_t one = dd_make(1.0, 0.0)

    if k == 1:
        return 0
    with nogil:
        for l in range(k):
            if err:
                break
            it = 0
            while True:
                m = l
                while m < k - 1:
                    if dd_absd(dd_make(eh[m], el[m])) <= DD_EPS * (
                            dd_absd(dd_make(dh[m], dl[m]))
                            + dd_absd(dd_make(dh[m + 1], dl[m + 1]))):
                        break
                    m += 1
                if m == l:
                    break
                it += 1
                if it > max_iter:
                    err = <int> (l + 1)
                    break
                # Wilkinson shift
                g = dd_div(dd_sub(dd_make(dh[l + 1], dl[l + 1]),
                                  dd_make(dh[l], dl[l])),
                           dd_mul_d(2.0, dd_make(eh[l], el[l])))
                r = dd_hypot(g, one)
                if g.hi < 0.0:
                    r = dd_neg(r)
                g = dd_add(dd_sub(dd_make(dh[m], dl[m]), dd_make(dh[l], dl[l])),
                           dd_div(dd_make(eh[l], el[l]), dd_add(g, r)))
                s = one
                c = one
                p = dd_make(0.0, 0.0)
                for j in range(m - l):
                    i = m - 1 - j
                    f = dd_mul(s, dd_make(eh[i], el[i]))
                    b = dd_mul(c, dd_make(eh[i], el[i]))
                    r = dd_hypot(f, g)
                    eh[i + 1] = r.hi
                    el[i + 1] = r.lo
                    if r.hi == 0.0 and r.lo == 0.0:
                        # recover from underflow: skip this rotation block
                        tmp = dd_sub(dd_make(dh[i + 1], dl[i + 1]), p)
                        dh[i + 1] = tmp.hi
                        dl[i + 1] = tmp.lo
                        eh[m] = 0.0
                        el[m] = 0.0
                        break
                    s = dd_div(f, r)
                    c = dd_div(g, r)
                    g = dd_sub(dd_make(dh[i + 1], dl[i + 1]), p)
                    r = dd_add(dd_mul(dd_sub(dd_make(dh[i], dl[i]), g), s),
                               dd_mul(dd_mul_d(2.0, c), b))
                    p = dd_mul(s, r)
                    tmp = dd_add(g, p)
                    dh[i + 1] = tmp.hi
                    dl[i + 1] = tmp.lo
                    g = dd_sub(dd_mul(c, r), b)
                    for rr in range(nrows):
                        zi1 = dd_make(zh[rr, i + 1], zl[rr, i + 1])
                        zi = dd_make(zh[rr, i], zl[rr, i])
                        tmp = dd_add(dd_mul(s, zi), dd_mul(c, zi1))
                        zh[rr, i + 1] = tmp.hi
                        zl[rr, i + 1] = tmp.lo
                        tmp = dd_sub(dd_mul(c, zi), dd_mul(s, zi1))
                        zh[rr, i] = tmp.hi
                        zl[rr, i] = tmp.lo
                else:
                    tmp = dd_sub(dd_make(dh[l], dl[l]), p)
                    dh[l] = tmp.hi
                    dl[l] = tmp.lo
                    eh[l] = g.hi
                    el[l] = g.lo
                    eh[m] = 0.0
                    el[m] = 0.0
    return err


def backend_name():
    return "compiled"
