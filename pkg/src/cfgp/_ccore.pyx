# cython: language_level=3
"""Compiled kernels; signatures and semantics match ``cfgp._pycore``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs, pow, erf, M_PI

cnp.import_array()

cdef double SQRT3 = 1.7320508075688772
cdef double SQRT5 = 2.23606797749979


cdef inline double _c_of(int family) noexcept nogil:
    if family == 1:
        return 1.0
    if family == 2:
        return SQRT3
    return SQRT5


cdef inline int _alpha(int family, double* alpha) noexcept nogil:
    # coefficients of p(z) for the Matern families; returns degree
    alpha[0] = 1.0
    alpha[1] = 0.0
    alpha[2] = 0.0
    if family == 1:
        return 0
    alpha[1] = 1.0
    if family == 2:
        return 1
    alpha[2] = 1.0 / 3.0
    return 2


cdef inline void _corr1(double h, double phi, int family, double* r, double* dr) noexcept nogil:
    cdef double z, e, ah
    if family == 0:
        r[0] = exp(-(phi * h) * (phi * h))
        dr[0] = -2.0 * phi * h * h * r[0]
        return
    ah = fabs(h)
    z = _c_of(family) * phi * ah
    e = exp(-z)
    if family == 1:
        r[0] = e
        dr[0] = -ah * e
    elif family == 2:
        r[0] = (1.0 + z) * e
        dr[0] = -z * e * SQRT3 * ah
    else:
        r[0] = (1.0 + z + z * z / 3.0) * e
        dr[0] = -(z + z * z) / 3.0 * e * SQRT5 * ah


def corr_matrix(X1, X2, phi, int family):
    cdef const double[:, ::1] a = np.ascontiguousarray(X1, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(X2, dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0], d = a.shape[1], i, j, r
    out = np.empty((n1, n2))
    cdef double[:, ::1] o = out
    cdef double v, rr, dd
    with nogil:
        for i in range(n1):
            for j in range(n2):
                v = 1.0
                for r in range(d):
                    _corr1(a[i, r] - b[j, r], p[r], family, &rr, &dd)
                    v *= rr
                o[i, j] = v
    return out


def corr_grad(X1, X2, phi, int family):
    cdef const double[:, ::1] a = np.ascontiguousarray(X1, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(X2, dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0], d = a.shape[1], i, j, r, s
    out = np.empty((d, n1, n2))
    cdef double[:, :, ::1] o = out
    rbuf = np.empty(d)
    dbuf = np.empty(d)
    cdef double[::1] rv = rbuf
    cdef double[::1] dv = dbuf
    cdef double prod
    with nogil:
        for i in range(n1):
            for j in range(n2):
                for r in range(d):
                    _corr1(a[i, r] - b[j, r], p[r], family, &rv[r], &dv[r])
                for r in range(d):
                    prod = dv[r]
                    for s in range(d):
                        if s != r:
                            prod *= rv[s]
                    o[r, i, j] = prod
    return out


cdef inline double _norm_term(const double* u, Py_ssize_t m, double gamma, double* dg, double* da, const double* a) noexcept nogil:
    # (sum u_j^(1/g))^g with max factored out; fills d/dgamma and d/da_j
    cdef double M = 0.0, s = 0.0, sl = 0.0, rho, pw, val
    cdef Py_ssize_t j
    for j in range(m):
        if u[j] > M:
            M = u[j]
    if M <= 0.0:
        dg[0] = 0.0
        for j in range(m):
            da[j] = 0.0
        return 0.0
    for j in range(m):
        rho = u[j] / M
        if rho > 0.0:
            pw = pow(rho, 1.0 / gamma)
            s += pw
            sl += pw * log(rho)
    val = M * pow(s, gamma)
    dg[0] = val * (log(s) - sl / (gamma * s))
    for j in range(m):
        rho = u[j] / M
        if rho > 0.0:
            da[j] = val * pow(rho, 1.0 / gamma) / s / a[j]
        else:
            da[j] = 0.0
    return val


cdef inline double _incr_term(const double* u1, const double* u2, Py_ssize_t m, double gamma,
                              double* dg, double* da, const double* a) noexcept nogil:
    cdef double M = 0.0, Q = 0.0, cross = 0.0, r1, r2, v1, v2, l1, l2, df, g
    cdef Py_ssize_t j
    for j in range(m):
        if u1[j] > M:
            M = u1[j]
        if u2[j] > M:
            M = u2[j]
    dg[0] = 0.0
    for j in range(m):
        da[j] = 0.0
    if M <= 0.0:
        return 0.0
    for j in range(m):
        r1 = u1[j] / M
        r2 = u2[j] / M
        v1 = pow(r1, 0.5 / gamma) if r1 > 0.0 else 0.0
        v2 = pow(r2, 0.5 / gamma) if r2 > 0.0 else 0.0
        l1 = log(r1) if r1 > 0.0 else 0.0
        l2 = log(r2) if r2 > 0.0 else 0.0
        df = v1 - v2
        Q += df * df
        cross += df * (v1 * l1 - v2 * l2)
    if Q <= 0.0:
        return 0.0
    g = M * pow(Q, gamma)
    dg[0] = g * (log(Q) - cross / (gamma * Q))
    for j in range(m):
        r1 = u1[j] / M
        r2 = u2[j] / M
        v1 = pow(r1, 0.5 / gamma) if r1 > 0.0 else 0.0
        v2 = pow(r2, 0.5 / gamma) if r2 > 0.0 else 0.0
        da[j] = g * (v1 - v2) * (v1 - v2) / Q / a[j]
    return g


# outside [S_SAFE, S_BIG] the unscaled powers may under- or overflow; use the max-scaled path
cdef double S_SAFE = 1e-200
cdef double S_BIG = 1e200


cdef inline double _incr_fast(const double* w1, const double* wl1, const double* w2, const double* wl2,
                              const double* u1, const double* u2, Py_ssize_t m, double gamma, bint grad,
                              double* dg, double* da, const double* a) noexcept nogil:
    # w = u^(1/(2 gamma)), wl = w log u; the max factor cancels in g = S^gamma
    cdef double S = 0.0, C = 0.0, df, g
    cdef Py_ssize_t j
    for j in range(m):
        df = w1[j] - w2[j]
        S += df * df
        if grad:
            C += df * (wl1[j] - wl2[j])
    if not (S >= S_SAFE and S <= S_BIG and fabs(C) <= 1e300):
        return _incr_term(u1, u2, m, gamma, dg, da, a)
    g = pow(S, gamma)
    if grad:
        dg[0] = g * (log(S) - C / (gamma * S))
        for j in range(m):
            df = w1[j] - w2[j]
            da[j] = g * df * df / S / a[j]
    return g


def _scaled_u(T, a, l):
    T = np.asarray(T, dtype=np.float64)
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64) * T ** np.asarray(l, dtype=np.float64))


def _powers(u, double gamma):
    u = np.asarray(u)
    with np.errstate(divide="ignore", under="ignore", invalid="ignore"):
        w = np.power(u, 0.5 / gamma)
        wl = np.where(u > 0, w * np.log(np.where(u > 0, u, 1.0)), 0.0)
    return np.ascontiguousarray(w), np.ascontiguousarray(wl)


def fidelity_matrix(T1, T2, a, l, double gamma):
    U1, U2 = _scaled_u(T1, a, l), _scaled_u(T2, a, l)
    cdef const double[:, ::1] u1 = U1
    cdef const double[:, ::1] u2 = U2
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t n1 = u1.shape[0], n2 = u2.shape[0], m = u1.shape[1], i, j
    W1, WL1 = _powers(U1, gamma)
    W2, WL2 = _powers(U2, gamma)
    cdef const double[:, ::1] w1 = W1
    cdef const double[:, ::1] wl1 = WL1
    cdef const double[:, ::1] w2 = W2
    cdef const double[:, ::1] wl2 = WL2
    out = np.empty((n1, n2))
    cdef double[:, ::1] o = out
    f1 = np.empty(n1)
    f2 = np.empty(n2)
    scratch = np.empty(m)
    cdef double[::1] f1v = f1
    cdef double[::1] f2v = f2
    cdef double[::1] sv = scratch
    cdef double dg
    with nogil:
        for i in range(n1):
            f1v[i] = _norm_term(&u1[i, 0], m, gamma, &dg, &sv[0], &av[0])
        for j in range(n2):
            f2v[j] = _norm_term(&u2[j, 0], m, gamma, &dg, &sv[0], &av[0])
        for i in range(n1):
            for j in range(n2):
                # a zero-fidelity row is exactly uncorrelated with the error process
                if f1v[i] == 0.0 or f2v[j] == 0.0:
                    o[i, j] = 0.0
                    continue
                o[i, j] = 0.5 * (f1v[i] + f2v[j] - _incr_fast(&w1[i, 0], &wl1[i, 0], &w2[j, 0], &wl2[j, 0],
                                                              &u1[i, 0], &u2[j, 0], m, gamma, False,
                                                              &dg, &sv[0], &av[0]))
    return out


def fidelity_grad(T1, T2, a, l, double gamma):
    U1, U2 = _scaled_u(T1, a, l), _scaled_u(T2, a, l)
    cdef const double[:, ::1] u1 = U1
    cdef const double[:, ::1] u2 = U2
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t n1 = u1.shape[0], n2 = u2.shape[0], m = u1.shape[1], i, j, k
    W1, WL1 = _powers(U1, gamma)
    W2, WL2 = _powers(U2, gamma)
    cdef const double[:, ::1] w1 = W1
    cdef const double[:, ::1] wl1 = WL1
    cdef const double[:, ::1] w2 = W2
    cdef const double[:, ::1] wl2 = WL2
    out = np.empty((1 + m, n1, n2))
    cdef double[:, :, ::1] o = out
    g1 = np.empty(n1)
    g2 = np.empty(n2)
    a1 = np.empty((n1, m))
    a2 = np.empty((n2, m))
    scratch = np.empty(m)
    cdef double[::1] g1v = g1
    cdef double[::1] g2v = g2
    cdef double[:, ::1] a1v = a1
    cdef double[:, ::1] a2v = a2
    cdef double[::1] sv = scratch
    cdef double dgg
    f1 = np.empty(n1)
    f2 = np.empty(n2)
    cdef double[::1] f1v = f1
    cdef double[::1] f2v = f2
    with nogil:
        for i in range(n1):
            f1v[i] = _norm_term(&u1[i, 0], m, gamma, &g1v[i], &a1v[i, 0], &av[0])
        for j in range(n2):
            f2v[j] = _norm_term(&u2[j, 0], m, gamma, &g2v[j], &a2v[j, 0], &av[0])
        for i in range(n1):
            for j in range(n2):
                if f1v[i] == 0.0 or f2v[j] == 0.0:
                    for k in range(1 + m):
                        o[k, i, j] = 0.0
                    continue
                dgg = 0.0
                for k in range(m):
                    sv[k] = 0.0
                _incr_fast(&w1[i, 0], &wl1[i, 0], &w2[j, 0], &wl2[j, 0], &u1[i, 0], &u2[j, 0], m, gamma, True,
                           &dgg, &sv[0], &av[0])
                o[0, i, j] = 0.5 * (g1v[i] + g2v[j] - dgg)
                for k in range(m):
                    o[1 + k, i, j] = 0.5 * (a1v[i, k] + a2v[j, k] - sv[k])
    return out


cdef void _moments(double L, double beta, int kmax, double* out) noexcept nogil:
    # out[k] = int_0^L s^k exp(-beta s) ds, k = 0..kmax
    cdef double x = beta * L, term, tot, el, fact, part, lk
    cdef int k, i
    if L <= 0.0:
        for k in range(kmax + 1):
            out[k] = 0.0
        return
    el = exp(-x)
    if x < kmax + 5.0:
        # series for the top order, then the all-positive downward recurrence
        term = 1.0 / (kmax + 1.0)
        tot = term
        for i in range(1, 300):
            term *= x / (kmax + 1.0 + i)
            tot += term
            if term < 1e-17 * tot:
                break
        lk = pow(L, kmax + 0.0)
        out[kmax] = lk * L * el * tot
        for k in range(kmax, 0, -1):
            out[k - 1] = (beta * out[k] + lk * el) / k
            lk /= L
        return
    for k in range(kmax + 1):
        fact = 1.0
        part = 1.0
        term = 1.0
        for i in range(1, k + 1):
            term *= x / i
            part += term
            fact *= i
        out[k] = fact / pow(beta, k + 1.0) * (1.0 - el * part)


def exp_moments(L, double beta, int kmax):
    Larr = np.asarray(L, dtype=np.float64)
    flat = np.ascontiguousarray(Larr.ravel())
    cdef const double[::1] lv = flat
    cdef Py_ssize_t n = flat.shape[0], i, k
    res = np.empty((kmax + 1, n))
    cdef double[:, ::1] rv = res
    cdef double buf[16]
    for i in range(n):
        _moments(lv[i], beta, kmax, buf)
        for k in range(kmax + 1):
            rv[k, i] = buf[k]
    return res.reshape((kmax + 1,) + Larr.shape)


cdef double _binom(int n, int k) noexcept nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(1, k + 1):
        r = r * (n - k + i) / i
    return r


cdef void _line1(double x, double phi, int family, double* out) noexcept nogil:
    cdef double p2, i1, i2, i3, e0, e1, c
    cdef double alpha[3]
    cdef double Ml[8]
    cdef double Mr[8]
    cdef double left[3]
    cdef double right[3]
    cdef int deg, q, j, k, idx
    cdef double vl, vr
    if family == 0:
        p2 = phi * phi
        i1 = sqrt(M_PI) / (2.0 * phi) * (erf(phi * (1.0 - x)) + erf(phi * x))
        e0 = exp(-p2 * x * x)
        e1 = exp(-p2 * (1.0 - x) * (1.0 - x))
        i2 = (e0 - e1) / (2.0 * p2) + x * i1
        i3 = (-x * e0 - (1.0 - x) * e1) / (2.0 * p2) + 2.0 * x * i2 + (1.0 / (2.0 * p2) - x * x) * i1
        out[0] = i1
        out[1] = i2
        out[2] = i3
        return
    c = _c_of(family) * phi
    deg = _alpha(family, alpha)
    for k in range(deg + 1):
        alpha[k] = alpha[k] * pow(c, k)
    _moments(x, c, 4, Ml)
    _moments(1.0 - x, c, 4, Mr)
    for q in range(3):
        for j in range(q + 1):
            right[j] = _binom(q, j) * pow(x, q - j)
            left[j] = right[j] * (-1.0 if j % 2 else 1.0)
        vl = 0.0
        vr = 0.0
        for j in range(q + 1):
            for k in range(deg + 1):
                idx = j + k
                vl += left[j] * alpha[k] * Ml[idx]
                vr += right[j] * alpha[k] * Mr[idx]
        out[q] = vl + vr


def line_integrals(X, phi, int family):
    cdef const double[:, ::1] xv = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1], i, r
    out = np.empty((n, d, 3))
    cdef double[:, :, ::1] o = out
    with nogil:
        for i in range(n):
            for r in range(d):
                _line1(xv[i, r], p[r], family, &o[i, r, 0])
    return out


cdef double _w1(double xa, double xb, double phi, int family) noexcept nogil:
    cdef double D = fabs(xa - xb), lo, hi, mid, c, acc, cpow
    cdef double alpha[3]
    cdef double base[3]
    cdef double sp[3]
    cdef double sm[3]
    cdef double outer[5]
    cdef double middle[5]
    cdef double Ml[8]
    cdef double Mr[8]
    cdef int deg, i, k
    if family == 0:
        mid = 0.5 * (xa + xb)
        return (sqrt(M_PI / 2.0) / (2.0 * phi) * exp(-0.5 * phi * phi * D * D)
                * (erf(sqrt(2.0) * phi * (1.0 - mid)) + erf(sqrt(2.0) * phi * mid)))
    lo = xa if xa < xb else xb
    hi = xb if xa < xb else xa
    c = _c_of(family) * phi
    deg = _alpha(family, alpha)
    for k in range(deg + 1):
        base[k] = alpha[k] * pow(c, k)
        sp[k] = 0.0
        for i in range(k, deg + 1):
            sp[k] += alpha[i] * pow(c, i) * _binom(i, k) * pow(D, i - k)
        sm[k] = sp[k] * (-1.0 if k % 2 else 1.0)
    for k in range(2 * deg + 1):
        outer[k] = 0.0
        middle[k] = 0.0
    for i in range(deg + 1):
        for k in range(deg + 1):
            outer[i + k] += base[i] * sp[k]
            middle[i + k] += base[i] * sm[k]
    _moments(lo, 2.0 * c, 2 * deg, Ml)
    _moments(1.0 - hi, 2.0 * c, 2 * deg, Mr)
    acc = 0.0
    for k in range(2 * deg + 1):
        acc += outer[k] * (Ml[k] + Mr[k]) + middle[k] * pow(D, k + 1.0) / (k + 1.0)
    return exp(-c * D) * acc


def w_matrix(X1, X2, phi, int family):
    cdef const double[:, ::1] a = np.ascontiguousarray(np.atleast_2d(X1), dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(np.atleast_2d(X2), dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0], d = a.shape[1], i, j, r
    out = np.empty((n1, n2))
    cdef double[:, ::1] o = out
    cdef double v
    with nogil:
        for i in range(n1):
            for j in range(n2):
                v = 1.0
                for r in range(d):
                    v *= _w1(a[i, r], b[j, r], p[r], family)
                o[i, j] = v
    return out


def w_diag(X, phi, int family):
    cdef const double[:, ::1] a = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    cdef const double[::1] p = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1], i, r
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double v
    with nogil:
        for i in range(n):
            v = 1.0
            for r in range(d):
                v *= _w1(a[i, r], a[i, r], p[r], family)
            o[i] = v
    return out
