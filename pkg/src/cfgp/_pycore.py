"""Pure numpy implementation of the numerical kernels.

This module mirrors the compiled ``_ccore`` extension function by function and
is used whenever the extension is not built (or ``CFGP_PURE_PYTHON=1``).

Family codes: 0 Gaussian, 1 Matern nu=0.5, 2 Matern nu=1.5, 3 Matern nu=2.5.
All arrays are float64; X arrays are (n, d), T arrays are (n, m).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, gammainc

GAUSSIAN, MATERN05, MATERN15, MATERN25 = 0, 1, 2, 3

# Matern correlation written as p(z) exp(-z) with z = c * phi * |h|
_MATERN_C = {MATERN05: 1.0, MATERN15: math.sqrt(3.0), MATERN25: math.sqrt(5.0)}
_MATERN_P = {MATERN05: (1.0,), MATERN15: (1.0, 1.0), MATERN25: (1.0, 1.0, 1.0 / 3.0)}

_SQRT_PI = math.sqrt(math.pi)


def _per_dim(X1, X2, phi, family):
    """Per-dimension correlation factors and their phi-derivatives, shape (d, n1, n2)."""
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    phi = np.asarray(phi, dtype=float)
    h = X1.T[:, :, None] - X2.T[:, None, :]
    ph = phi[:, None, None]
    if family == GAUSSIAN:
        r = np.exp(-(ph * h) ** 2)
        dr = -2.0 * ph * h * h * r
        return r, dr
    c = _MATERN_C[family]
    ah = np.abs(h)
    z = c * ph * ah
    e = np.exp(-z)
    if family == MATERN05:
        r = e
        dpz = -np.ones_like(z)
    elif family == MATERN15:
        r = (1.0 + z) * e
        dpz = -z
    else:
        r = (1.0 + z + z * z / 3.0) * e
        dpz = -(z + z * z) / 3.0
    dr = dpz * e * c * ah
    return r, dr


def corr_matrix(X1, X2, phi, family):
    r, _ = _per_dim(X1, X2, phi, family)
    return np.prod(r, axis=0)


def corr_grad(X1, X2, phi, family):
    """dR/dphi_r for every dimension r, shape (d, n1, n2)."""
    r, dr = _per_dim(X1, X2, phi, family)
    d = r.shape[0]
    out = np.empty_like(r)
    for i in range(d):
        others = np.prod(np.delete(r, i, axis=0), axis=0) if d > 1 else 1.0
        out[i] = dr[i] * others
    return out


def _fidelity_parts(T1, T2, a, l, gamma):
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    a = np.asarray(a, dtype=float)
    l = np.asarray(l, dtype=float)
    u1 = a * T1**l  # (n1, m)
    u2 = a * T2**l
    return u1, u2


def _scaled_norm(u, gamma):
    """(sum_j u_j^(1/gamma))^gamma evaluated with the max factored out.

    Returns the value, the weights rho^(1/g)/sum and log-ratios needed by the gradients.
    """
    M = u.max(axis=-1)
    safe = np.where(M > 0, M, 1.0)
    rho = u / safe[..., None]
    with np.errstate(divide="ignore"):
        pw = np.where(rho > 0, rho ** (1.0 / gamma), 0.0)
        lr = np.where(rho > 0, np.log(np.where(rho > 0, rho, 1.0)), 0.0)
    s = pw.sum(axis=-1)
    s_safe = np.where(s > 0, s, 1.0)
    val = np.where(M > 0, M * s_safe**gamma, 0.0)
    return val, pw, lr, s_safe, M


def fidelity_matrix(T1, T2, a, l, gamma):
    u1, u2 = _fidelity_parts(T1, T2, a, l, gamma)
    f1, *_ = _scaled_norm(u1, gamma)
    f2, *_ = _scaled_norm(u2, gamma)
    g = _increment_term(u1, u2, gamma)[0]
    return 0.5 * (f1[:, None] + f2[None, :] - g)


def _increment_term(u1, u2, gamma):
    """(sum_j (u1_j^(1/2g) - u2_j^(1/2g))^2)^g and its pieces, shape (n1, n2)."""
    U1 = u1[:, None, :]
    U2 = u2[None, :, :]
    M = np.maximum(U1.max(axis=-1), U2.max(axis=-1))
    safe = np.where(M > 0, M, 1.0)[..., None]
    r1 = U1 / safe
    r2 = U2 / safe
    with np.errstate(divide="ignore"):
        v1 = np.where(r1 > 0, r1 ** (0.5 / gamma), 0.0)
        v2 = np.where(r2 > 0, r2 ** (0.5 / gamma), 0.0)
        l1 = np.where(r1 > 0, np.log(np.where(r1 > 0, r1, 1.0)), 0.0)
        l2 = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
    diff = v1 - v2
    Q = (diff * diff).sum(axis=-1)
    pos = Q > 0
    Qs = np.where(pos, Q, 1.0)
    g = np.where(pos, M * Qs**gamma, 0.0)
    return g, diff, v1, v2, l1, l2, Qs, pos


def fidelity_grad(T1, T2, a, l, gamma):
    """Derivatives of the fidelity kernel: index 0 is d/dgamma, index 1+j is d/da_j."""
    a = np.asarray(a, dtype=float)
    u1, u2 = _fidelity_parts(T1, T2, a, l, gamma)
    m = u1.shape[1]
    n1, n2 = u1.shape[0], u2.shape[0]
    out = np.zeros((1 + m, n1, n2))

    def norm_grads(u):
        val, pw, lr, s, M = _scaled_norm(u, gamma)
        # d/dgamma of (sum rho^(1/g))^g * M
        dg = val * (np.log(s) - (pw * lr).sum(axis=-1) / (gamma * s))
        da = val[..., None] * (pw / s[..., None]) / a
        return dg, da

    dg1, da1 = norm_grads(u1)
    dg2, da2 = norm_grads(u2)
    g, diff, v1, v2, l1, l2, Qs, pos = _increment_term(u1, u2, gamma)
    cross = (diff * (v1 * l1 - v2 * l2)).sum(axis=-1)
    dgg = np.where(pos, g * (np.log(Qs) - cross / (gamma * Qs)), 0.0)
    dga = np.where(pos[..., None], g[..., None] * (diff * diff) / Qs[..., None], 0.0) / a
    out[0] = 0.5 * (dg1[:, None] + dg2[None, :] - dgg)
    for j in range(m):
        out[1 + j] = 0.5 * (da1[:, None, j] + da2[None, :, j] - dga[..., j])
    return out


def exp_moments(L, beta, kmax):
    """int_0^L s^k exp(-beta s) ds for k = 0..kmax, broadcast over L; shape (kmax+1, *L.shape)."""
    L = np.asarray(L, dtype=float)
    out = np.empty((kmax + 1,) + L.shape)
    bl = beta * L
    for k in range(kmax + 1):
        out[k] = math.factorial(k) * gammainc(k + 1, bl) / beta ** (k + 1)
    return out


def _poly_mul(p, q):
    out = [0.0] * (len(p) + len(q) - 1)
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            out[i + j] = out[i + j] + pi * qj
    return out


def _shifted_coeffs(alpha, c, D, sign):
    """Coefficients in s of p(c (D + sign*s)) where p has coefficients alpha; D may be an array."""
    deg = len(alpha) - 1
    coeffs = []
    for k in range(deg + 1):
        acc = 0.0
        for i in range(k, deg + 1):
            acc = acc + alpha[i] * c**i * math.comb(i, k) * D ** (i - k)
        coeffs.append(acc * (sign**k))
    return coeffs


def matern_ab(x, phi, family, kmax=5):
    """Helper integrals A^(k) = int_0^x u^(k-1) e^{-c(x-u)} du and B^(k) = int_x^1 u^(k-1) e^{-c(u-x)} du.

    Returns two arrays of shape (kmax, *x.shape), k = 1..kmax.
    """
    x = np.asarray(x, dtype=float)
    c = _MATERN_C[family] * phi
    Ml = exp_moments(x, c, kmax - 1)
    Mr = exp_moments(1.0 - x, c, kmax - 1)
    A = np.zeros((kmax,) + x.shape)
    B = np.zeros((kmax,) + x.shape)
    for k in range(1, kmax + 1):
        q = k - 1
        for j in range(q + 1):
            coef = math.comb(q, j) * x ** (q - j)
            A[k - 1] += coef * (-1.0) ** j * Ml[j]
            B[k - 1] += coef * Mr[j]
    return A, B


def _line_integrals_1d(x, phi, family):
    """I^(1), I^(2), I^(3) along one dimension; x is a 1-D array, returns (n, 3)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((x.shape[0], 3))
    if family == GAUSSIAN:
        p2 = phi * phi
        i1 = _SQRT_PI / (2.0 * phi) * (erf(phi * (1.0 - x)) + erf(phi * x))
        e0 = np.exp(-p2 * x * x)
        e1 = np.exp(-p2 * (1.0 - x) ** 2)
        i2 = (e0 - e1) / (2.0 * p2) + x * i1
        i3 = (-x * e0 - (1.0 - x) * e1) / (2.0 * p2) + 2.0 * x * i2 + (1.0 / (2.0 * p2) - x * x) * i1
        out[:, 0], out[:, 1], out[:, 2] = i1, i2, i3
        return out
    c = _MATERN_C[family] * phi
    alpha = [a * c**i for i, a in enumerate(_MATERN_P[family])]  # p(c s) in powers of s
    Ml = exp_moments(x, c, 4)
    Mr = exp_moments(1.0 - x, c, 4)
    for q in range(3):
        # (x - s)^q and (x + s)^q in powers of s
        left = [math.comb(q, j) * x ** (q - j) * (-1.0) ** j for j in range(q + 1)]
        right = [math.comb(q, j) * x ** (q - j) for j in range(q + 1)]
        pl = _poly_mul(left, alpha)
        pr = _poly_mul(right, alpha)
        val = 0.0
        for k, ck in enumerate(pl):
            val = val + ck * Ml[k]
        for k, ck in enumerate(pr):
            val = val + ck * Mr[k]
        out[:, q] = val
    return out


def line_integrals(X, phi, family):
    """Per-point, per-dimension integrals int_0^1 x^q k_r(x_ir, x) dx, q = 0, 1, 2; shape (n, d, 3)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    phi = np.asarray(phi, dtype=float)
    n, d = X.shape
    out = np.empty((n, d, 3))
    for r in range(d):
        out[:, r, :] = _line_integrals_1d(X[:, r], phi[r], family)
    return out


def _w_1d(xa, xb, phi, family):
    """int_0^1 k(xa, x) k(xb, x) dx along one dimension, elementwise over broadcast arrays."""
    xa, xb = np.broadcast_arrays(np.asarray(xa, dtype=float), np.asarray(xb, dtype=float))
    D = np.abs(xa - xb)
    if family == GAUSSIAN:
        mid = 0.5 * (xa + xb)
        s2 = math.sqrt(2.0)
        return (
            math.sqrt(math.pi / 2.0) / (2.0 * phi)
            * np.exp(-0.5 * phi * phi * D * D)
            * (erf(s2 * phi * (1.0 - mid)) + erf(s2 * phi * mid))
        )
    lo = np.minimum(xa, xb)
    hi = np.maximum(xa, xb)
    c = _MATERN_C[family] * phi
    alpha = list(_MATERN_P[family])
    base = [a * c**i for i, a in enumerate(alpha)]
    outer = _poly_mul(base, _shifted_coeffs(alpha, c, D, 1.0))
    middle = _poly_mul(base, _shifted_coeffs(alpha, c, D, -1.0))
    kmax = len(outer) - 1
    Ml = exp_moments(lo, 2.0 * c, kmax)
    Mr = exp_moments(1.0 - hi, 2.0 * c, kmax)
    acc = 0.0
    for k in range(kmax + 1):
        acc = acc + outer[k] * (Ml[k] + Mr[k]) + middle[k] * D ** (k + 1) / (k + 1)
    return np.exp(-c * D) * acc


def w_matrix(X1, X2, phi, family):
    """Product over dimensions of the double-kernel integrals, shape (n1, n2)."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    phi = np.asarray(phi, dtype=float)
    out = np.ones((X1.shape[0], X2.shape[0]))
    for r in range(X1.shape[1]):
        out *= _w_1d(X1[:, r][:, None], X2[:, r][None, :], phi[r], family)
    return out


def w_diag(X, phi, family):
    """w(x_i, x_i) for each row, shape (n,)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    phi = np.asarray(phi, dtype=float)
    out = np.ones(X.shape[0])
    for r in range(X.shape[1]):
        out *= _w_1d(X[:, r], X[:, r], phi[r], family)
    return out
