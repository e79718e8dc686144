"""Closed-form integrals over the unit cube used by the IMSPE.

All quantities are for unit process variance; callers scale by ``sigma2``
(``h``) or ``sigma2**2`` (``w``).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import _pycore, backend
from .exceptions import InvalidArgumentError
from .gp import TrendBasis
from .kernels import CorrelationSpec, Family


def line_integrals(X, spec: CorrelationSpec) -> np.ndarray:
    """``int_0^1 x**q k_r(x_ir, x) dx`` for q = 0, 1, 2; shape (n, d, 3)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.d:
        raise InvalidArgumentError("dimension mismatch between X and the correlation spec")
    return backend.core.line_integrals(X, spec.phi, int(spec.family))


def matern_ab(x, phi: float, family, kmax: int = 5):
    """Helper integrals for the Matern families.

    ``A[k-1] = int_0^x u**(k-1) exp(-c (x - u)) du`` and
    ``B[k-1] = int_x^1 u**(k-1) exp(-c (u - x)) du`` with ``c = sqrt(2 nu) phi``.
    """
    fam = Family.parse(family)
    if fam is Family.GAUSSIAN:
        raise InvalidArgumentError("A/B helpers are defined for Matern families only")
    return _pycore.matern_ab(x, float(phi), int(fam), kmax)


def w_matrix(X1, X2, spec: CorrelationSpec) -> np.ndarray:
    """``int k(x_i, x) k(x_j, x) dx`` over the unit cube, shape (n1, n2)."""
    return backend.core.w_matrix(X1, X2, spec.phi, int(spec.family))


def w_diag(X, spec: CorrelationSpec) -> np.ndarray:
    return backend.core.w_diag(X, spec.phi, int(spec.family))


def monomial_moment(alpha, beta) -> Fraction:
    """``int_[0,1]^d x**alpha x**beta dx`` as an exact rational."""
    out = Fraction(1)
    for a, b in zip(alpha, beta):
        out /= a + b + 1
    return out


def g_matrix(basis: TrendBasis, d: int, exact: bool = False):
    """``G[i, j] = int f_i(x, 0) f_j(x, 0) dx`` over the unit cube.

    With ``exact=True`` an object array of ``Fraction`` is returned.
    """
    monos, C = basis.monomials(d)
    Gm = [[monomial_moment(a, b) for b in monos] for a in monos]
    p = C.shape[0]
    out = [[Fraction(0)] * p for _ in range(p)]
    for i in range(p):
        for j in range(p):
            acc = Fraction(0)
            for u, cu in enumerate(C[i]):
                if cu == 0:
                    continue
                for v, cv in enumerate(C[j]):
                    if cv:
                        acc += int(cu) * int(cv) * Gm[u][v]
            out[i][j] = acc
    if exact:
        return np.array(out, dtype=object)
    return np.array([[float(v) for v in row] for row in out])


def h_matrix(X, basis: TrendBasis, spec: CorrelationSpec, table=None) -> np.ndarray:
    """``int R_phi1(x_i, x) f_j(x, 0) dx``, shape (n, p).

    ``table`` may pass precomputed :func:`line_integrals` output.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    I = line_integrals(X, spec) if table is None else table
    monos, C = basis.monomials(d)
    Hm = np.empty((X.shape[0], len(monos)))
    for u, alpha in enumerate(monos):
        if max(alpha) > 2:
            raise InvalidArgumentError("monomials above degree 2 per coordinate are not supported")
        col = np.ones(X.shape[0])
        for r, ar in enumerate(alpha):
            col = col * I[:, r, ar]
        Hm[:, u] = col
    return Hm @ C.T.astype(float)
