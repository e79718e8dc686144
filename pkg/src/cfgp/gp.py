"""Training data, trend bases, covariance assembly and universal-kriging prediction."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from scipy import linalg

from . import kernels
from .exceptions import InvalidArgumentError, NumericalError, StateError
from .kernels import CombinedCovSpec

ETA_START = 1e-10
ETA_MAX = 1e-6


@dataclass(frozen=True)
class Dataset:
    """Design inputs ``X`` (n, d) in the unit cube, fidelities ``T`` (n, m) and responses ``y``."""

    X: np.ndarray
    T: np.ndarray
    y: np.ndarray

    def __init__(self, X, T, y, check_duplicates: bool = True):
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if T.ndim == 1:
            T = T[:, None]
        n = y.size
        if n < 1 or X.shape[0] != n or T.shape[0] != n:
            raise InvalidArgumentError(f"inconsistent sizes X{X.shape}, T{T.shape}, y({n})")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(T)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset contains non-finite values")
        if np.any(X < 0) or np.any(X > 1):
            raise InvalidArgumentError("inputs must lie in the unit cube; rescale first")
        if np.any(T < 0):
            raise InvalidArgumentError("fidelity components must be nonnegative")
        if check_duplicates and n > 1:
            rows = np.hstack([X, T])
            if np.unique(rows, axis=0).shape[0] != n:
                raise InvalidArgumentError("duplicated (x, t) rows make the noiseless covariance singular")
        for name, arr in (("X", X), ("T", T), ("y", y)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.T.shape[1]

    def append(self, x, t, y) -> "Dataset":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        t = np.asarray(t, dtype=float).reshape(1, -1)
        return Dataset(np.vstack([self.X, x]), np.vstack([self.T, t]), np.append(self.y, float(y)))

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.T[idx], self.y[idx])


class TrendKind(str, enum.Enum):
    CONSTANT = "constant"
    LEGENDRE = "legendre"


@dataclass(frozen=True)
class TrendBasis:
    """Regression functions for universal kriging.

    ``legendre`` is the second-degree shifted Legendre basis on [0, 1] with
    pairwise interactions ``(2 x_i - 1)(2 x_j - 1)``. The optional fidelity
    column is ``prod_j t_j ** l_j`` and vanishes on the ``t = 0`` slice.
    """

    kind: TrendKind = TrendKind.CONSTANT
    include_fidelity_trend: bool = False
    fidelity_exponents: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TrendKind(self.kind))
        if self.fidelity_exponents is not None:
            object.__setattr__(self, "fidelity_exponents", tuple(float(v) for v in self.fidelity_exponents))

    def n_columns(self, d: int) -> int:
        p = 1 if self.kind is TrendKind.CONSTANT else 1 + 2 * d + d * (d - 1) // 2
        return p + int(self.include_fidelity_trend)

    def monomials(self, d: int):
        """Monomial exponents and the coefficient matrix ``C`` with ``f(x, 0) = C @ mono(x)``."""
        zero = (0,) * d

        def e(*pairs):
            v = [0] * d
            for k, p in pairs:
                v[k] += p
            return tuple(v)

        rows = []
        if self.kind is TrendKind.CONSTANT:
            rows.append({zero: 1})
        else:
            rows.append({zero: 1})
            for k in range(d):
                rows.append({e((k, 1)): 2, zero: -1})
            for k in range(d):
                rows.append({e((k, 2)): 6, e((k, 1)): -6, zero: 1})
            for i, j in combinations(range(d), 2):
                rows.append({e((i, 1), (j, 1)): 4, e((i, 1)): -2, e((j, 1)): -2, zero: 1})
        if self.include_fidelity_trend:
            rows.append({})
        monos = sorted({mono for row in rows for mono in row})
        C = np.zeros((len(rows), len(monos)), dtype=np.int64)
        for r, row in enumerate(rows):
            for mono, coef in row.items():
                C[r, monos.index(mono)] = coef
        return monos, C

    def evaluate(self, X, T) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = np.atleast_2d(np.asarray(T, dtype=float))
        n, d = X.shape
        cols = [np.ones(n)]
        if self.kind is TrendKind.LEGENDRE:
            z = 2.0 * X - 1.0
            cols.extend(z[:, k] for k in range(d))
            cols.extend(0.5 * (3.0 * z[:, k] ** 2 - 1.0) for k in range(d))
            cols.extend(z[:, i] * z[:, j] for i, j in combinations(range(d), 2))
        if self.include_fidelity_trend:
            if self.fidelity_exponents is None:
                l = np.full(T.shape[1], 4.0)
            else:
                l = np.asarray(self.fidelity_exponents, dtype=float)
            cols.append(np.prod(T**l, axis=1))
        return np.column_stack(cols)


def trend_eval(x, t, basis: TrendBasis) -> np.ndarray:
    """Regression vector ``f(x, t)`` for a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or np.any(x > 1):
        raise InvalidArgumentError("x must lie in the unit cube")
    return basis.evaluate(x[None, :], np.atleast_1d(np.asarray(t, dtype=float))[None, :])[0]


def unit_correlation(dataset: Dataset, spec: CombinedCovSpec) -> np.ndarray:
    """``K_0``: the covariance divided by sigma2, without jitter."""
    K0 = kernels.cov_matrix(dataset.X, dataset.T, dataset.X, dataset.T, spec.with_sigma2(1.0))
    return 0.5 * (K0 + K0.T)


def jittered_cholesky(K0: np.ndarray, jitter: Optional[float] = None):
    """Cholesky factor of ``K0 + jitter * I``.

    Without a fixed ``jitter`` the relative level ``eta`` starts at 1e-10 of
    the mean diagonal and grows by 10x up to 1e-6.

    Returns
    -------
    L, eta, jitter
    """
    scale = float(np.mean(np.diag(K0)))
    if jitter is not None:
        try:
            L = linalg.cholesky(K0 + jitter * np.eye(K0.shape[0]), lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericalError("factorization failed at the fixed jitter", {"jitter": jitter}) from exc
        return L, jitter / scale if scale > 0 else np.nan, float(jitter)
    eta = ETA_START
    tried = []
    while eta <= ETA_MAX * 1.0001:
        nug = eta * scale
        tried.append(eta)
        try:
            L = linalg.cholesky(K0 + nug * np.eye(K0.shape[0]), lower=True, check_finite=False)
            if np.all(np.isfinite(L)):
                return L, eta, nug
        except (linalg.LinAlgError, ValueError):
            pass
        eta *= 10.0
    raise NumericalError(
        "covariance not positive definite after maximum jitter",
        {"etas_tried": tried, "mean_diag": scale, "n": K0.shape[0]},
    )


def assemble(dataset: Dataset, basis: TrendBasis, spec: CombinedCovSpec, jitter=None):
    """Covariance matrix (with jitter) and trend matrix.

    Returns
    -------
    K : ndarray (n, n)
        ``sigma2 * (K_0 + jitter I)``.
    F : ndarray (n, p)
    """
    K0 = unit_correlation(dataset, spec)
    _, _, nug = jittered_cholesky(K0, jitter)
    K = spec.sigma2 * (K0 + nug * np.eye(dataset.n))
    return K, basis.evaluate(dataset.X, dataset.T)


class FittedModel:
    """Conditioned GP with cached factorizations.

    Parameters
    ----------
    dataset, basis, spec
        ``spec.sigma2`` is used as the process variance.
    jitter : float, optional
        Fixed relative nugget added to ``K_0``; escalated automatically when omitted.
    beta : array, optional
        Trend coefficients; the GLS estimate is used when omitted.
    """

    def __init__(self, dataset: Dataset, basis: TrendBasis, spec: CombinedCovSpec, jitter=None, beta=None):
        if dataset.d != spec.d or dataset.m != spec.m:
            raise InvalidArgumentError("dataset dimensions do not match the covariance spec")
        self.dataset = dataset
        self.basis = basis
        self.spec = spec
        K0 = unit_correlation(dataset, spec)
        L0, self.eta, self.jitter = jittered_cholesky(K0, jitter)
        s2 = spec.sigma2
        self.nugget = s2 * self.jitter
        # factor of K = s2 (K0 + jitter I)
        self.L = L0 * np.sqrt(s2)
        self.F = basis.evaluate(dataset.X, dataset.T)
        self.p = self.F.shape[1]
        self.KiF = self._solve(self.F)
        self.P = self.F.T @ self.KiF
        self.P = 0.5 * (self.P + self.P.T)
        try:
            self.P_chol = linalg.cho_factor(self.P, lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError("trend information matrix is singular", {"p": self.p}) from exc
        if beta is None:
            beta = linalg.cho_solve(self.P_chol, self.KiF.T @ dataset.y)
        self.beta = np.asarray(beta, dtype=float)
        self.alpha = self._solve(dataset.y - self.F @ self.beta)

    def _solve(self, B):
        return linalg.cho_solve((self.L, True), B, check_finite=False)

    @property
    def n(self) -> int:
        return self.dataset.n

    def cross_cov(self, X, T) -> np.ndarray:
        """Covariances between query rows and the design, shape (q, n)."""
        return kernels.cov_matrix(X, T, self.dataset.X, self.dataset.T, self.spec)

    def prior_var(self, T) -> np.ndarray:
        return self.spec.sigma2 * (1.0 + kernels.fidelity_diag(T, self.spec.fidelity))

    def predict(self, X, T=None):
        """Posterior mean and variance at query rows; ``T`` defaults to the exact-solution slice."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if T is None:
            T = np.zeros((X.shape[0], self.spec.m))
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if T.shape[0] == 1 and X.shape[0] > 1:
            T = np.repeat(T, X.shape[0], axis=0)
        k = self.cross_cov(X, T)
        f = self.basis.evaluate(X, T)
        mean = f @ self.beta + k @ self.alpha
        Kik = self._solve(k.T)
        g = f.T - self.F.T @ Kik
        trend = np.sum(g * linalg.cho_solve(self.P_chol, g), axis=0)
        var = self.prior_var(T) - np.sum(k.T * Kik, axis=0) + trend
        return mean, np.maximum(var, 0.0)


def posterior(model: Optional[FittedModel], x, t=None):
    """Posterior mean and variance at a single point."""
    if model is None or not isinstance(model, FittedModel):
        raise StateError("posterior requires a fitted model")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t is None:
        t = np.zeros(model.spec.m)
    mean, var = model.predict(x[None, :], np.atleast_1d(np.asarray(t, dtype=float))[None, :])
    return float(mean[0]), float(var[0])
