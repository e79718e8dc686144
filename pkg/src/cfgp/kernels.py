"""Input-space correlation functions, the adaptive fidelity kernel, and their combination.

The combined covariance between ``(x1, t1)`` and ``(x2, t2)`` is::

    sigma2 * (R_phi1(x1 - x2) + R_phi2(x1 - x2) * K_gamma(t1, t2))

where ``K_gamma`` is the adaptive (lifted Brownian) fidelity kernel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import backend
from .exceptions import InvalidArgumentError


class Family(enum.IntEnum):
    GAUSSIAN = 0
    MATERN05 = 1
    MATERN15 = 2
    MATERN25 = 3

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower().replace("_", "").replace("-", "").replace(".", "")
        aliases = {
            "gaussian": cls.GAUSSIAN,
            "gauss": cls.GAUSSIAN,
            "rbf": cls.GAUSSIAN,
            "matern05": cls.MATERN05,
            "matern12": cls.MATERN05,
            "exponential": cls.MATERN05,
            "matern15": cls.MATERN15,
            "matern32": cls.MATERN15,
            "matern25": cls.MATERN25,
            "matern52": cls.MATERN25,
        }
        if key not in aliases:
            raise InvalidArgumentError(f"unknown correlation family {value!r}")
        return aliases[key]


def _positive_vector(values, name) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidArgumentError(f"{name} must be finite and strictly positive, got {arr}")
    return arr


@dataclass(frozen=True)
class CorrelationSpec:
    """Separable stationary correlation ``prod_r k(phi_r * h_r)``."""

    family: Family
    phi: np.ndarray

    def __init__(self, family, phi):
        object.__setattr__(self, "family", Family.parse(family))
        object.__setattr__(self, "phi", _positive_vector(phi, "phi"))

    @property
    def d(self) -> int:
        return self.phi.size


@dataclass(frozen=True)
class FidelityKernelSpec:
    """Adaptive fidelity kernel parameters.

    Parameters
    ----------
    gamma : float
        Roughness parameter in (0, 1); 0.5 recovers the Brownian-motion kernel.
    scale_a : sequence of float
        Per-component scale ``a_j``.
    exponents_l : sequence of float
        Fixed convergence exponents ``l_j`` (default 4).
    """

    gamma: float
    scale_a: np.ndarray
    exponents_l: np.ndarray

    def __init__(self, gamma, scale_a=(1.0,), exponents_l=None):
        g = float(gamma)
        if not (0.0 < g < 1.0):
            raise InvalidArgumentError(f"gamma must lie in (0, 1), got {gamma}")
        a = _positive_vector(scale_a, "scale_a")
        l = np.full(a.size, 4.0) if exponents_l is None else _positive_vector(exponents_l, "exponents_l")
        if l.size != a.size:
            raise InvalidArgumentError("scale_a and exponents_l must have the same length")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "scale_a", a)
        object.__setattr__(self, "exponents_l", l)

    @property
    def m(self) -> int:
        return self.scale_a.size


@dataclass(frozen=True)
class CombinedCovSpec:
    sigma2: float
    corr_phi1: CorrelationSpec
    corr_phi2: CorrelationSpec
    fidelity: FidelityKernelSpec

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidArgumentError("sigma2 must be positive")
        if self.corr_phi1.d != self.corr_phi2.d:
            raise InvalidArgumentError("corr_phi1 and corr_phi2 must share the input dimension")

    @property
    def d(self) -> int:
        return self.corr_phi1.d

    @property
    def m(self) -> int:
        return self.fidelity.m

    def with_sigma2(self, sigma2: float) -> "CombinedCovSpec":
        return CombinedCovSpec(float(sigma2), self.corr_phi1, self.corr_phi2, self.fidelity)


def _as_rows(X, width, name) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if width is None or arr.size == width else arr.reshape(-1, 1)
    if arr.ndim != 2 or (width is not None and arr.shape[1] != width):
        raise InvalidArgumentError(f"{name} has shape {arr.shape}, expected (n, {width})")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def _check_fid(T, m, name) -> np.ndarray:
    arr = _as_rows(T, m, name)
    if np.any(arr < 0):
        raise InvalidArgumentError(f"{name} has negative fidelity components")
    return arr


# scalar API ---------------------------------------------------------------


def corr_eval(h, spec: CorrelationSpec) -> float:
    """Correlation at difference vector ``h``."""
    h = _as_rows(h, spec.d, "h")
    return float(backend.core.corr_matrix(h, np.zeros_like(h), spec.phi, int(spec.family))[0, 0])


def corr_grad_phi(h, spec: CorrelationSpec, i: int) -> float:
    """Partial derivative of the correlation with respect to ``phi_i``.

    At ``h_i = 0`` the derivative is 0 for every family (the Matern kink
    uses the symmetric subgradient).
    """
    if not (0 <= int(i) < spec.d):
        raise InvalidArgumentError(f"dimension index {i} out of range for d={spec.d}")
    h = _as_rows(h, spec.d, "h")
    g = backend.core.corr_grad(h, np.zeros_like(h), spec.phi, int(spec.family))
    return float(g[int(i), 0, 0])


def fidelity_cov(t1, t2, spec: FidelityKernelSpec) -> float:
    t1 = _check_fid(t1, spec.m, "t1")
    t2 = _check_fid(t2, spec.m, "t2")
    return float(fidelity_matrix(t1, t2, spec)[0, 0])


def fidelity_cov_grad(t1, t2, spec: FidelityKernelSpec, which) -> float:
    """Derivative of the fidelity kernel w.r.t. ``"gamma"`` or ``("a", j)`` / ``"a_j"``."""
    t1 = _check_fid(t1, spec.m, "t1")
    t2 = _check_fid(t2, spec.m, "t2")
    idx = _grad_index(which, spec.m)
    return float(fidelity_grad(t1, t2, spec)[idx, 0, 0])


def _grad_index(which, m) -> int:
    if which == "gamma":
        return 0
    if isinstance(which, tuple) and len(which) == 2 and which[0] == "a":
        j = int(which[1])
    elif isinstance(which, str) and which.startswith("a_"):
        j = int(which[2:])
    else:
        raise InvalidArgumentError(f"unknown gradient target {which!r}")
    if not (0 <= j < m):
        raise InvalidArgumentError(f"a index {j} out of range for m={m}")
    return 1 + j


def combined_cov(x1, t1, x2, t2, spec: CombinedCovSpec) -> float:
    X1 = _as_rows(x1, spec.d, "x1")
    X2 = _as_rows(x2, spec.d, "x2")
    T1 = _check_fid(t1, spec.m, "t1")
    T2 = _check_fid(t2, spec.m, "t2")
    return float(cov_matrix(X1, T1, X2, T2, spec)[0, 0])


# matrix API ---------------------------------------------------------------


def corr_matrix(X1, X2, spec: CorrelationSpec) -> np.ndarray:
    return backend.core.corr_matrix(X1, X2, spec.phi, int(spec.family))


def corr_grad_matrix(X1, X2, spec: CorrelationSpec) -> np.ndarray:
    """Stack of ``dR/dphi_r`` with shape ``(d, n1, n2)``."""
    return backend.core.corr_grad(X1, X2, spec.phi, int(spec.family))


def fidelity_matrix(T1, T2, spec: FidelityKernelSpec) -> np.ndarray:
    return backend.core.fidelity_matrix(T1, T2, spec.scale_a, spec.exponents_l, spec.gamma)


def fidelity_grad(T1, T2, spec: FidelityKernelSpec) -> np.ndarray:
    """Stack ``[dK/dgamma, dK/da_1, ..., dK/da_m]`` with shape ``(1 + m, n1, n2)``."""
    return backend.core.fidelity_grad(T1, T2, spec.scale_a, spec.exponents_l, spec.gamma)


def fidelity_diag(T, spec: FidelityKernelSpec) -> np.ndarray:
    """``K_gamma(t, t)`` for each row: the ``1/gamma``-norm of ``a * t**l``."""
    u = spec.scale_a * np.atleast_2d(np.asarray(T, dtype=float)) ** spec.exponents_l
    M = u.max(axis=1)
    safe = np.where(M > 0, M, 1.0)
    s = np.sum((u / safe[:, None]) ** (1.0 / spec.gamma), axis=1)
    return np.where(M > 0, M * s**spec.gamma, 0.0)


def cov_matrix(X1, T1, X2, T2, spec: CombinedCovSpec) -> np.ndarray:
    """Combined covariance matrix between two sets of (x, t) rows."""
    R1 = corr_matrix(X1, X2, spec.corr_phi1)
    R2 = corr_matrix(X1, X2, spec.corr_phi2)
    Kt = fidelity_matrix(T1, T2, spec.fidelity)
    return spec.sigma2 * (R1 + R2 * Kt)
