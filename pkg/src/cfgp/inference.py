"""Profile log-likelihood, analytic gradient, multi-start fitting and Fisher information."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.stats import qmc

from . import kernels
from .exceptions import FitFailure, InvalidArgumentError, NumericalError
from .gp import Dataset, FittedModel, TrendBasis, jittered_cholesky, unit_correlation
from .kernels import CombinedCovSpec, CorrelationSpec, Family, FidelityKernelSpec

FAILED_OBJECTIVE = 1e25


@dataclass(frozen=True)
class ModelConfig:
    """What is estimated and within which box.

    ``fixed_gamma`` pins the roughness parameter (0.5 gives the Brownian-motion
    variant). Bounds on ``phi`` are stated as bounds on ``phi**2``.
    """

    family: Family = Family.GAUSSIAN
    exponents_l: Optional[tuple] = None
    fixed_gamma: Optional[float] = None
    gamma_bounds: tuple = (0.01, 0.99)
    phi2_bounds: tuple = (1e-4, 1e4)
    a_bounds: tuple = (1e-4, 1e4)

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        lo, hi = self.gamma_bounds
        if not (0.0 < lo < hi < 1.0):
            raise InvalidArgumentError("gamma bounds must satisfy 0 < lo < hi < 1")
        if self.fixed_gamma is not None and not (0.0 < float(self.fixed_gamma) < 1.0):
            raise InvalidArgumentError("fixed_gamma must lie in (0, 1)")

    def l_vector(self, m: int) -> np.ndarray:
        if self.exponents_l is None:
            return np.full(m, 4.0)
        l = np.asarray(self.exponents_l, dtype=float)
        if l.size != m:
            raise InvalidArgumentError(f"expected {m} exponents, got {l.size}")
        return l


class Parameterization:
    """Map between the unconstrained vector and kernel hyperparameters.

    Layout: ``[log phi1 (d), log phi2 (d), log a (m), z]`` where
    ``gamma = lo + (hi - lo) * sigmoid(z)``; ``z`` is absent when gamma is fixed.
    """

    Z_BOUND = 9.0

    def __init__(self, d: int, m: int, config: ModelConfig):
        self.d, self.m, self.config = d, m, config
        self.l = config.l_vector(m)
        self.estimate_gamma = config.fixed_gamma is None
        self.size = 2 * d + m + int(self.estimate_gamma)

    def names(self):
        out = [f"log_phi1_{r}" for r in range(self.d)] + [f"log_phi2_{r}" for r in range(self.d)]
        out += [f"log_a_{j}" for j in range(self.m)]
        if self.estimate_gamma:
            out.append("z_gamma")
        return out

    def bounds(self):
        plo, phi = (0.5 * math.log(b) for b in self.config.phi2_bounds)
        alo, ahi = (math.log(b) for b in self.config.a_bounds)
        out = [(plo, phi)] * (2 * self.d) + [(alo, ahi)] * self.m
        if self.estimate_gamma:
            out.append((-self.Z_BOUND, self.Z_BOUND))
        return out

    def gamma_of(self, z: float) -> float:
        lo, hi = self.config.gamma_bounds
        return lo + (hi - lo) / (1.0 + math.exp(-z))

    def dgamma_dz(self, z: float) -> float:
        lo, hi = self.config.gamma_bounds
        s = 1.0 / (1.0 + math.exp(-z))
        return (hi - lo) * s * (1.0 - s)

    def z_of(self, gamma: float) -> float:
        lo, hi = self.config.gamma_bounds
        s = (gamma - lo) / (hi - lo)
        s = min(max(s, 1e-12), 1 - 1e-12)
        z = math.log(s / (1.0 - s))
        return min(max(z, -self.Z_BOUND), self.Z_BOUND)

    def to_spec(self, theta, sigma2: float = 1.0) -> CombinedCovSpec:
        theta = np.asarray(theta, dtype=float)
        d, m = self.d, self.m
        phi1 = np.exp(theta[:d])
        phi2 = np.exp(theta[d : 2 * d])
        a = np.exp(theta[2 * d : 2 * d + m])
        gamma = self.gamma_of(theta[-1]) if self.estimate_gamma else float(self.config.fixed_gamma)
        fam = self.config.family
        return CombinedCovSpec(
            sigma2,
            CorrelationSpec(fam, phi1),
            CorrelationSpec(fam, phi2),
            FidelityKernelSpec(gamma, a, self.l),
        )

    def from_spec(self, spec: CombinedCovSpec) -> np.ndarray:
        theta = list(np.log(spec.corr_phi1.phi)) + list(np.log(spec.corr_phi2.phi)) + list(np.log(spec.fidelity.scale_a))
        if self.estimate_gamma:
            theta.append(self.z_of(spec.fidelity.gamma))
        lo, hi = np.array(self.bounds()).T
        return np.clip(np.asarray(theta, dtype=float), lo, hi)


def _check_sizes(dataset: Dataset, basis: TrendBasis):
    p = basis.n_columns(dataset.d)
    if dataset.n <= p:
        raise InvalidArgumentError(f"need n > p, got n={dataset.n}, p={p}")
    return p


def _projection_residual(F, y):
    """``Z = (I - F (F^T F)^{-1} F^T) y``."""
    coef, *_ = linalg.lstsq(F, y)
    return y - F @ coef


class _Workspace:
    """Shared factorizations of ``K_0 + jitter I`` for value and gradient."""

    def __init__(self, dataset, basis, spec, jitter=None, unit_K=None):
        self.n = dataset.n
        self.F = basis.evaluate(dataset.X, dataset.T)
        self.p = self.F.shape[1]
        self.K0 = unit_correlation(dataset, spec) if unit_K is None else unit_K
        self.L, self.eta, self.jitter = jittered_cholesky(self.K0, jitter)
        self.A = linalg.cho_solve((self.L, True), self.F, check_finite=False)
        P = self.F.T @ self.A
        self.P = 0.5 * (P + P.T)
        try:
            self.LP = linalg.cholesky(self.P, lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError("P_n is singular", {"p": self.p}) from exc
        y = dataset.y
        self.Z = _projection_residual(self.F, y)
        KiZ = linalg.cho_solve((self.L, True), self.Z, check_finite=False)
        self.PiZ = KiZ - self.A @ linalg.cho_solve((self.LP, True), self.A.T @ self.Z)
        self.q = float(self.Z @ self.PiZ)
        self.y = y

    def loglik(self):
        if not (self.q > 0 and np.isfinite(self.q)):
            raise NumericalError("nonpositive quadratic form in the profile likelihood", {"q": self.q})
        return (
            -0.5 * (self.n - self.p) * math.log(self.q)
            - np.sum(np.log(np.diag(self.L)))
            - np.sum(np.log(np.diag(self.LP)))
        )

    def weight_matrix(self):
        """``(n - p)/q * u u^T - Pi`` so that ``dl = 0.5 * sum(Wt * dK)``."""
        Ki = linalg.cho_solve((self.L, True), np.eye(self.n), check_finite=False)
        Pi = Ki - self.A @ linalg.cho_solve((self.LP, True), self.A.T)
        u = self.PiZ
        return (self.n - self.p) / self.q * np.outer(u, u) - Pi

    def beta_sigma2(self):
        beta = linalg.cho_solve((self.LP, True), self.A.T @ self.y)
        r = self.y - self.F @ beta
        Kir = linalg.cho_solve((self.L, True), r, check_finite=False)
        return beta, max(float(r @ Kir) / (self.n - self.p), 0.0)


def kernel_derivatives(dataset: Dataset, spec: CombinedCovSpec, param: Parameterization, theta):
    """``dK_0/dtheta_k`` for each unconstrained coordinate, shape (size, n, n)."""
    X, T = dataset.X, dataset.T
    d, m = param.d, param.m
    R2 = kernels.corr_matrix(X, X, spec.corr_phi2)
    Kt = kernels.fidelity_matrix(T, T, spec.fidelity)
    out = np.empty((param.size, dataset.n, dataset.n))
    g1 = kernels.corr_grad_matrix(X, X, spec.corr_phi1)
    g2 = kernels.corr_grad_matrix(X, X, spec.corr_phi2)
    for r in range(d):
        out[r] = g1[r] * spec.corr_phi1.phi[r]
        out[d + r] = g2[r] * Kt * spec.corr_phi2.phi[r]
    gf = kernels.fidelity_grad(T, T, spec.fidelity)
    for j in range(m):
        out[2 * d + j] = R2 * gf[1 + j] * spec.fidelity.scale_a[j]
    if param.estimate_gamma:
        out[-1] = R2 * gf[0] * param.dgamma_dz(theta[-1])
    return out


def profile_loglik(dataset: Dataset, basis: TrendBasis, spec: CombinedCovSpec, jitter=None) -> float:
    """Concentrated log-likelihood with beta and sigma2 profiled out (constant omitted)."""
    _check_sizes(dataset, basis)
    return _Workspace(dataset, basis, spec, jitter).loglik()


def loglik_and_grad(dataset: Dataset, basis: TrendBasis, theta, param: Parameterization, jitter=None):
    """Value and gradient with respect to the unconstrained vector.

    The jitter ``eta * mean(diag K_0)`` is differentiated too, so the gradient
    is exact for the objective actually evaluated.
    """
    _check_sizes(dataset, basis)
    spec = param.to_spec(theta)
    ws = _Workspace(dataset, basis, spec, jitter)
    val = ws.loglik()
    dK = kernel_derivatives(dataset, spec, param, theta)
    Wt = ws.weight_matrix()
    grad = 0.5 * np.einsum("ij,kij->k", Wt, dK)
    if jitter is None:
        tr = np.trace(Wt)
        grad += 0.5 * ws.eta * np.mean(np.diagonal(dK, axis1=1, axis2=2), axis=1) * tr
    return val, grad


def loglik_grad(dataset: Dataset, basis: TrendBasis, spec: CombinedCovSpec, config: Optional[ModelConfig] = None):
    """Gradient of the profile log-likelihood with respect to the unconstrained parameters of ``spec``."""
    if config is None:
        config = ModelConfig(family=spec.corr_phi1.family, exponents_l=tuple(spec.fidelity.exponents_l))
    param = Parameterization(dataset.d, dataset.m, config)
    theta = param.from_spec(spec)
    return loglik_and_grad(dataset, basis, theta, param)[1]


def estimate_beta_sigma(dataset: Dataset, basis: TrendBasis, spec: CombinedCovSpec, jitter=None, unit_K=None):
    """GLS trend coefficients and the profiled process variance."""
    _check_sizes(dataset, basis)
    return _Workspace(dataset, basis, spec, jitter, unit_K=unit_K).beta_sigma2()


@dataclass
class StartRecord:
    start: list
    end: list
    value: float
    iterations: int
    converged: bool
    message: str = ""


@dataclass
class FitReport:
    spec: CombinedCovSpec
    beta: np.ndarray
    loglik: float
    starts: list
    grad_norm: float
    best_index: int
    eta: float
    settings: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return self.spec.fidelity.gamma

    def to_dict(self) -> dict:
        s = self.spec
        return {
            "sigma2": s.sigma2,
            "phi1": s.corr_phi1.phi.tolist(),
            "phi2": s.corr_phi2.phi.tolist(),
            "a": s.fidelity.scale_a.tolist(),
            "gamma": s.fidelity.gamma,
            "l": s.fidelity.exponents_l.tolist(),
            "family": s.corr_phi1.family.name.lower(),
            "beta": np.asarray(self.beta).tolist(),
            "loglik": self.loglik,
            "grad_norm": self.grad_norm,
            "best_index": self.best_index,
            "eta": self.eta,
            "settings": self.settings,
            "starts": [asdict(r) for r in self.starts],
        }


def sobol_starts(bounds, n, rng) -> np.ndarray:
    """Scrambled Sobol points scaled to ``bounds``."""
    if n <= 0:
        return np.empty((0, len(bounds)))
    lo, hi = np.array(bounds, dtype=float).T
    sampler = qmc.Sobol(d=len(bounds), scramble=True, seed=rng)
    pts = sampler.random_base2(max(0, math.ceil(math.log2(n))))[:n]
    return lo + pts * (hi - lo)


def fit_mle(
    dataset: Dataset,
    basis: TrendBasis,
    config: ModelConfig = ModelConfig(),
    n_starts: int = 20,
    max_iters: int = 200,
    tol: float = 1e-6,
    seed=0,
    extra_starts: Sequence = (),
) -> FitReport:
    """Maximize the profile likelihood by multi-start bounded L-BFGS.

    ``extra_starts`` (specs or unconstrained vectors) are tried first, then
    ``n_starts`` scrambled Sobol points. Ties go to the lowest start index.
    """
    _check_sizes(dataset, basis)
    if n_starts < 0 or (n_starts == 0 and not extra_starts):
        raise InvalidArgumentError("need at least one start")
    param = Parameterization(dataset.d, dataset.m, config)
    bounds = param.bounds()
    rng = np.random.default_rng(seed)
    starts = [param.from_spec(s) if isinstance(s, CombinedCovSpec) else np.asarray(s, dtype=float) for s in extra_starts]
    starts += list(sobol_starts(bounds, n_starts, rng))

    def objective(theta):
        try:
            v, g = loglik_and_grad(dataset, basis, theta, param)
        except (NumericalError, linalg.LinAlgError, FloatingPointError, ValueError):
            return FAILED_OBJECTIVE, np.zeros_like(theta)
        if not (np.isfinite(v) and np.all(np.isfinite(g))):
            return FAILED_OBJECTIVE, np.zeros_like(theta)
        return -v, -g

    records = []
    best, best_val = None, -np.inf
    for i, x0 in enumerate(starts):
        f0, _ = objective(x0)
        with np.errstate(all="ignore"):
            res = optimize.minimize(
                objective, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                options={"maxiter": max_iters, "gtol": tol},
            )
        x, val = res.x, -float(res.fun)
        if -f0 > val:  # never return worse than the start itself
            x, val = x0, -f0
        ok = val > -FAILED_OBJECTIVE / 2
        records.append(StartRecord(list(map(float, x0)), list(map(float, x)), val if ok else float("-inf"),
                                   int(res.nit), bool(res.success), str(res.message)))
        if ok and val > best_val:
            best, best_val = x, val
    if best is None:
        raise FitFailure("no optimizer start produced a finite likelihood")
    unit = param.to_spec(best)
    ws = _Workspace(dataset, basis, unit)
    beta, s2 = ws.beta_sigma2()
    s2 = max(s2, 1e-300)
    _, g = loglik_and_grad(dataset, basis, best, param)
    # projected gradient norm (zero components pinned at active bounds)
    lo, hi = np.array(bounds).T
    pg = np.where(((best <= lo) & (g < 0)) | ((best >= hi) & (g > 0)), 0.0, g)
    return FitReport(
        spec=unit.with_sigma2(s2),
        beta=beta,
        loglik=best_val,
        starts=records,
        grad_norm=float(np.linalg.norm(pg)),
        best_index=int(np.argmax([r.value for r in records])),
        eta=float(ws.eta),
        settings={"n_starts": n_starts, "n_extra": len(extra_starts), "max_iters": max_iters, "tol": tol,
                  "gamma_bounds": list(config.gamma_bounds), "phi2_bounds": list(config.phi2_bounds),
                  "a_bounds": list(config.a_bounds), "fixed_gamma": config.fixed_gamma},
    )


def fit_model(dataset: Dataset, basis: TrendBasis, config: ModelConfig = ModelConfig(), **kwargs):
    """Fit hyperparameters and condition the GP. Returns ``(FittedModel, FitReport)``."""
    report = fit_mle(dataset, basis, config, **kwargs)
    model = FittedModel(dataset, basis, report.spec, beta=report.beta)
    return model, report


FISHER_PARAMS = ("sigma2", "gamma")


def _cov_derivative(X, T, spec: CombinedCovSpec, name: str) -> np.ndarray:
    s2 = spec.sigma2
    if name == "sigma2":
        return kernels.cov_matrix(X, T, X, T, spec.with_sigma2(1.0))
    R2 = kernels.corr_matrix(X, X, spec.corr_phi2)
    if name == "gamma":
        return s2 * R2 * kernels.fidelity_grad(T, T, spec.fidelity)[0]
    if name.startswith("a_"):
        return s2 * R2 * kernels.fidelity_grad(T, T, spec.fidelity)[1 + int(name[2:])]
    if name.startswith("phi1_"):
        return s2 * kernels.corr_grad_matrix(X, X, spec.corr_phi1)[int(name[5:])]
    if name.startswith("phi2_"):
        Kt = kernels.fidelity_matrix(T, T, spec.fidelity)
        return s2 * kernels.corr_grad_matrix(X, X, spec.corr_phi2)[int(name[5:])] * Kt
    raise InvalidArgumentError(f"unknown parameter {name!r}")


def fisher_matrix(X, T, spec: CombinedCovSpec, names: Sequence[str]) -> np.ndarray:
    """``0.5 tr(K^-1 dK_i K^-1 dK_j)`` for the named parameters.

    Names: ``sigma2``, ``gamma``, ``a_j``, ``phi1_r``, ``phi2_r`` (derivatives
    with respect to ``phi`` itself).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    K = kernels.cov_matrix(X, T, X, T, spec)
    K = 0.5 * (K + K.T)
    L, _, nug = jittered_cholesky(K)
    Ks = [linalg.cho_solve((L, True), _cov_derivative(X, T, spec, nm), check_finite=False) for nm in names]
    k = len(names)
    out = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            out[i, j] = out[j, i] = 0.5 * np.sum(Ks[i] * Ks[j].T)
    return out


def fisher_information(X, T, spec: CombinedCovSpec, i: str, j: str) -> float:
    return float(fisher_matrix(X, T, spec, [i, j])[0, 1])
