"""Test simulators and simulation-cost models.

Every simulator maps unit-cube inputs ``X`` (n, d) and fidelities ``T``
(n, m) to responses, and exposes ``exact(X)`` for the ``t = 0`` limit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from . import kernels
from .exceptions import ConfigError, InvalidArgumentError, SimulatorError
from .kernels import CorrelationSpec, Family, FidelityKernelSpec

# ---------------------------------------------------------------- cost models


class CostForm(str, enum.Enum):
    POWER_SINGLE = "power_single"
    PARAM_SINGLE = "param_single"
    PARAM_DOUBLE = "param_double"


@dataclass(frozen=True)
class CostModel:
    """Simulation cost ``b * prod_j t_j ** (-a_j)``.

    ``power_single`` is ``t**(-c)`` (``b = 1``), ``param_single`` is
    ``b * t**(-a)`` and ``param_double`` is ``b * t1**(-a1) * t2**(-a2)``.
    """

    form: CostForm
    exponents: tuple
    b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "form", CostForm(self.form))
        ex = tuple(float(v) for v in np.atleast_1d(self.exponents))
        object.__setattr__(self, "exponents", ex)
        want = 2 if self.form is CostForm.PARAM_DOUBLE else 1
        if len(ex) != want:
            raise InvalidArgumentError(f"{self.form.value} needs {want} exponent(s)")
        if any(e < 0 for e in ex) or not self.b > 0:
            raise InvalidArgumentError("cost exponents must be nonnegative and b positive")
        if self.form is CostForm.POWER_SINGLE and self.b != 1.0:
            raise InvalidArgumentError("power_single has no multiplier")

    @classmethod
    def power(cls, c: float = 2.0) -> "CostModel":
        return cls(CostForm.POWER_SINGLE, (c,))

    @classmethod
    def from_dict(cls, cfg: dict) -> "CostModel":
        cfg = dict(cfg)
        form = CostForm(cfg.pop("form", "power_single"))
        if form is CostForm.POWER_SINGLE:
            ex = (cfg.pop("c", 2.0),)
        elif form is CostForm.PARAM_SINGLE:
            ex = (cfg.pop("a"),)
        else:
            ex = (cfg.pop("a1"), cfg.pop("a2"))
        b = float(cfg.pop("b", 1.0))
        if cfg:
            raise ConfigError(f"unknown cost keys: {sorted(cfg)}")
        return cls(form, ex, b)

    @property
    def m(self) -> int:
        return len(self.exponents)

    @property
    def is_constant(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def cost_batch(self, T) -> np.ndarray:
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if T.shape[1] != self.m:
            raise InvalidArgumentError(f"cost model expects {self.m} fidelity components")
        if np.any(T <= 0):
            raise InvalidArgumentError("cost is undefined for nonpositive fidelity")
        return self.b * np.prod(T ** (-np.asarray(self.exponents)), axis=1)

    def cost(self, t) -> float:
        return float(self.cost_batch(np.atleast_1d(t)[None, :])[0])

    def inverse(self, c: float) -> float:
        """Fidelity with cost ``c`` along the diagonal ``t_1 = ... = t_m``."""
        tot = sum(self.exponents)
        if tot == 0:
            raise InvalidArgumentError("constant cost has no inverse")
        return (c / self.b) ** (-1.0 / tot)

    def affordable_box(self, remaining: float, t_lo, t_hi):
        """Sub-box ``[tau, t_hi]`` of fidelities whose cost fits in ``remaining``.

        The lower corner slides along the diagonal of the box until the corner
        cost is affordable (found by bisection); because cost is nonincreasing
        in every component the whole sub-box is then affordable. Returns
        ``None`` when even ``t_hi`` is too expensive.
        """
        t_lo = np.atleast_1d(np.asarray(t_lo, dtype=float))
        t_hi = np.atleast_1d(np.asarray(t_hi, dtype=float))
        if self.cost(t_hi) > remaining:
            return None
        if self.cost(t_lo) <= remaining:
            return t_lo, t_hi
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cost(t_lo + mid * (t_hi - t_lo)) <= remaining:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-15:
                break
        tau = t_lo + hi * (t_hi - t_lo)
        return np.minimum(tau, t_hi), t_hi


def cost_eval(model: CostModel, t, box=None) -> float:
    """Cost of one evaluation at ``t``; with ``box=(t_lo, t_hi)`` the point must lie inside."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if box is not None:
        lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in box)
        if np.any(t < lo) or np.any(t > hi):
            raise InvalidArgumentError(f"t={t} is outside the fidelity box")
    return model.cost(t)


# ----------------------------------------------------------------- simulators


class Simulator:
    """Base class; subclasses implement ``evaluate`` and ``exact``."""

    d: int = 1
    m: int = 1

    def __call__(self, X, T) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = np.atleast_2d(np.asarray(T, dtype=float))
        try:
            y = np.asarray(self.evaluate(X, T), dtype=float)
        except SimulatorError:
            raise
        except Exception as exc:
            raise SimulatorError(f"simulator failed: {exc}", X, T) from exc
        bad = ~np.isfinite(y)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SimulatorError("non-finite response", X[i], T[i])
        return y

    def evaluate(self, X, T):  # pragma: no cover - abstract
        raise NotImplementedError

    def exact(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self(X, np.zeros((X.shape[0], self.m)))


def poisson_average(x):
    """Closed-form average of the Poisson test problem on ``[-1, 1]``."""
    x = np.asarray(x, dtype=float)
    return 2.0 * (np.exp(x) + 1.0) / (x * x + np.pi**2)


class PoissonAverage(Simulator):
    """``poisson_average`` on unit-cube input ``u`` mapped to ``x = 2u - 1``; fidelity ignored."""

    d, m = 1, 1

    def evaluate(self, X, T):
        return poisson_average(2.0 * X[:, 0] - 1.0)


def default_error_shape(X, T):
    x = X[:, 0]
    t = T[:, 0]
    return np.sin(6.0 * np.pi * x + 4.0 * t) * (1.0 + 0.5 * np.cos(3.0 * np.pi * x))


class SyntheticMultiFidelity(Simulator):
    """``y = exact(x) + c * s(t) * error_shape(x, t)``.

    ``s(t) = sqrt(sum_j t_j**l_j)``, which is ``t**(l/2)`` for one component,
    matching an error variance of order ``t**l``.
    """

    def __init__(self, exact: Callable, error_shape: Callable = default_error_shape, amplitude=1.0, l=4.0, d=1, m=1):
        self._exact = exact
        self.error_shape = error_shape
        self.amplitude = float(amplitude)
        self.l = np.broadcast_to(np.asarray(l, dtype=float), (m,)).copy()
        self.d, self.m = d, m

    def scale(self, T) -> np.ndarray:
        return np.sqrt(np.sum(np.atleast_2d(T) ** self.l, axis=1))

    def evaluate(self, X, T):
        base = np.asarray(self._exact(X), dtype=float).ravel()
        s = self.scale(T)
        err = np.where(s > 0, np.asarray(self.error_shape(X, T), dtype=float).ravel(), 0.0)
        return base + self.amplitude * s * err


def synthetic_multifidelity(exact, error_shape=default_error_shape, amplitude=1.0, l=4.0, d=1, m=1):
    return SyntheticMultiFidelity(exact, error_shape, amplitude, l, d, m)


def poisson_synthetic(amplitude=0.05, l=4.0) -> SyntheticMultiFidelity:
    """Poisson average with an oscillatory synthetic discretization error."""
    return SyntheticMultiFidelity(lambda X: poisson_average(2.0 * X[:, 0] - 1.0), default_error_shape, amplitude, l)


MAX_LATTICE_NODES = 4000


class GpDraw(Simulator):
    """A sample path of the multi-fidelity prior, made deterministic by conditioning.

    The prior is sampled on a lattice (``nodes_per_dim`` points per input
    dimension times ``n_levels`` fidelity levels per component including 0)
    and off-lattice responses are the conditional mean given the lattice
    draw. Lattice nodes return the drawn values exactly.

    Because the exact-solution and error processes are independent and the
    error vanishes at ``t = 0``, each is drawn and conditioned on its own.
    """

    JITTER = 1e-10

    def __init__(
        self,
        phi2_sq: float,
        gamma: float,
        seed,
        d: int = 1,
        m: int = 1,
        phi1_sq: float = 1.0,
        a: float = 1.0,
        l: float = 4.0,
        sigma2: float = 1.0,
        family="gaussian",
        nodes_per_dim: int = 101,
        n_levels: int = 21,
        t_max: float = 1.0,
    ):
        self.d, self.m = int(d), int(m)
        n_x = nodes_per_dim**self.d
        n_t = n_levels**self.m - 1
        if n_x > MAX_LATTICE_NODES or n_t > MAX_LATTICE_NODES:
            raise ConfigError(
                f"lattice of {n_x} input nodes and {n_t} fidelity nodes exceeds the limit of {MAX_LATTICE_NODES}"
            )
        self.sigma2 = float(sigma2)
        self.spec1 = CorrelationSpec(family, np.full(self.d, math.sqrt(phi1_sq)))
        self.spec2 = CorrelationSpec(family, np.full(self.d, math.sqrt(phi2_sq)))
        self.fid = FidelityKernelSpec(gamma, np.full(self.m, a), np.full(self.m, l))
        self.nodes_per_dim, self.n_levels, self.t_max = nodes_per_dim, n_levels, float(t_max)
        g = np.linspace(0.0, 1.0, nodes_per_dim)
        self.xnodes = np.stack(np.meshgrid(*([g] * self.d), indexing="ij"), -1).reshape(-1, self.d)
        lv = np.linspace(0.0, self.t_max, n_levels)
        tn = np.stack(np.meshgrid(*([lv] * self.m), indexing="ij"), -1).reshape(-1, self.m)
        self.tnodes = tn[np.any(tn > 0, axis=1)]
        rng = np.random.default_rng(seed)
        self.L1 = self._chol(kernels.corr_matrix(self.xnodes, self.xnodes, self.spec1))
        self.L2 = self._chol(kernels.corr_matrix(self.xnodes, self.xnodes, self.spec2))
        self.Lt = self._chol(kernels.fidelity_matrix(self.tnodes, self.tnodes, self.fid))
        s = math.sqrt(self.sigma2)
        self.z1 = rng.standard_normal(self.xnodes.shape[0])
        self.Z2 = rng.standard_normal((self.xnodes.shape[0], self.tnodes.shape[0]))
        self.phi_nodes = s * (self.L1 @ self.z1)
        self.delta_nodes = s * (self.L2 @ self.Z2 @ self.Lt.T)

    def _chol(self, K):
        K = 0.5 * (K + K.T)
        jit = self.JITTER * float(np.mean(np.diag(K)))
        for _ in range(6):
            try:
                return linalg.cholesky(K + jit * np.eye(K.shape[0]), lower=True)
            except linalg.LinAlgError:
                jit *= 10.0
        raise ConfigError("lattice covariance could not be factorized")

    def _x_index(self, X):
        k = self.nodes_per_dim - 1
        idx = np.rint(X * k)
        on = np.all(np.abs(X * k - idx) < 1e-9, axis=1)
        flat = np.zeros(X.shape[0], dtype=np.int64)
        for r in range(self.d):
            flat = flat * self.nodes_per_dim + idx[:, r].astype(np.int64)
        return on, flat

    def _t_index(self, T):
        k = self.n_levels - 1
        u = T / self.t_max * k
        idx = np.rint(u)
        on = np.all(np.abs(u - idx) < 1e-9, axis=1) & np.all(T <= self.t_max * (1 + 1e-12), axis=1)
        flat = np.zeros(T.shape[0], dtype=np.int64)
        for j in range(self.m):
            flat = flat * self.n_levels + np.clip(idx[:, j], 0, k).astype(np.int64)
        return on, flat - 1  # the all-zero level was dropped and sorts first

    def _exact_part(self, X):
        on, flat = self._x_index(X)
        out = np.empty(X.shape[0])
        if np.any(on):
            out[on] = self.phi_nodes[flat[on]]
        off = ~on
        if np.any(off):
            r = kernels.corr_matrix(self.xnodes, X[off], self.spec1)
            white = linalg.solve_triangular(self.L1, r, lower=True)
            out[off] = math.sqrt(self.sigma2) * (white.T @ self.z1)
        return out

    def _error_part(self, X, T):
        out = np.zeros(X.shape[0])
        pos = np.any(T > 0, axis=1)
        if not np.any(pos):
            return out
        Xp, Tp = X[pos], T[pos]
        xon, xi = self._x_index(Xp)
        ton, ti = self._t_index(Tp)
        res = np.empty(Xp.shape[0])
        both = xon & ton
        if np.any(both):
            res[both] = self.delta_nodes[xi[both], ti[both]]
        rest = ~both
        if np.any(rest):
            rx = kernels.corr_matrix(self.xnodes, Xp[rest], self.spec2)
            wx = linalg.solve_triangular(self.L2, rx, lower=True)
            rt = kernels.fidelity_matrix(self.tnodes, Tp[rest], self.fid)
            wt = linalg.solve_triangular(self.Lt, rt, lower=True)
            res[rest] = math.sqrt(self.sigma2) * np.einsum("iq,ij,jq->q", wx, self.Z2, wt)
        out[pos] = res
        return out

    def evaluate(self, X, T):
        if X.shape[1] != self.d or T.shape[1] != self.m:
            raise InvalidArgumentError("input or fidelity dimension mismatch")
        return self._exact_part(X) + self._error_part(X, T)

    def exact(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self._exact_part(X)


def gp_draw(params: Optional[dict] = None, seed=0, **kwargs) -> GpDraw:
    """Build a GP-draw simulator; ``params`` keys match :class:`GpDraw` arguments."""
    p = {"phi2_sq": 1.0, "gamma": 0.5}
    p.update(params or {})
    p.update(kwargs)
    return GpDraw(seed=seed, **p)


def make_simulator(cfg: dict, seed=0) -> Simulator:
    """Registry lookup: ``{"kind": "gp_draw" | "poisson_average" | "synthetic_poisson", ...}``."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", "gp_draw")
    if kind == "gp_draw":
        return gp_draw(cfg, seed=seed)
    if kind == "poisson_average":
        if cfg:
            raise ConfigError(f"unknown simulator keys: {sorted(cfg)}")
        return PoissonAverage()
    if kind == "synthetic_poisson":
        allowed = {"amplitude", "l"}
        if set(cfg) - allowed:
            raise ConfigError(f"unknown simulator keys: {sorted(set(cfg) - allowed)}")
        return poisson_synthetic(**cfg)
    raise ConfigError(f"unknown simulator kind {kind!r}")
