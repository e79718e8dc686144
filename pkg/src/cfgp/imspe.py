"""Closed-form IMSPE, its one-point sequential reduction, and the cost-adjusted criterion.

The IMSPE is the integral over the unit cube of the posterior variance on the
exact-solution slice ``t = 0``. Once an :class:`ImspeState` is built, the
reduction from adding a candidate costs O(n^2) per candidate and never
refactorizes the covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, optimize
from scipy.stats import qmc

from . import integrals, kernels
from .exceptions import DegenerateCandidate, InvalidArgumentError, OptimizationFailure
from .gp import FittedModel

DEGENERATE_REL = 1e-10
FD_STEP = 1e-5


class ImspeState:
    """Cached quantities for IMSPE evaluation and sequential reduction.

    Attributes
    ----------
    E : float
        Prior variance integrated over the cube (``sigma2``).
    W, H, G : ndarray
        Integral matrices scaled by the process variance.
    value : float
        Current IMSPE ``I_n``.
    """

    def __init__(self, model: FittedModel):
        self.model = model
        spec = model.spec
        s2 = spec.sigma2
        X = model.dataset.X
        self.sigma2 = s2
        self.nugget = model.nugget
        self.E = s2
        self.W = s2 * s2 * integrals.w_matrix(X, X, spec.corr_phi1)
        self.G = integrals.g_matrix(model.basis, model.dataset.d)
        self.H = s2 * integrals.h_matrix(X, model.basis, spec.corr_phi1)
        n = model.n
        self.Ki = linalg.cho_solve((model.L, True), np.eye(n), check_finite=False)
        self.Ki = 0.5 * (self.Ki + self.Ki.T)
        self.A = model.KiF
        self.Qi = linalg.cho_solve(model.P_chol, np.eye(model.p))
        self.Qi = 0.5 * (self.Qi + self.Qi.T)
        self.M = self.A @ self.Qi @ self.A.T
        self.Pm = self.Qi @ self.A.T
        self.WA = self.W @ self.A
        self.AtWA = self.A.T @ self.WA
        self.AtH = self.A.T @ self.H
        # tr(AB) as an elementwise product sum
        self.value = float(
            self.E
            - np.sum(self.Ki * self.W)
            + np.sum(self.M * self.W)
            + np.sum(self.Qi * self.G)
            - 2.0 * np.sum(self.Pm * self.H.T)
        )

    @property
    def n(self) -> int:
        return self.model.n

    def reduction(self, Xc, Tc, return_mask: bool = False):
        """IMSPE reduction ``R_{n+1}`` for a batch of candidates.

        Degenerate candidates (latent conditional variance below
        ``max(1e-10 sigma2, 2 nugget)``, or an exact copy of a design row) get ``nan``; pass ``return_mask`` to
        also receive the boolean degeneracy mask.
        """
        mdl = self.model
        spec = mdl.spec
        s2 = self.sigma2
        Xc = np.atleast_2d(np.asarray(Xc, dtype=float))
        Tc = np.atleast_2d(np.asarray(Tc, dtype=float))
        if Tc.shape[0] == 1 and Xc.shape[0] > 1:
            Tc = np.repeat(Tc, Xc.shape[0], axis=0)
        k = mdl.cross_cov(Xc, Tc)  # (q, n)
        kappa = mdl.prior_var(Tc)
        f = mdl.basis.evaluate(Xc, Tc)  # (q, p)
        w = s2 * s2 * integrals.w_matrix(Xc, mdl.dataset.X, spec.corr_phi1)  # (q, n)
        wt = s2 * s2 * integrals.w_diag(Xc, spec.corr_phi1)
        ht = s2 * integrals.h_matrix(Xc, mdl.basis, spec.corr_phi1)  # (q, p)

        b = k @ self.Ki
        latent = kappa - np.sum(b * k, axis=1)
        degenerate = latent <= max(DEGENERATE_REL * s2, 2.0 * self.nugget)
        # the computed latent variance at a design row can exceed the threshold through cancellation
        same = np.all(Xc[:, None, :] == mdl.dataset.X[None], axis=2) & np.all(Tc[:, None, :] == mdl.dataset.T[None], axis=2)
        degenerate |= same.any(axis=1)
        s2n = np.where(degenerate, 1.0, latent + self.nugget)
        a = -b / s2n[:, None]
        c = s2n[:, None] * (a @ mdl.F) + f
        v = c / np.sqrt(s2n)[:, None]
        Qv = v @ self.Qi
        denom = 1.0 + np.sum(v * Qv, axis=1)
        B = Qv[:, :, None] * Qv[:, None, :] / denom[:, None, None]  # (q, p, p)
        Qc = c @ self.Qi - np.einsum("qij,qj->qi", B, c)
        cQc = np.sum(c * Qc, axis=1)

        aWa = np.sum((a @ self.W) * a, axis=1)
        wa = np.sum(w * a, axis=1)
        R1 = s2n * aWa + 2.0 * wa + wt / s2n

        aWA = a @ self.WA
        Atw = w @ self.A
        R2 = (
            np.einsum("qij,ij->q", B, self.AtWA)
            - (aWa * cQc + 2.0 * np.sum(aWA * Qc, axis=1))
            - 2.0 * (cQc * wa + np.sum(Qc * Atw, axis=1)) / s2n
            - cQc * wt / s2n**2
        )
        R3 = np.einsum("qij,ij->q", B, self.G)
        aH = a @ self.H
        R4 = -2.0 * (
            np.einsum("qij,ij->q", B, self.AtH)
            - np.sum(aH * Qc, axis=1)
            - np.sum(ht * Qc, axis=1) / s2n
        )
        R = np.where(degenerate, np.nan, R1 + R2 + R3 + R4)
        if return_mask:
            return R, degenerate
        return R

    def reduction_one(self, x, t) -> float:
        """Reduction for a single candidate; raises on degeneracy."""
        R, deg = self.reduction(np.atleast_1d(x)[None, :], np.atleast_1d(t)[None, :], return_mask=True)
        if deg[0]:
            raise DegenerateCandidate("candidate coincides numerically with the design")
        return float(R[0])


def imspe_closed(model: FittedModel):
    """Closed-form IMSPE of a fitted model. Returns ``(I_n, ImspeState)``."""
    state = ImspeState(model)
    return state.value, state


def imspe_reduction(state: ImspeState, x, t) -> float:
    return state.reduction_one(x, t)


def criterion_batch(state: ImspeState, Xc, Tc, cost_model) -> np.ndarray:
    """``R_{n+1} / C(t)`` for each candidate; degenerate candidates map to ``-inf``."""
    Tc = np.atleast_2d(np.asarray(Tc, dtype=float))
    cost = np.asarray(cost_model.cost_batch(Tc), dtype=float)
    if np.any(cost <= 0):
        raise InvalidArgumentError("cost must be positive")
    R = state.reduction(Xc, Tc)
    return np.where(np.isnan(R), -np.inf, R / cost)


def criterion(state: ImspeState, x, t, cost_model) -> float:
    return float(criterion_batch(state, np.atleast_1d(x)[None, :], np.atleast_1d(t)[None, :], cost_model)[0])


@dataclass
class CriterionResult:
    x: np.ndarray
    t: np.ndarray
    value: float
    reduction: float
    start_values: np.ndarray
    n_degenerate_starts: int


def optimize_criterion(
    state: ImspeState,
    cost_model,
    t_lo,
    t_hi,
    n_starts: int = 30,
    n_screen: int = 256,
    seed=0,
    tol: float = 1e-8,
    max_iters: int = 100,
    extra_starts=None,
) -> CriterionResult:
    """Maximize the cost-adjusted criterion over the unit cube times ``[t_lo, t_hi]``.

    Sobol screening picks the ``n_starts`` best points; each is refined by
    L-BFGS-B with central-difference gradients (step ``FD_STEP`` of the box width).
    Rows of ``extra_starts`` (``x`` then ``t``) are refined as well.
    """
    d = state.model.dataset.d
    t_lo = np.atleast_1d(np.asarray(t_lo, dtype=float))
    t_hi = np.atleast_1d(np.asarray(t_hi, dtype=float))
    m = t_lo.size
    if np.any(t_hi < t_lo):
        raise InvalidArgumentError("empty fidelity box")
    lo = np.concatenate([np.zeros(d), t_lo])
    hi = np.concatenate([np.ones(d), t_hi])
    width = hi - lo
    free = width > 0
    dim = d + m

    def batch(Z):
        Z = np.atleast_2d(Z)
        return criterion_batch(state, Z[:, :d], Z[:, d:], cost_model)

    rng = np.random.default_rng(seed)
    n_screen = max(n_screen, n_starts)
    U = qmc.Sobol(d=dim, scramble=True, seed=rng).random_base2(math.ceil(math.log2(n_screen)))[:n_screen]
    Z0 = lo + U * width
    vals = batch(Z0)
    n_deg = int(np.sum(~np.isfinite(vals)))
    order = np.argsort(-vals, kind="stable")
    finite = order[np.isfinite(vals[order])]
    starts = finite[:n_starts]
    if extra_starts is not None:
        Ze = np.clip(np.atleast_2d(np.asarray(extra_starts, dtype=float)), lo, hi)
        ve = batch(Ze)
        keep = np.flatnonzero(np.isfinite(ve))
        starts = np.concatenate([Z0.shape[0] + keep, starts])
        Z0 = np.vstack([Z0, Ze])
        vals = np.concatenate([vals, ve])
        finite = np.concatenate([finite, Z0.shape[0] - Ze.shape[0] + keep])
    if starts.size == 0:
        raise OptimizationFailure("every screened candidate was degenerate")
    step = FD_STEP * np.where(free, width, 1.0)
    scale = max(float(np.max(np.abs(vals[finite]))), 1e-300)
    nfree = int(free.sum())
    E = np.eye(dim)[free] * step[free][:, None]

    def fun(zf, base):
        z = base.copy()
        z[free] = zf
        pts = np.vstack([z, z + E, z - E])
        pts = np.clip(pts, lo, hi)
        v = batch(pts)
        if not np.isfinite(v[0]):
            return 1e3, np.zeros(nfree)
        vp, vm = v[1 : 1 + nfree], v[1 + nfree :]
        dz = pts[1 : 1 + nfree, free].diagonal() - pts[1 + nfree :, free].diagonal()
        ok = np.isfinite(vp) & np.isfinite(vm)
        g = np.zeros(nfree)
        g[ok] = (vp[ok] - vm[ok]) / dz[ok]
        return -v[0] / scale, -g / scale

    best_z, best_v = None, -np.inf
    for i in starts:
        z0 = Z0[i].copy()
        v0 = vals[i]
        z, v = z0, v0
        if nfree > 0:
            res = optimize.minimize(
                fun, z0[free], args=(z0,), jac=True, method="L-BFGS-B",
                bounds=list(zip(lo[free], hi[free])),
                options={"maxiter": max_iters, "gtol": tol, "ftol": 1e-13},
            )
            cand = z0.copy()
            cand[free] = res.x
            vc = batch(cand)[0]
            if np.isfinite(vc) and vc >= v0:
                z, v = cand, vc
        if v > best_v:
            best_z, best_v = z, v
    red = state.reduction(best_z[None, :d], best_z[None, d:])[0]
    return CriterionResult(best_z[:d], best_z[d:], float(best_v), float(red), vals[starts], n_deg)
