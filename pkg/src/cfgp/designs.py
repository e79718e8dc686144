"""Initial designs over the input cube times the fidelity box.

All generators are deterministic given ``seed``. Fidelity boxes are
``[t_lo, t_hi]`` per component with larger ``t`` meaning cheaper and coarser.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .exceptions import InvalidArgumentError


class DesignKind(str, enum.Enum):
    MAXPRO = "maxpro"
    MMED = "mmed"
    REPETITIVE = "repetitive"
    NESTED = "nested"
    COUPLED_NESTED = "coupled_nested"


@dataclass
class DesignPlan:
    X: np.ndarray
    T: np.ndarray
    kind: DesignKind
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def total_cost(self, cost_model) -> float:
        return float(np.sum(cost_model.cost_batch(self.T)))


def maxpro_criterion(X) -> float:
    """``sum_{i<j} prod_r (x_ir - x_jr)**-2``; infinite if any coordinate repeats."""
    X = np.atleast_2d(X)
    n = X.shape[0]
    iu = np.triu_indices(n, 1)
    with np.errstate(divide="ignore"):
        prod = np.ones(iu[0].size)
        for r in range(X.shape[1]):
            prod = prod / (X[iu[0], r] - X[iu[1], r]) ** 2
    return float(np.sum(prod))


def _lhs_start(n, d, rng) -> np.ndarray:
    """Latin hypercube of cell centres ordered by a scrambled Sobol sequence."""
    U = qmc.Sobol(d=d, scramble=True, seed=rng).random_base2(max(1, math.ceil(math.log2(n))))[:n]
    ranks = np.argsort(np.argsort(U, axis=0, kind="stable"), axis=0, kind="stable")
    return (ranks + 0.5) / n


def _pair_matrix(X):
    n, d = X.shape
    P = np.ones((n, n))
    with np.errstate(divide="ignore"):
        for r in range(d):
            P = P / (X[:, r][:, None] - X[:, r][None, :]) ** 2
    np.fill_diagonal(P, 0.0)
    return P


def anneal_maxpro(X0, rng, n_proposals: int = 10_000, t_start: float = 0.05, t_end: float = 1e-5):
    """Simulated annealing over within-column swaps of a Latin hypercube.

    Acceptance uses the relative change in the criterion with a geometric
    temperature schedule; the best design visited is returned.
    """
    X = np.array(X0, dtype=float)
    n, d = X.shape
    if n < 3:
        return X, maxpro_criterion(X)
    P = _pair_matrix(X)
    psi = float(P.sum()) / 2.0
    best_X, best_psi = X.copy(), psi
    cool = (t_end / t_start) ** (1.0 / max(n_proposals - 1, 1))
    temp = t_start
    idx = np.arange(n)
    I = rng.integers(n, size=n_proposals)
    J = (I + rng.integers(1, n, size=n_proposals)) % n
    Rr = rng.integers(d, size=n_proposals)
    Uu = rng.random(n_proposals)
    for step in range(n_proposals):
        i, j, r = I[step], J[step], Rr[step]
        mask = (idx != i) & (idx != j)
        di = (X[i, r] - X[mask, r]) ** 2
        dj = (X[j, r] - X[mask, r]) ** 2
        new_i = P[i, mask] * di / dj
        new_j = P[j, mask] * dj / di
        delta = float(np.sum(new_i - P[i, mask]) + np.sum(new_j - P[j, mask]))
        rel = delta / psi
        if rel < 0 or Uu[step] < math.exp(-rel / temp):
            X[i, r], X[j, r] = X[j, r], X[i, r]
            P[i, mask], P[j, mask] = new_i, new_j
            P[mask, i], P[mask, j] = new_i, new_j
            psi += delta
            if psi < best_psi:
                best_psi, best_X = psi, X.copy()
        temp *= cool
    # recompute to shed accumulated rounding
    return best_X, maxpro_criterion(best_X)


def generate_maxpro_like(n: int, d: int, seed=0, n_proposals: int = 10_000) -> np.ndarray:
    """Maximum-projection Latin hypercube in ``[0, 1]^d``."""
    if n < 2:
        raise InvalidArgumentError("a MaxPro design needs n >= 2")
    rng = np.random.default_rng(seed)
    X0 = _lhs_start(n, d, rng)
    if d == 1:
        # every one-dimensional Latin hypercube has the same criterion value
        return X0
    X, _ = anneal_maxpro(X0, rng, n_proposals)
    return X


def _scale_t(U, t_lo, t_hi):
    return t_lo + U * (t_hi - t_lo)


def _fid_box(t_lo, t_hi):
    t_lo = np.atleast_1d(np.asarray(t_lo, dtype=float))
    t_hi = np.atleast_1d(np.asarray(t_hi, dtype=float))
    if t_lo.shape != t_hi.shape or np.any(t_hi < t_lo) or np.any(t_lo <= 0):
        raise InvalidArgumentError("fidelity box must satisfy 0 < t_lo <= t_hi")
    return t_lo, t_hi


def maxpro_design(n, d, t_lo, t_hi, seed=0) -> DesignPlan:
    """MaxPro-like design over the joint (x, t) space."""
    t_lo, t_hi = _fid_box(t_lo, t_hi)
    m = t_lo.size
    U = generate_maxpro_like(n, d + m, seed)
    return DesignPlan(U[:, :d], _scale_t(U[:, d:], t_lo, t_hi), DesignKind.MAXPRO)


def _t_grid(t_lo, t_hi, per_dim):
    m = t_lo.size
    g = np.linspace(0.0, 1.0, per_dim)
    U = np.stack(np.meshgrid(*([g] * m), indexing="ij"), -1).reshape(-1, m)
    return U, _scale_t(U, t_lo, t_hi)


def generate_mmed(n, d, m, cost_model, seed=0, t_lo=None, t_hi=None, grid_per_dim: Optional[int] = None) -> DesignPlan:
    """MaxPro input locations with fidelities chosen by cost-weighted maximin.

    Points are processed in order; each takes the grid fidelity maximizing
    ``(C_min / C(t))**(1/(d+m)) * min distance`` to the points already placed,
    measured in the unit-scaled (x, t) space. Cheaper fidelities therefore win
    ties in coverage.
    """
    if t_lo is None or t_hi is None:
        raise InvalidArgumentError("fidelity box required")
    t_lo, t_hi = _fid_box(t_lo, t_hi)
    if t_lo.size != m:
        raise InvalidArgumentError("fidelity box does not match m")
    X = generate_maxpro_like(n, d, seed) if n >= 2 else np.full((n, d), 0.5)
    if np.all(t_lo == t_hi):
        return DesignPlan(X, np.repeat(t_lo[None, :], n, axis=0), DesignKind.MMED)
    per = grid_per_dim or (101 if m == 1 else 21)
    U, Tg = _t_grid(t_lo, t_hi, per)
    if cost_model.is_constant:
        warnings.warn("constant cost model: MMED falls back to unweighted maximin", RuntimeWarning, stacklevel=2)
        weight = np.ones(U.shape[0])
    else:
        c = cost_model.cost_batch(Tg)
        weight = (c.min() / c) ** (1.0 / (d + m))
    chosen = np.empty((n, m))
    for i in range(n):
        if i == 0:
            k = int(np.argmax(weight))
        else:
            pts = np.hstack([np.repeat(X[i][None, :], U.shape[0], axis=0), U])
            prev = np.hstack([X[:i], chosen[:i]])
            dist = cdist(pts, prev).min(axis=1)
            k = int(np.argmax(weight * dist))
        chosen[i] = U[k]
    return DesignPlan(X, _scale_t(chosen, t_lo, t_hi), DesignKind.MMED)


def nested_levels(L, t_lo, t_hi) -> np.ndarray:
    """Evenly spaced fidelity levels from coarse (``t_hi``) to fine (``t_lo``), shape (L, m)."""
    if L == 1:
        return t_hi[None, :].copy()
    s = np.linspace(0.0, 1.0, L)[:, None]
    return t_hi - s * (t_hi - t_lo)


def generate_nested(n0, L, d, t_lo, t_hi, seed=0, t_levels=None) -> DesignPlan:
    """Multi-level design where each finer level keeps half of the previous locations."""
    t_lo, t_hi = _fid_box(t_lo, t_hi)
    if L < 1 or n0 < max(2, 2 ** (L - 1)):
        raise InvalidArgumentError(f"n0={n0} too small for {L} halvings")
    levels = nested_levels(L, t_lo, t_hi) if t_levels is None else np.atleast_2d(np.asarray(t_levels, dtype=float))
    if levels.shape[0] != L:
        raise InvalidArgumentError("need one fidelity level per design level")
    if L > 1 and np.any(np.diff(levels, axis=0) >= 0):
        raise InvalidArgumentError("fidelity levels must be strictly decreasing")
    rng = np.random.default_rng(seed)
    X0 = generate_maxpro_like(n0, d, rng)
    keep = np.arange(n0)
    Xs, Ts, lvl = [], [], []
    for k in range(L):
        if k > 0:
            perm = rng.permutation(keep)
            keep = np.sort(perm[1::2])
        Xs.append(X0[keep])
        Ts.append(np.repeat(levels[k][None, :], keep.size, axis=0))
        lvl.append(np.full(keep.size, k))
    return DesignPlan(np.vstack(Xs), np.vstack(Ts), DesignKind.NESTED,
                      {"level": np.concatenate(lvl), "levels": levels, "n0": n0})


def stack_ladder(s, t_lo, t_hi) -> np.ndarray:
    """``s`` geometrically spaced fidelities strictly inside the upper half of the box."""
    mid = 0.5 * (t_lo + t_hi)
    k = np.arange(1, s + 1)[:, None] / (s + 1)
    return mid * (t_hi / mid) ** k


def generate_coupled_nested(n0, L, d, t_lo, t_hi, seed=0, stack_size: int = 4, t_levels=None) -> DesignPlan:
    """Nested design plus a fidelity ladder at one retained finest-level location."""
    if stack_size < 2:
        raise InvalidArgumentError("stack size must be at least 2")
    t_lo, t_hi = _fid_box(t_lo, t_hi)
    base = generate_nested(n0, L, d, t_lo, t_hi, seed, t_levels)
    finest = base.meta["level"] == base.meta["level"].max()
    x_star = base.X[np.flatnonzero(finest)[0]]
    ladder = stack_ladder(stack_size, t_lo, t_hi)
    existing = {tuple(t) for x, t in zip(base.X, base.T) if np.array_equal(x, x_star)}
    ladder = np.array([t * (1 - 1e-9) if tuple(t) in existing else t for t in ladder])
    meta = dict(base.meta)
    meta["stack_x"] = x_star
    meta["level"] = np.concatenate([base.meta["level"], np.full(stack_size, -1)])
    return DesignPlan(
        np.vstack([base.X, np.repeat(x_star[None, :], stack_size, axis=0)]),
        np.vstack([base.T, ladder]),
        DesignKind.COUPLED_NESTED,
        meta,
    )


def generate_repetitive(n_loc, reps_per_loc, d, t_lo, t_hi, seed=0) -> DesignPlan:
    """Each input location evaluated at ``reps_per_loc`` distinct fidelities.

    The ``n_loc * reps_per_loc`` fidelity values form a Latin hypercube over
    the box (so their projections onto T are spread out) and are dealt to
    locations by a seeded permutation.
    """
    if n_loc < 2 or reps_per_loc < 2:
        raise InvalidArgumentError("need n_loc >= 2 and reps_per_loc >= 2")
    t_lo, t_hi = _fid_box(t_lo, t_hi)
    m = t_lo.size
    rng = np.random.default_rng(seed)
    X = generate_maxpro_like(n_loc, d, rng)
    N = n_loc * reps_per_loc
    Ut = generate_maxpro_like(N, m, rng) if m > 1 else ((np.arange(N) + 0.5) / N)[:, None]
    Ut = Ut[rng.permutation(N)]
    T = _scale_t(Ut, t_lo, t_hi)
    return DesignPlan(np.repeat(X, reps_per_loc, axis=0), T, DesignKind.REPETITIVE)


def top_up(plan: DesignPlan, budget, cost_model, t_lo, t_hi, n_cand: int = 512, seed=0) -> DesignPlan:
    """Fill leftover budget with cheapest-fidelity points at maximin new locations."""
    t_lo, t_hi = _fid_box(t_lo, t_hi)
    cheap = cost_model.cost(t_hi)
    slack = budget - plan.total_cost(cost_model)
    if slack < cheap:
        return plan
    d = plan.X.shape[1]
    rng = np.random.default_rng(seed)
    cand = qmc.Sobol(d=d, scramble=True, seed=rng).random_base2(math.ceil(math.log2(n_cand)))
    X, T = plan.X.copy(), plan.T.copy()
    added = 0
    while slack >= cheap:
        dist = cdist(cand, X).min(axis=1)
        k = int(np.argmax(dist))
        X = np.vstack([X, cand[k]])
        T = np.vstack([T, t_hi])
        slack -= cheap
        added += 1
    meta = dict(plan.meta)
    meta["topped_up"] = added
    if "level" in meta:
        meta["level"] = np.concatenate([meta["level"], np.full(added, -2)])
    return DesignPlan(X, T, plan.kind, meta)


def _largest_fitting(make: Callable[[int], DesignPlan], budget, cost_model, n_min, n_max):
    """Largest size whose design fits in the budget, by bisection on the size."""
    cache = {}

    def fits(n):
        if n not in cache:
            plan = make(n)
            cache[n] = (plan.total_cost(cost_model) <= budget, plan)
        return cache[n][0]

    if not fits(n_min):
        raise InvalidArgumentError("budget too small for the smallest design")
    if fits(n_max):
        return cache[n_max][1]
    lo, hi = n_min, n_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return cache[lo][1]


def budget_design(kind, budget, d, cost_model, t_lo, t_hi, seed=0, levels: int = 3, stack_size: int = 4,
                  reps_per_loc: int = 2, n_proposals: int = 10_000) -> DesignPlan:
    """Design of the given kind whose total cost is within one cheapest point of ``budget``."""
    kind = DesignKind(kind)
    t_lo, t_hi = _fid_box(t_lo, t_hi)
    m = t_lo.size
    c_min = cost_model.cost(t_hi)
    n_cap = max(2, int(budget // c_min))
    if kind is DesignKind.MAXPRO:
        make = lambda n: maxpro_design(n, d, t_lo, t_hi, seed)
        plan = _largest_fitting(make, budget, cost_model, 2, n_cap)
    elif kind is DesignKind.MMED:
        make = lambda n: generate_mmed(n, d, m, cost_model, seed, t_lo, t_hi)
        plan = _largest_fitting(make, budget, cost_model, 1, n_cap)
    elif kind is DesignKind.NESTED:
        make = lambda n: generate_nested(n, levels, d, t_lo, t_hi, seed)
        plan = _largest_fitting(make, budget, cost_model, max(2, 2 ** (levels - 1)), n_cap)
    elif kind is DesignKind.COUPLED_NESTED:
        make = lambda n: generate_coupled_nested(n, levels, d, t_lo, t_hi, seed, stack_size)
        plan = _largest_fitting(make, budget, cost_model, max(2, 2 ** (levels - 1)), n_cap)
    else:
        make = lambda n: generate_repetitive(n, reps_per_loc, d, t_lo, t_hi, seed)
        plan = _largest_fitting(make, budget, cost_model, 2, max(2, n_cap // reps_per_loc))
    return top_up(plan, budget, cost_model, t_lo, t_hi, seed=seed)
