"""Cost-aware sequential design loop, one-shot fitting and the single-fidelity baseline."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import designs
from .designs import DesignPlan
from .exceptions import InvalidArgumentError, OptimizationFailure
from .gp import Dataset, FittedModel, TrendBasis
from .imspe import ImspeState, optimize_criterion
from .inference import FitReport, ModelConfig, fit_mle


@dataclass
class FitOptions:
    n_starts: int = 20
    refit_starts: int = 2
    max_iters: int = 200
    tol: float = 1e-6


@dataclass
class CriterionOptions:
    n_starts: int = 30
    n_screen: int = 256
    tol: float = 1e-8
    max_iters: int = 100


@dataclass
class ALConfig:
    total_budget: float
    initial_design: Union[DesignPlan, Dataset]
    t_lo: np.ndarray
    t_hi: np.ndarray
    seed: int = 0
    refit_every: int = 1
    basis: TrendBasis = field(default_factory=TrendBasis)
    model: ModelConfig = field(default_factory=ModelConfig)
    fit: FitOptions = field(default_factory=FitOptions)
    criterion: CriterionOptions = field(default_factory=CriterionOptions)
    eval_X: Optional[np.ndarray] = None
    trace_path: Optional[str] = None

    def __post_init__(self):
        self.t_lo = np.atleast_1d(np.asarray(self.t_lo, dtype=float))
        self.t_hi = np.atleast_1d(np.asarray(self.t_hi, dtype=float))
        if np.any(self.t_lo <= 0) or np.any(self.t_hi < self.t_lo):
            raise InvalidArgumentError("fidelity box must satisfy 0 < t_lo <= t_hi")
        if self.refit_every < 1:
            raise InvalidArgumentError("refit_every must be a positive integer")


@dataclass
class TraceRecord:
    iteration: int
    x: np.ndarray
    t: np.ndarray
    y: float
    criterion: float
    reduction: float
    cost: float
    cumulative_cost: float
    refitted: bool
    hyper: dict
    rmse: float = float("nan")


@dataclass
class ALTrace:
    initial_cost: float
    records: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def acquisition_cost(self) -> float:
        return math.fsum(r.cost for r in self.records)

    @property
    def total_cost(self) -> float:
        return math.fsum([self.initial_cost] + [r.cost for r in self.records])


def _hyper_dict(spec) -> dict:
    out = {"sigma2": spec.sigma2, "gamma": spec.fidelity.gamma}
    for r, v in enumerate(spec.corr_phi1.phi):
        out[f"phi1_{r + 1}"] = float(v)
    for r, v in enumerate(spec.corr_phi2.phi):
        out[f"phi2_{r + 1}"] = float(v)
    for j, v in enumerate(spec.fidelity.scale_a):
        out[f"a_{j + 1}"] = float(v)
    return out


class TraceWriter:
    """Append-only CSV sink flushed after every record."""

    def __init__(self, path, d, m, hyper_keys, header_lines=()):
        self.fh = open(path, "a", newline="")
        for line in header_lines:
            self.fh.write(f"# {line}\n")
        cols = ["iteration"] + [f"x_{r + 1}" for r in range(d)] + [f"t_{j + 1}" for j in range(m)]
        cols += ["y", "criterion", "reduction", "cost", "cumulative_cost", "refitted"] + list(hyper_keys) + ["rmse"]
        self.keys = list(hyper_keys)
        self.w = csv.writer(self.fh)
        self.w.writerow(cols)
        self.fh.flush()

    def write(self, rec: TraceRecord):
        row = [rec.iteration] + [repr(float(v)) for v in rec.x] + [repr(float(v)) for v in rec.t]
        row += [repr(float(v)) for v in (rec.y, rec.criterion, rec.reduction, rec.cost, rec.cumulative_cost)]
        row += [int(rec.refitted)] + [repr(float(rec.hyper[k])) for k in self.keys] + [repr(float(rec.rmse))]
        self.w.writerow(row)
        self.fh.flush()

    def close(self):
        self.fh.close()


def evaluate_design(plan: DesignPlan, simulator) -> Dataset:
    if plan.n == 0:
        raise InvalidArgumentError("empty design")
    y = simulator(plan.X, plan.T)
    return Dataset(plan.X, plan.T, y)


def _seed(base, *keys):
    return np.random.SeedSequence([int(base)] + [int(k) for k in keys])


def _fit(dataset, cfg: ALConfig, n_starts, seed, warm=None) -> tuple:
    extra = [warm] if warm is not None else []
    report = fit_mle(dataset, cfg.basis, cfg.model, n_starts=n_starts, max_iters=cfg.fit.max_iters,
                     tol=cfg.fit.tol, seed=seed, extra_starts=extra)
    return FittedModel(dataset, cfg.basis, report.spec, beta=report.beta), report


def rmse(predictions, truths) -> float:
    """Root mean squared error."""
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truths, dtype=float).ravel()
    if p.size == 0 or p.size != t.size:
        raise InvalidArgumentError("rmse needs equal-length nonempty inputs")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def run_al(config: ALConfig, simulator, cost_model, truth=None):
    """Sequential IMSPE-reduction-per-cost acquisition until the budget is spent.

    Parameters
    ----------
    truth : array, optional
        Exact-solution values at ``config.eval_X`` for per-iteration RMSE.

    Returns
    -------
    model : FittedModel
    trace : ALTrace
    """
    cfg = config
    if isinstance(cfg.initial_design, DesignPlan):
        data = evaluate_design(cfg.initial_design, simulator)
    else:
        data = cfg.initial_design
    init_cost = math.fsum(cost_model.cost_batch(data.T))
    if init_cost > cfg.total_budget:
        raise InvalidArgumentError("initial design exceeds the total budget")
    trace = ALTrace(initial_cost=init_cost)
    costs = [init_cost]
    model, report = _fit(data, cfg, cfg.fit.n_starts, _seed(cfg.seed, 0, 0))
    writer = None
    if cfg.trace_path:
        writer = TraceWriter(cfg.trace_path, data.d, data.m, list(_hyper_dict(model.spec)))
    refitted = True
    it = 0
    try:
        while True:
            remaining = cfg.total_budget - math.fsum(costs)
            box = cost_model.affordable_box(remaining, cfg.t_lo, cfg.t_hi)
            if box is None:
                trace.stop_reason = "remaining budget below the cheapest fidelity cost"
                break
            state = ImspeState(model)
            try:
                best = optimize_criterion(
                    state, cost_model, box[0], box[1],
                    n_starts=cfg.criterion.n_starts, n_screen=cfg.criterion.n_screen,
                    seed=_seed(cfg.seed, it + 1, 1), tol=cfg.criterion.tol, max_iters=cfg.criterion.max_iters,
                )
            except OptimizationFailure:
                trace.stop_reason = "every candidate was degenerate"
                break
            t_new = np.clip(best.t, box[0], box[1])
            c = cost_model.cost(t_new)
            if math.fsum(costs + [c]) > cfg.total_budget:
                t_new = box[1].copy()
                c = cost_model.cost(t_new)
                if math.fsum(costs + [c]) > cfg.total_budget:
                    trace.stop_reason = "rounding left no affordable fidelity"
                    break
            if np.any(np.all(data.X == best.x, axis=1) & np.all(data.T == t_new, axis=1)):
                trace.stop_reason = "rounding fell back onto an existing design point"
                break
            y_new = float(simulator(best.x[None, :], t_new[None, :])[0])
            data = data.append(best.x, t_new, y_new)
            costs.append(c)
            it += 1
            refitted = it % cfg.refit_every == 0
            if refitted:
                model, report = _fit(data, cfg, cfg.fit.refit_starts, _seed(cfg.seed, it + 1, 0), warm=model.spec)
            else:
                model = FittedModel(data, cfg.basis, model.spec)
            err = float("nan")
            if cfg.eval_X is not None and truth is not None:
                err = rmse(model.predict(cfg.eval_X)[0], truth)
            rec = TraceRecord(it, best.x.copy(), t_new, y_new, best.value, best.reduction, c,
                              math.fsum(costs), refitted, _hyper_dict(model.spec), err)
            trace.records.append(rec)
            if writer:
                writer.write(rec)
    finally:
        if writer:
            writer.close()
    if not refitted:
        model, report = _fit(data, cfg, cfg.fit.refit_starts, _seed(cfg.seed, it + 1, 0), warm=model.spec)
    return model, trace


def run_one_shot(design: DesignPlan, simulator, basis: TrendBasis = TrendBasis(), model_config: ModelConfig = ModelConfig(),
                 fit: FitOptions = FitOptions(), seed=0, extra_starts=()):
    """Evaluate every design point and fit once. Returns ``(FittedModel, FitReport)``."""
    data = evaluate_design(design, simulator)
    report = fit_mle(data, basis, model_config, n_starts=fit.n_starts, max_iters=fit.max_iters, tol=fit.tol,
                     seed=seed, extra_starts=extra_starts)
    return FittedModel(data, basis, report.spec, beta=report.beta), report


class SingleFidelityModel:
    """A fitted model whose predictions are taken on the fixed-fidelity slice."""

    def __init__(self, model: FittedModel, report: FitReport, t_fixed):
        self.model = model
        self.report = report
        self.t_fixed = np.atleast_1d(np.asarray(t_fixed, dtype=float))

    @property
    def dataset(self):
        return self.model.dataset

    def predict(self, X):
        X = np.atleast_2d(X)
        return self.model.predict(X, np.repeat(self.t_fixed[None, :], X.shape[0], axis=0))


def single_fidelity_size(budget, cost_model, t_fixed) -> int:
    return int(math.floor(budget / cost_model.cost(np.atleast_1d(t_fixed)) * (1 + 1e-12)))


def single_fidelity_t(budget, cost_model, n) -> float:
    """Fidelity that spends ``budget`` on ``n`` runs."""
    if n <= 0:
        raise InvalidArgumentError("n must be positive")
    return cost_model.inverse(budget / n)


def run_single_fidelity(t_fixed, n, simulator, basis: TrendBasis = TrendBasis(), seed=0,
                        model_config: ModelConfig = ModelConfig(), fit: FitOptions = FitOptions(),
                        design_proposals: int = 10_000):
    """Space-filling design at one fidelity, fitted with the same model class.

    The fidelity kernel then adds the same constant ``a t**l`` to every
    entry, and predictions are read on the ``t_fixed`` slice.
    """
    if n is None or n < 1:
        raise InvalidArgumentError("n must be at least 1")
    t_fixed = np.atleast_1d(np.asarray(t_fixed, dtype=float))
    d = simulator.d
    X = designs.generate_maxpro_like(n, d, seed, design_proposals) if n >= 2 else np.full((1, d), 0.5)
    T = np.repeat(t_fixed[None, :], n, axis=0)
    plan = DesignPlan(X, T, designs.DesignKind.MAXPRO)
    model, report = run_one_shot(plan, simulator, basis, model_config, fit, seed)
    return SingleFidelityModel(model, report, t_fixed)
