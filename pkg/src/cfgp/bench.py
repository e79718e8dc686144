"""Experiment commands: fitting, designs, sequential runs, the benchmark matrix and oracle validation.

Each ``cmd_*`` function takes a :class:`~cfgp.config.RunConfig` and an output
directory, writes provenance-headed result files and returns a small summary.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
import yaml
from scipy import integrate
from scipy.stats import qmc

from . import designs, integrals, kernels
from .active import (ALConfig, CriterionOptions, FitOptions, rmse, run_al, run_one_shot,
                     run_single_fidelity, single_fidelity_size)
from .config import RunConfig, header_text
from .exceptions import ConfigError, OptimizationFailure
from .gp import FittedModel, TrendBasis
from .imspe import ImspeState, criterion_batch, optimize_criterion
from .inference import ModelConfig, fit_mle
from .io import Rescaling, fmt, read_dataset, write_dataset, write_points, write_table
from .kernels import CorrelationSpec, Family
from .simulators import CostModel, make_simulator

METHODS = ("AL-LBM", "OS-LBM", "AL-BM", "OS-BM", "SF")
RESULT_COLUMNS = ["method", "phi2_sq", "gamma", "set", "rep", "seed", "rmse", "cost_used", "n_points", "status"]
BM_GAMMA = 0.5

_SIM_KEYS = {
    "gp_draw": ("phi2_sq", "gamma", "phi1_sq", "a", "l", "sigma2", "d", "m", "family",
                "nodes_per_dim", "n_levels", "t_max"),
    "poisson_average": (),
    "synthetic_poisson": ("amplitude", "l"),
}


# ------------------------------------------------------------------ builders


def simulator_from(cfg: RunConfig, seed, **override):
    sc = dict(cfg["simulator"])
    sc.update(override)
    kind = sc["kind"]
    if kind not in _SIM_KEYS:
        raise ConfigError(f"unknown simulator kind {kind!r}")
    return make_simulator({"kind": kind, **{k: sc[k] for k in _SIM_KEYS[kind]}}, seed=seed)


def cost_from(cfg: RunConfig) -> CostModel:
    cc = {k: v for k, v in cfg["cost"].items() if v is not None}
    try:
        return CostModel.from_dict(cc)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid cost section: {exc}") from exc


def basis_from(cfg: RunConfig) -> TrendBasis:
    tc = cfg["trend"]
    try:
        return TrendBasis(tc["kind"], bool(tc["include_fidelity_trend"]), cfg["kernel"]["exponents_l"])
    except ValueError as exc:
        raise ConfigError(f"invalid trend section: {exc}") from exc


def model_from(cfg: RunConfig, fixed_gamma="config") -> ModelConfig:
    kc = cfg["kernel"]
    fg = kc["fixed_gamma"] if fixed_gamma == "config" else fixed_gamma
    try:
        return ModelConfig(
            family=kc["family"],
            exponents_l=None if kc["exponents_l"] is None else tuple(kc["exponents_l"]),
            fixed_gamma=fg,
            gamma_bounds=tuple(kc["gamma_bounds"]),
            phi2_bounds=tuple(kc["phi2_bounds"]),
            a_bounds=tuple(kc["a_bounds"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid kernel section: {exc}") from exc


def fit_from(cfg: RunConfig) -> FitOptions:
    return FitOptions(**cfg["fit"])


def criterion_from(cfg: RunConfig) -> CriterionOptions:
    return CriterionOptions(**cfg["criterion"])


def fidelity_box(cfg: RunConfig):
    lo = np.atleast_1d(np.asarray(cfg["fidelity"]["t_lo"], dtype=float))
    hi = np.atleast_1d(np.asarray(cfg["fidelity"]["t_hi"], dtype=float))
    if lo.shape != hi.shape or np.any(lo <= 0) or np.any(hi < lo):
        raise ConfigError("fidelity box must satisfy 0 < t_lo <= t_hi componentwise")
    return lo, hi


def test_grid(d: int, n: int, seed) -> np.ndarray:
    """Scrambled Sobol points on the unit cube used to score predictions at t = 0."""
    sob = qmc.Sobol(d=d, scramble=True, seed=np.random.default_rng(seed))
    return sob.random_base2(max(0, math.ceil(math.log2(n))))[:n]


def check_config(cfg: RunConfig) -> None:
    """Build every configured object once so bad values surface as :class:`ConfigError`."""
    cost_from(cfg)
    basis_from(cfg)
    model_from(cfg)
    fidelity_box(cfg)
    try:
        designs.DesignKind(cfg["design"]["kind"])
        FitOptions(**cfg["fit"])
        CriterionOptions(**cfg["criterion"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["simulator"]["kind"] not in _SIM_KEYS:
        raise ConfigError(f"unknown simulator kind {cfg['simulator']['kind']!r}")
    for key in ("total", "initial"):
        if not float(cfg["budget"][key]) > 0:
            raise ConfigError(f"budget.{key} must be positive")
    if float(cfg["budget"]["initial"]) > float(cfg["budget"]["total"]):
        raise ConfigError("budget.initial exceeds budget.total")


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _budget_plan(cfg: RunConfig, budget, d, cost, seed):
    dc = cfg["design"]
    lo, hi = fidelity_box(cfg)
    return designs.budget_design(dc["kind"], budget, d, cost, lo, hi, seed=seed, levels=dc["levels"],
                                 stack_size=dc["stack_size"], reps_per_loc=dc["reps_per_loc"])


def _sized_plan(cfg: RunConfig, n, d, cost, seed):
    dc = cfg["design"]
    lo, hi = fidelity_box(cfg)
    kind = designs.DesignKind(dc["kind"])
    if kind is designs.DesignKind.MAXPRO:
        return designs.maxpro_design(n, d, lo, hi, seed)
    if kind is designs.DesignKind.MMED:
        return designs.generate_mmed(n, d, lo.size, cost, seed, lo, hi)
    if kind is designs.DesignKind.NESTED:
        return designs.generate_nested(n, dc["levels"], d, lo, hi, seed)
    if kind is designs.DesignKind.COUPLED_NESTED:
        return designs.generate_coupled_nested(n, dc["levels"], d, lo, hi, seed, dc["stack_size"])
    return designs.generate_repetitive(n, dc["reps_per_loc"], d, lo, hi, seed)


def _out(out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _write_yaml(path, header_lines, payload):
    with open(path, "w") as fh:
        fh.write(header_text(header_lines))
        yaml.safe_dump(payload, fh, sort_keys=True)


def _plain(v):
    """Convert numpy scalars/arrays for YAML output."""
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, np.generic):
        return v.item()
    return v


# ------------------------------------------------------------------ commands


def cmd_fit(cfg: RunConfig, out_dir) -> dict:
    """Fit the model to the dataset named in ``data.path``."""
    dc = cfg["data"]
    if not dc["path"]:
        raise ConfigError("the fit command needs data.path")
    with open(dc["path"]) as fh:
        head = [line for line in fh.read().splitlines() if not line.startswith("#")][:1]
    cols = head[0].split(",") if head else []
    d = sum(c.startswith("x_") for c in cols)
    m = sum(c.startswith("t_") for c in cols)
    resc = Rescaling.from_config(dc["x_bounds"], dc["t_scale"], d, m)
    data, resc = read_dataset(dc["path"], resc)
    basis = basis_from(cfg)
    fo = fit_from(cfg)
    report = fit_mle(data, basis, model_from(cfg), n_starts=fo.n_starts, max_iters=fo.max_iters,
                     tol=fo.tol, seed=cfg["seed"])
    payload = _plain(report.to_dict())
    payload["n"] = data.n
    _write_yaml(_out(out_dir, "fit_report.yaml"), cfg.provenance([resc.describe()]), payload)
    return payload


def cmd_design(cfg: RunConfig, out_dir) -> dict:
    """Generate a design by size (``design.n``) or by total budget."""
    d = int(cfg["simulator"]["d"])
    cost = cost_from(cfg)
    n = cfg["design"]["n"]
    if n is not None:
        plan = _sized_plan(cfg, int(n), d, cost, cfg["seed"])
    else:
        plan = _budget_plan(cfg, float(cfg["budget"]["total"]), d, cost, cfg["seed"])
    total = plan.total_cost(cost)
    lines = cfg.provenance([f"design {plan.kind.value} n={plan.n} total_cost={fmt(total)}"])
    write_points(_out(out_dir, "design.csv"), plan.X, plan.T, header_lines=lines)
    return {"n": plan.n, "total_cost": total, "kind": plan.kind.value}


def _truth(cfg, sim, d):
    Xt = test_grid(d, int(cfg["evaluation"]["n_test"]), cfg["seed"])
    return Xt, sim.exact(Xt)


def cmd_al_run(cfg: RunConfig, out_dir) -> dict:
    """One cost-aware sequential run with trace, final dataset and summary."""
    seed = cfg["seed"]
    sim = simulator_from(cfg, seed)
    cost = cost_from(cfg)
    lo, hi = fidelity_box(cfg)
    plan = _budget_plan(cfg, float(cfg["budget"]["initial"]), sim.d, cost, seed)
    Xt, truth = _truth(cfg, sim, sim.d)
    trace_path = _out(out_dir, "trace.csv")
    if os.path.exists(trace_path):
        os.remove(trace_path)
    alc = ALConfig(float(cfg["budget"]["total"]), plan, lo, hi, seed=seed, refit_every=int(cfg["al"]["refit_every"]),
                   basis=basis_from(cfg), model=model_from(cfg), fit=fit_from(cfg), criterion=criterion_from(cfg),
                   eval_X=Xt, trace_path=None)
    # header lines go first so the trace file is self-describing
    with open(trace_path, "w") as fh:
        fh.write(header_text(cfg.provenance()))
    alc.trace_path = trace_path
    model, trace = run_al(alc, sim, cost, truth)
    err = rmse(model.predict(Xt)[0], truth)
    write_dataset(_out(out_dir, "dataset.csv"), model.dataset, cfg.provenance())
    summary = {"rmse": err, "n_points": model.n, "initial_cost": trace.initial_cost, "total_cost": trace.total_cost,
               "acquisitions": len(trace.records), "stop_reason": trace.stop_reason,
               "gamma": model.spec.fidelity.gamma}
    _write_yaml(_out(out_dir, "summary.yaml"), cfg.provenance(), _plain(summary))
    return summary


def cmd_one_shot(cfg: RunConfig, out_dir) -> dict:
    """Spend the whole budget on one design and fit once."""
    seed = cfg["seed"]
    sim = simulator_from(cfg, seed)
    cost = cost_from(cfg)
    plan = _budget_plan(cfg, float(cfg["budget"]["total"]), sim.d, cost, seed)
    model, report = run_one_shot(plan, sim, basis_from(cfg), model_from(cfg), fit_from(cfg), seed)
    Xt, truth = _truth(cfg, sim, sim.d)
    err = rmse(model.predict(Xt)[0], truth)
    write_dataset(_out(out_dir, "dataset.csv"), model.dataset, cfg.provenance())
    payload = _plain(report.to_dict())
    payload.update({"rmse": err, "n_points": model.n, "total_cost": plan.total_cost(cost)})
    _write_yaml(_out(out_dir, "fit_report.yaml"), cfg.provenance(), payload)
    return payload


# ------------------------------------------------------------------ benchmark


def benchmark_cells(cfg: RunConfig) -> list:
    """Cells in a fixed order: (phi2_sq, gamma) combination, then set, then repetition."""
    bc = cfg["benchmark"]
    cells = []
    for ci, (p2, g) in enumerate((p2, g) for p2 in bc["phi2_sq"] for g in bc["gamma"]):
        for s in range(int(bc["sets"])):
            for r in range(int(bc["reps"])):
                cells.append({"index": len(cells), "combo": ci, "phi2_sq": float(p2), "gamma": float(g),
                              "set": s, "rep": r})
    return cells


def _method_run(method, cfg, sim, cost, plans, Xt, truth, seed):
    bc = cfg["benchmark"]
    lo, hi = fidelity_box(cfg)
    basis = basis_from(cfg)
    fixed = None if method.endswith("LBM") else BM_GAMMA
    mc = model_from(cfg, fixed_gamma=fixed)
    fit = FitOptions(n_starts=int(bc["fit_starts"]), refit_starts=int(bc["refit_starts"]),
                     max_iters=int(cfg["fit"]["max_iters"]), tol=float(cfg["fit"]["tol"]))
    if method.startswith("AL"):
        crit = CriterionOptions(n_starts=int(bc["criterion_starts"]), n_screen=int(bc["criterion_screen"]),
                                tol=float(cfg["criterion"]["tol"]), max_iters=int(cfg["criterion"]["max_iters"]))
        alc = ALConfig(float(cfg["budget"]["total"]), plans["initial"], lo, hi, seed=seed,
                       refit_every=int(bc["refit_every"]), basis=basis, model=mc, fit=fit, criterion=crit)
        model, trace = run_al(alc, sim, cost)
        used = trace.total_cost
    elif method.startswith("OS"):
        model, _ = run_one_shot(plans["one_shot"], sim, basis, mc, fit, seed)
        used = math.fsum(cost.cost_batch(model.dataset.T))
    else:
        sfc = cfg["single_fidelity"]
        t_sf = float(sfc["t"])
        n = sfc["n"] if sfc["n"] is not None else single_fidelity_size(float(cfg["budget"]["total"]), cost, t_sf)
        model = run_single_fidelity(np.full(lo.size, t_sf), int(n), sim, basis, seed, mc, fit)
        used = math.fsum(cost.cost_batch(model.dataset.T))
    return rmse(model.predict(Xt)[0], truth), used, model.dataset.n


def run_cell(cfg: RunConfig, cell: dict) -> list:
    """All methods on one (phi2_sq, gamma, set, rep) cell; failures become error rows."""
    master = int(cfg["seed"])
    # the sample path depends on the set only, so repetitions share it
    draw_seed = _int_seed(np.random.SeedSequence([master, 1_000_003, cell["combo"], cell["set"]]))
    seed = _int_seed(np.random.SeedSequence([master, cell["index"]]))
    cost = cost_from(cfg)
    rows = []
    base = [cell["phi2_sq"], cell["gamma"], cell["set"], cell["rep"], seed]
    try:
        sim = simulator_from(cfg, draw_seed, kind="gp_draw", phi2_sq=cell["phi2_sq"], gamma=cell["gamma"])
        Xt = test_grid(sim.d, int(cfg["evaluation"]["n_test"]), master)
        truth = sim.exact(Xt)
        plans = {
            "initial": _budget_plan(cfg, float(cfg["budget"]["initial"]), sim.d, cost, seed),
            "one_shot": _budget_plan(cfg, float(cfg["budget"]["total"]), sim.d, cost, seed),
        }
    except Exception as exc:  # noqa: BLE001 - recorded per row
        msg = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        return [[mth] + base + [float("nan"), float("nan"), 0, msg] for mth in cfg["benchmark"]["methods"]]
    for mth in cfg["benchmark"]["methods"]:
        try:
            err, used, n = _method_run(mth, cfg, sim, cost, plans, Xt, truth, seed)
            rows.append([mth] + base + [err, used, n, "ok"])
        except Exception as exc:  # noqa: BLE001 - recorded per row
            msg = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
            rows.append([mth] + base + [float("nan"), float("nan"), 0, msg])
    return rows


def _run_cell_packed(args):
    return run_cell(*args)


def directional_checks(rows) -> dict:
    """Median-RMSE orderings on the benchmark rows.

    ``lbm_beats_bm``: over the largest-gamma cells, for each of AL and OS the
    LBM median is below the BM median. ``al_beats_os``: number of
    (phi2_sq, gamma) combinations with median AL-LBM <= median OS-LBM.
    """
    by = {}
    for r in rows:
        if r[-1] != "ok":
            continue
        by.setdefault((r[0], r[1], r[2]), []).append(r[6])
    combos = sorted({(k[1], k[2]) for k in by})
    out = {"combos": len(combos)}
    if not combos:
        return out
    g_top = max(c[1] for c in combos)
    lbm_vs_bm = {}
    for pre in ("AL", "OS"):
        lb = [v for k, vs in by.items() if k[0] == f"{pre}-LBM" and k[2] == g_top for v in vs]
        bm = [v for k, vs in by.items() if k[0] == f"{pre}-BM" and k[2] == g_top for v in vs]
        if lb and bm:
            lbm_vs_bm[pre] = (float(np.median(lb)), float(np.median(bm)))
    out["gamma_top"] = g_top
    out["lbm_vs_bm"] = lbm_vs_bm
    out["lbm_beats_bm"] = bool(lbm_vs_bm) and all(a < b for a, b in lbm_vs_bm.values())
    wins = 0
    per = {}
    for c in combos:
        al = by.get(("AL-LBM",) + c)
        os_ = by.get(("OS-LBM",) + c)
        if al and os_:
            a, o = float(np.median(al)), float(np.median(os_))
            per[c] = (a, o)
            wins += a <= o
    out["al_vs_os"] = per
    out["al_beats_os"] = wins
    return out


def summary_rows(rows) -> list:
    by = {}
    for r in rows:
        if r[-1] == "ok":
            by.setdefault((r[0], r[1], r[2]), []).append(r[6])
    out = []
    for (mth, p2, g), vs in sorted(by.items(), key=lambda kv: (kv[0][1], kv[0][2], METHODS.index(kv[0][0])
                                                               if kv[0][0] in METHODS else 99)):
        out.append([mth, p2, g, len(vs), float(np.median(vs)), float(np.min(vs)), float(np.max(vs))])
    return out


def cmd_benchmark(cfg: RunConfig, out_dir, threads: int = 1) -> dict:
    """Run the (phi2_sq, gamma) x set x repetition matrix for every method.

    Writes ``results.csv`` (one row per method and cell) and ``summary.csv``
    (median RMSE per method and combination).
    """
    bad = [mth for mth in cfg["benchmark"]["methods"] if mth not in METHODS]
    if bad:
        raise ConfigError(f"unknown benchmark methods {bad}; choose from {list(METHODS)}")
    if cfg["simulator"]["kind"] != "gp_draw":
        raise ConfigError("the benchmark draws its responses from the GP prior (simulator.kind gp_draw)")
    cells = benchmark_cells(cfg)
    args = [(cfg, c) for c in cells]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_run_cell_packed, args))
    else:
        parts = [_run_cell_packed(a) for a in args]
    rows = [r for part in parts for r in part]
    extra = [f"test_grid sobol n={cfg['evaluation']['n_test']} at t=0",
             f"cells {len(cells)} methods {','.join(cfg['benchmark']['methods'])}"]
    lines = cfg.provenance(extra)
    write_table(_out(out_dir, "results.csv"), lines, RESULT_COLUMNS, rows)
    write_table(_out(out_dir, "summary.csv"), lines,
                ["method", "phi2_sq", "gamma", "runs", "median_rmse", "min_rmse", "max_rmse"], summary_rows(rows))
    checks = directional_checks(rows)
    return {"rows": rows, "checks": checks, "n_errors": sum(r[-1] != "ok" for r in rows)}


# ------------------------------------------------------------------ oracle validation


@dataclass
class CheckRow:
    kind: str
    family: str
    n: int
    max_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_err) and self.max_err <= self.tol)


def _quad(f, pts=()):
    val, _ = integrate.quad(f, 0.0, 1.0, points=[p for p in pts if 0.0 < p < 1.0] or None,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def _k1(fam, phi):
    spec = CorrelationSpec(fam, np.array([phi]))
    return lambda a, b: kernels.corr_eval(np.array([a - b]), spec)


def _legendre_sympy(basis: TrendBasis, d):
    import sympy as sp

    xs = sp.symbols(f"x1:{d + 1}")
    z = [2 * x - 1 for x in xs]
    fs = [sp.Integer(1)]
    if basis.kind.value == "legendre":
        fs += z
        fs += [sp.Rational(1, 2) * (3 * zk**2 - 1) for zk in z]
        fs += [z[i] * z[j] for i, j in combinations(range(d), 2)]
    if basis.include_fidelity_trend:
        fs.append(sp.Integer(0))
    return xs, fs


def g_oracle(basis: TrendBasis, d):
    """Exact ``int f_i f_j`` over the unit cube by symbolic integration."""
    import sympy as sp

    xs, fs = _legendre_sympy(basis, d)
    p = len(fs)
    out = [[None] * p for _ in range(p)]
    for i in range(p):
        for j in range(i, p):
            e = sp.expand(fs[i] * fs[j])
            for x in xs:
                e = sp.integrate(e, (x, 0, 1))
            out[i][j] = out[j][i] = Fraction(int(sp.numer(e)), int(sp.denom(e)))
    return out


def validate_integrals(draws: int = 200, families=None, seed=0, tol: float = 1e-8) -> list:
    """Compare every closed-form integral against adaptive quadrature.

    One row per (integral kind, family): ``I1``, ``I2``, ``I3`` (line
    integrals of ``x**q k``) and ``w`` (product integrals), plus rows for the
    exact trend table ``g`` and the correlation phi-gradient.
    """
    families = [Family.parse(f) for f in (families or list(Family))]
    rng = np.random.default_rng(seed)
    rows = []
    for fam in families:
        name = fam.name.lower()
        errs = np.zeros(4)
        gerr = 0.0
        for _ in range(draws):
            phi = float(np.exp(rng.uniform(np.log(0.3), np.log(10.0))))
            xi, xj = rng.uniform(0.0, 1.0, 2)
            spec = CorrelationSpec(fam, np.array([phi]))
            k = _k1(fam, phi)
            I = integrals.line_integrals(np.array([[xi]]), spec)[0, 0]
            for q in range(3):
                ref = _quad(lambda u, q=q: u**q * k(xi, u), [xi])
                errs[q] = max(errs[q], abs(I[q] - ref))
            w = integrals.w_matrix(np.array([[xi]]), np.array([[xj]]), spec)[0, 0]
            ref = _quad(lambda u: k(xi, u) * k(xj, u), [xi, xj])
            errs[3] = max(errs[3], abs(w - ref))
            # phi-gradient of the correlation against central differences
            h = np.array([xi - xj])
            eps = 1e-6 * phi
            fd = (kernels.corr_eval(h, CorrelationSpec(fam, np.array([phi + eps])))
                  - kernels.corr_eval(h, CorrelationSpec(fam, np.array([phi - eps])))) / (2 * eps)
            gerr = max(gerr, abs(kernels.corr_grad_phi(h, spec, 0) - fd))
        for q, kind in enumerate(("I1", "I2", "I3", "w")):
            rows.append(CheckRow(kind, name, draws, float(errs[q]), tol))
        rows.append(CheckRow("dcorr/dphi", name, draws, float(gerr), 1e-6))
    for kind, d in (("constant", 1), ("legendre", 1), ("legendre", 2), ("legendre", 3)):
        basis = TrendBasis(kind)
        G = integrals.g_matrix(basis, d, exact=True)
        ref = g_oracle(basis, d)
        mismatch = sum(G[i, j] != ref[i][j] for i in range(len(ref)) for j in range(len(ref)))
        rows.append(CheckRow(f"g[{kind},d={d}]", "any", len(ref) ** 2, float(mismatch), 0.0))
    return rows


def cmd_validate(cfg: RunConfig, out_dir) -> dict:
    vc = cfg["validate"]
    t0 = time.perf_counter()
    rows = validate_integrals(int(vc["draws"]), vc["families"], seed=cfg["seed"])
    elapsed = time.perf_counter() - t0
    table = [[r.kind, r.family, r.n, r.max_err, r.tol, "pass" if r.passed else "FAIL"] for r in rows]
    write_table(_out(out_dir, "validate.csv"), cfg.provenance(),
                ["check", "family", "n", "max_err", "tol", "status"], table)
    return {"rows": rows, "ok": all(r.passed for r in rows), "elapsed": elapsed}


def format_checks(rows) -> str:
    lines = [f"{'check':<18} {'family':<9} {'n':>5} {'max_err':>11} {'tol':>9}  status"]
    for r in rows:
        lines.append(f"{r.kind:<18} {r.family:<9} {r.n:>5} {r.max_err:>11.3e} {r.tol:>9.1e}  "
                     f"{'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines)


# ------------------------------------------------------------------ criterion surface


def surface_model(cfg: RunConfig) -> FittedModel:
    seed = cfg["seed"]
    sc = cfg["simulator"]
    if int(sc["d"]) != 1 or int(sc["m"]) != 1:
        raise ConfigError("the criterion surface is only available for d = 1 and m = 1")
    sim = simulator_from(cfg, seed)
    cost = cost_from(cfg)
    plan = _budget_plan(cfg, float(cfg["surface"]["design_budget"]), 1, cost, seed)
    model, _ = run_one_shot(plan, sim, basis_from(cfg), model_from(cfg), fit_from(cfg), seed)
    return model


def refine_point(state, cost, x0, t0, t_lo, t_hi, tol=1e-10):
    """Local maximization of the criterion started from a single point."""
    try:
        res = optimize_criterion(state, cost, [t_lo], [t_hi], n_starts=0, n_screen=1, tol=tol,
                                 extra_starts=[[x0, t0]])
    except OptimizationFailure:
        # the start sits on the degeneracy threshold
        v = criterion_batch(state, [[x0]], [[t0]], cost)[0]
        return np.array([x0, t0]), float(v)
    return np.concatenate([res.x, res.t]), res.value


def cmd_criterion_surface(cfg: RunConfig, out_dir) -> dict:
    """Evaluate ``R`` and ``R / C`` on an ``nx`` by ``nt`` grid over the unit interval times the fidelity box."""
    model = surface_model(cfg)
    cost = cost_from(cfg)
    lo, hi = fidelity_box(cfg)
    nx, nt = int(cfg["surface"]["nx"]), int(cfg["surface"]["nt"])
    if nx < 2 or nt < 1:
        raise ConfigError("surface needs nx >= 2 and nt >= 1")
    state = ImspeState(model)
    xs = np.linspace(0.0, 1.0, nx)
    ts = np.linspace(lo[0], hi[0], nt) if nt > 1 else lo.copy()
    XX, TT = np.meshgrid(xs, ts, indexing="ij")
    X, T = XX.reshape(-1, 1), TT.reshape(-1, 1)
    R = state.reduction(X, T)
    C = cost.cost_batch(T)
    crit = np.where(np.isnan(R), -np.inf, R / C)
    rows = [[float(X[i, 0]), float(T[i, 0]), float(R[i]), float(C[i]), float(crit[i])] for i in range(X.shape[0])]
    cc = cfg["criterion"]
    best = optimize_criterion(state, cost, lo, hi, n_starts=cc["n_starts"], n_screen=cc["n_screen"],
                              seed=cfg["seed"], tol=cc["tol"], max_iters=cc["max_iters"])
    g = int(np.argmax(crit))
    z, v = refine_point(state, cost, float(X[g, 0]), float(T[g, 0]), float(lo[0]), float(hi[0]))
    extra = [f"gamma_hat {fmt(model.spec.fidelity.gamma)}",
             f"optimizer x={fmt(best.x[0])} t={fmt(best.t[0])} value={fmt(best.value)}",
             f"grid_refined x={fmt(z[0])} t={fmt(z[1])} value={fmt(v)}"]
    write_table(_out(out_dir, "surface.csv"), cfg.provenance(extra), ["x", "t", "R", "cost", "criterion"], rows)
    return {"n_rows": len(rows), "grid_max": float(crit[g]), "refined": v, "refined_at": z,
            "optimizer": best, "t_min": float(T.min())}

