import csv

import numpy as np
import pytest
import yaml

from cfgp import bench, cli, integrals
from cfgp.config import RunConfig
from cfgp.exceptions import ConfigError
from cfgp.io import read_table

TINY_BENCH = {
    "budget": {"total": 14, "initial": 8},
    "evaluation": {"n_test": 20},
    "single_fidelity": {"t": 0.5},
    "simulator": {"nodes_per_dim": 41, "n_levels": 9},
    "benchmark": {"phi2_sq": [10.0], "gamma": [0.5, 0.95], "sets": 1, "reps": 2, "fit_starts": 2,
                  "refit_starts": 1, "criterion_starts": 2, "criterion_screen": 32},
}
SURFACE = {"surface": {"nx": 30, "nt": 6, "design_budget": 24}, "fit": {"n_starts": 4},
           "criterion": {"n_starts": 6, "n_screen": 128}}


def write_cfg(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def body(path):
    with open(path) as fh:
        return [line for line in fh if not line.startswith("#")]


class TestExitCodes:
    def test_success(self, tmp_path, capsys):
        assert cli.main(["design", "--out", str(tmp_path), "--seed", "2"]) == 0
        assert "mmed design" in capsys.readouterr().out

    def test_unknown_key_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, {"budgte": 3})
        assert cli.main(["design", "--config", cfg, "--out", str(tmp_path)]) == 2

    @pytest.mark.parametrize("bad", [{"design": {"kind": "sobol"}}, {"budget": {"initial": 500}},
                                     {"cost": {"form": "cubic"}}, {"fidelity": {"t_lo": [0.0]}}])
    def test_bad_values_are_config_errors(self, tmp_path, bad):
        assert cli.main(["design", "--config", write_cfg(tmp_path, bad), "--out", str(tmp_path)]) == 2

    def test_bad_threads(self, tmp_path):
        assert cli.main(["design", "--threads", "0", "--out", str(tmp_path)]) == 2

    def test_missing_data_file(self, tmp_path):
        cfg = write_cfg(tmp_path, {"data": {"path": str(tmp_path / "none.csv")}})
        assert cli.main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_surface_dimension_limit(self, tmp_path):
        cfg = write_cfg(tmp_path, {"simulator": {"d": 2, "nodes_per_dim": 11}})
        assert cli.main(["criterion-surface", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestProvenance:
    def test_design_header(self, tmp_path):
        cli.main(["design", "--out", str(tmp_path), "--seed", "5"])
        header, cols, vals = read_table(tmp_path / "design.csv")
        assert header[0].startswith("cfgp ") and header[1].startswith("config_sha256 ")
        assert "seed 5" in header and any(h.startswith("defaults_applied") for h in header)
        assert cols == ["x_1", "t_1"] and vals.shape[0] > 0

    def test_fit_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        with open(tmp_path / "d.csv", "w") as fh:
            fh.write("x_1,t_1,y\n")
            for _ in range(10):
                x, t = rng.uniform(0, 4), rng.uniform(0.25, 1)
                fh.write(f"{x},{t},{float(np.sin(x) + 0.1 * t)}\n")
        cfg = write_cfg(tmp_path, {"data": {"path": str(tmp_path / "d.csv"), "x_bounds": [[0, 4]]},
                                   "fit": {"n_starts": 3}})
        assert cli.main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 0
        text = (tmp_path / "fit_report.yaml").read_text()
        assert "# rescaling x=x_lo+u*(x_hi-x_lo) x_lo=[0]" in text
        assert yaml.safe_load(text)["n"] == 10


class TestValidate:
    CFG = {"validate": {"draws": 4, "families": ["gaussian", "matern15"]}}

    def test_rows_and_pass(self, tmp_path):
        res = bench.cmd_validate(RunConfig(self.CFG), tmp_path)
        kinds = [(r.kind, r.family) for r in res["rows"]]
        for fam in ("gaussian", "matern15"):
            for k in ("I1", "I2", "I3", "w", "dcorr/dphi"):
                assert kinds.count((k, fam)) == 1
        assert res["ok"]
        text = (tmp_path / "validate.csv").read_text()
        assert "# config_sha256 " in text and len(body(tmp_path / "validate.csv")) == len(res["rows"]) + 1

    def test_canary(self, tmp_path, monkeypatch):
        real = integrals.line_integrals

        def perturbed(X, spec):
            out = real(X, spec).copy()
            out[..., 1] *= 1 + 1e-6
            return out

        monkeypatch.setattr(integrals, "line_integrals", perturbed)
        res = bench.cmd_validate(RunConfig(self.CFG), tmp_path)
        failed = {(r.kind, r.family) for r in res["rows"] if not r.passed}
        assert failed == {("I2", "gaussian"), ("I2", "matern15")}
        cfg = write_cfg(tmp_path, self.CFG)
        assert cli.main(["validate-integrals", "--config", cfg, "--out", str(tmp_path)]) == 1


class TestSurface:
    def test_grid_and_box(self, tmp_path):
        res = bench.cmd_criterion_surface(RunConfig(SURFACE), tmp_path)
        assert res["n_rows"] == 30 * 6
        _, cols, vals = read_table(tmp_path / "surface.csv")
        assert cols == ["x", "t", "R", "cost", "criterion"]
        assert vals.shape == (180, 5) and vals[:, 1].min() >= 0.25

    @pytest.mark.parametrize("seed", [0, 2, 5])
    def test_refined_grid_max_matches_optimizer(self, tmp_path, seed):
        cfg = RunConfig(SURFACE)
        cfg.set_seed(seed)
        res = bench.cmd_criterion_surface(cfg, tmp_path)
        best = res["optimizer"].value
        assert res["refined"] == pytest.approx(best, rel=1e-6)
        assert res["grid_max"] <= best * (1 + 1e-9)


class TestBenchmark:
    def test_rows_checks_and_determinism(self, tmp_path):
        cfg = RunConfig(TINY_BENCH)
        res = bench.cmd_benchmark(cfg, tmp_path / "a")
        assert len(res["rows"]) == 5 * 2 * 2
        assert res["n_errors"] == 0
        with open(tmp_path / "a" / "results.csv") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        assert {r["method"] for r in rows} == set(bench.METHODS)
        assert all(float(r["cost_used"]) <= 14 for r in rows)
        assert all(r["n_points"] == "3" for r in rows if r["method"] == "SF")
        bench.cmd_benchmark(RunConfig(TINY_BENCH), tmp_path / "b", threads=2)
        for name in ("results.csv", "summary.csv"):
            assert body(tmp_path / "a" / name) == body(tmp_path / "b" / name)

    def test_errors_recorded_per_row(self, tmp_path):
        data = dict(TINY_BENCH, single_fidelity={"t": 0.2})
        res = bench.cmd_benchmark(RunConfig(data), tmp_path)
        bad = [r for r in res["rows"] if r[-1] != "ok"]
        assert bad and all(r[0] == "SF" for r in bad)
        assert cli.main(["benchmark", "--config", write_cfg(tmp_path, data), "--out", str(tmp_path)]) == 1

    def test_unknown_method(self, tmp_path):
        data = {"benchmark": {"methods": ["AL-XYZ"]}}
        with pytest.raises(ConfigError):
            bench.cmd_benchmark(RunConfig(data), tmp_path)

    def test_directional_checks(self):
        rows = []
        for mth, v in (("AL-LBM", 1.0), ("OS-LBM", 2.0), ("AL-BM", 3.0), ("OS-BM", 4.0)):
            for g in (0.5, 0.95):
                rows.append([mth, 10.0, g, 0, 0, 1, v, 1.0, 3, "ok"])
        rows.append(["AL-LBM", 10.0, 0.95, 0, 1, 1, 99.0, 1.0, 3, "error: x"])
        ch = bench.directional_checks(rows)
        assert ch["combos"] == 2 and ch["gamma_top"] == 0.95
        assert ch["lbm_beats_bm"] and ch["al_beats_os"] == 2
        assert ch["lbm_vs_bm"]["AL"] == (1.0, 3.0)
