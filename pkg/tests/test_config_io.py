import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cfgp.config import DEFAULTS, RunConfig, header_text
from cfgp.exceptions import ConfigError, InvalidArgumentError
from cfgp.gp import Dataset
from cfgp.io import Rescaling, fmt, read_dataset, read_table, write_dataset, write_table

finite = st.floats(allow_nan=False, allow_infinity=False)


class TestConfig:
    def test_defaults_recorded(self):
        cfg = RunConfig({"budget": {"total": 50}})
        assert cfg["budget"]["total"] == 50
        assert cfg["budget"]["initial"] == DEFAULTS["budget"]["initial"]
        assert "budget.initial" in cfg.defaults_applied
        assert "budget.total" not in cfg.defaults_applied

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="budgte"):
            RunConfig({"budgte": 1})
        with pytest.raises(ConfigError, match="totl"):
            RunConfig({"budget": {"totl": 1}})

    def test_section_must_be_mapping(self):
        with pytest.raises(ConfigError):
            RunConfig({"budget": 5})

    def test_seed_override(self):
        cfg = RunConfig()
        cfg.set_seed(9)
        assert cfg["seed"] == 9 and "seed" not in cfg.defaults_applied
        assert "seed 9" in cfg.provenance()

    def test_digest_stable_and_sensitive(self):
        assert RunConfig({"seed": 1}).digest() == RunConfig({"seed": 1}).digest()
        assert RunConfig({"seed": 1}).digest() != RunConfig({"seed": 2}).digest()

    def test_from_file(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("seed: 4\ncost:\n  c: 3\n")
        cfg = RunConfig.from_file(p)
        assert cfg["seed"] == 4 and cfg["cost"]["c"] == 3
        p.write_text("seed: [1\n")
        with pytest.raises(ConfigError):
            RunConfig.from_file(p)
        with pytest.raises(ConfigError):
            RunConfig.from_file(tmp_path / "missing.yaml")

    def test_header_text(self):
        assert header_text(["a", "b c"]) == "# a\n# b c\n"


class TestIO:
    @given(finite)
    def test_fmt_round_trip(self, v):
        assert float(fmt(v)) == v

    @given(arrays(float, (5, 3), elements=st.floats(-1e6, 1e6)))
    def test_table_round_trip(self, tmp_path_factory, A):
        p = tmp_path_factory.mktemp("t") / "a.csv"
        write_table(p, ["hello"], ["a", "b", "c"], A.tolist())
        header, cols, vals = read_table(p)
        assert header == ["hello"] and cols == ["a", "b", "c"]
        assert np.array_equal(vals, A)

    @given(st.floats(-5, 5), st.floats(0.1, 10), st.floats(0.01, 3))
    def test_rescaling_inverse(self, lo, width, ts):
        r = Rescaling.from_config([[lo, lo + width]], ts, 1, 1)
        X, T = np.array([[lo + 0.3 * width]]), np.array([[0.7 * ts]])
        U, S = r.forward(X, T)
        np.testing.assert_allclose(U, 0.3, rtol=1e-9)
        np.testing.assert_allclose(S, 0.7, rtol=1e-12)
        X2, T2 = r.inverse(U, S)
        np.testing.assert_allclose(X2, X, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(T2, T, rtol=1e-12)

    def test_dataset_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        data = Dataset(rng.random((6, 2)), rng.random((6, 1)) + 0.1, rng.standard_normal(6))
        r = Rescaling.from_config([[0, 10], [-1, 1]], 2.0, 2, 1)
        write_dataset(tmp_path / "d.csv", data, ["prov"], r)
        header, cols, raw = read_table(tmp_path / "d.csv")
        assert cols == ["x_1", "x_2", "t_1", "y"]
        assert header[-1].startswith("rescaling") and raw[:, 0].max() > 1
        back, _ = read_dataset(tmp_path / "d.csv", r)
        np.testing.assert_allclose(back.X, data.X, rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(back.T, data.T, rtol=1e-15)
        assert np.array_equal(back.y, data.y)

    def test_bad_rescaling(self):
        with pytest.raises(ConfigError):
            Rescaling.from_config([[1, 0]], 1.0, 1, 1)
        with pytest.raises(ConfigError):
            Rescaling.from_config([[0, 1]], -1.0, 1, 1)
        with pytest.raises(ConfigError):
            Rescaling.from_config([[0, 1], [0, 1]], 1.0, 1, 1)

    def test_bad_columns(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(InvalidArgumentError):
            read_dataset(p)
        p.write_text("x_1,t_1,y\n1,oops,2\n")
        with pytest.raises(InvalidArgumentError):
            read_dataset(p)
