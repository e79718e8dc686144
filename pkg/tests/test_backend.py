import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfgp import _pycore, backend

pytestmark = pytest.mark.skipif("cython" not in backend.available, reason="compiled core not built")

FAMS = st.sampled_from([0, 1, 2, 3])


def arrays(seed, n1, n2, d):
    r = np.random.default_rng(seed)
    return r.uniform(0, 1, (n1, d)), r.uniform(0, 1, (n2, d)), r.uniform(0.2, 5.0, d)


@given(seed=st.integers(0, 2**31), fam=FAMS, d=st.integers(1, 3))
def test_correlation_parity(seed, fam, d):
    c = backend.get("cython")
    X1, X2, phi = arrays(seed, 5, 4, d)
    np.testing.assert_allclose(c.corr_matrix(X1, X2, phi, fam), _pycore.corr_matrix(X1, X2, phi, fam), rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(c.corr_grad(X1, X2, phi, fam), _pycore.corr_grad(X1, X2, phi, fam), rtol=1e-12, atol=1e-14)


@given(seed=st.integers(0, 2**31), g=st.floats(0.02, 0.98), m=st.integers(1, 2))
def test_fidelity_parity(seed, g, m):
    c = backend.get("cython")
    r = np.random.default_rng(seed)
    T1, T2 = r.uniform(0, 1, (4, m)), r.uniform(0, 1, (3, m))
    a, l = r.uniform(0.5, 2, m), np.full(m, 4.0)
    np.testing.assert_allclose(c.fidelity_matrix(T1, T2, a, l, g), _pycore.fidelity_matrix(T1, T2, a, l, g), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(c.fidelity_grad(T1, T2, a, l, g), _pycore.fidelity_grad(T1, T2, a, l, g), rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("g", [0.01, 0.02])
def test_fidelity_parity_underflow(g):
    # tiny u with small gamma takes the rescaled branch of the compiled kernel
    c = backend.get("cython")
    T = np.array([[0.0], [0.01], [0.02], [0.05], [0.5]])
    a, l = np.array([1.0]), np.array([4.0])
    np.testing.assert_allclose(c.fidelity_matrix(T, T, a, l, g), _pycore.fidelity_matrix(T, T, a, l, g), rtol=1e-12, atol=1e-16)
    np.testing.assert_allclose(c.fidelity_grad(T, T, a, l, g), _pycore.fidelity_grad(T, T, a, l, g), rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("g", [0.0101, 0.02])
def test_fidelity_parity_overflow(g):
    # large a t^l with small gamma overflows the unscaled powers
    c = backend.get("cython")
    T = np.array([[0.0, 0.3], [0.25, 1.0], [0.5, 0.9], [1.0, 1.0]])
    a, l = np.array([1.0e4, 3.0e3]), np.array([4.0, 2.0])
    A = c.fidelity_matrix(T, T, a, l, g)
    assert np.all(np.isfinite(A))
    np.testing.assert_allclose(A, _pycore.fidelity_matrix(T, T, a, l, g), rtol=1e-12)
    ref = _pycore.fidelity_grad(T, T, a, l, g)
    scale = np.abs(ref).max(axis=(1, 2), keepdims=True)
    assert np.all(np.abs(c.fidelity_grad(T, T, a, l, g) - ref) <= 1e-9 * scale)


@given(seed=st.integers(0, 2**31), fam=FAMS, d=st.integers(1, 3))
def test_integral_parity(seed, fam, d):
    c = backend.get("cython")
    X1, X2, phi = arrays(seed, 4, 3, d)
    np.testing.assert_allclose(c.line_integrals(X1, phi, fam), _pycore.line_integrals(X1, phi, fam), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(c.w_matrix(X1, X2, phi, fam), _pycore.w_matrix(X1, X2, phi, fam), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(c.w_diag(X1, phi, fam), _pycore.w_diag(X1, phi, fam), rtol=1e-12, atol=1e-15)


def test_read_only_inputs_accepted():
    c = backend.get("cython")
    X = np.linspace(0, 1, 6).reshape(3, 2)
    X.setflags(write=False)
    assert c.corr_matrix(X, X, np.array([1.0, 1.0]), 0).shape == (3, 3)


def test_get_defaults_to_active():
    assert backend.get() is backend.core
    assert backend.get("python") is _pycore


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, CFGP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from cfgp import backend; print(backend.NAME)"], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
