import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from focklab.lanczos import expm_multiply_hermitian


def _random_hermitian(rng, n, density=0.2):
    m = sp.random(n, n, density=density, random_state=np.random.RandomState(7),
                  dtype=float).toarray()
    m = m + 1j * sp.random(n, n, density=density,
                           random_state=np.random.RandomState(8)).toarray()
    h = m + m.conj().T
    return sp.csr_matrix(h)


def test_matches_dense_expm(rng):
    H = _random_hermitian(rng, 60)
    v = rng.normal(size=60) + 1j * rng.normal(size=60)
    for tau in (-1j * 0.7, 1j * 2.3, -1j * 0.01):
        want = expm(tau * H.toarray()) @ v
        got = expm_multiply_hermitian(H, v, tau, tol=1e-12)
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_norm_preserved_for_imaginary_tau(rng):
    H = _random_hermitian(rng, 80)
    v = rng.normal(size=80) + 1j * rng.normal(size=80)
    v /= np.linalg.norm(v)
    out = expm_multiply_hermitian(H, v, -1j * 5.0, tol=1e-12)
    assert abs(np.linalg.norm(out) - 1) < 1e-10


def test_large_norm_substepping(rng):
    n = 40
    diag = np.linspace(0, 500.0, n)
    H = sp.diags(diag).tocsr()
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    got = expm_multiply_hermitian(H, v, -1j * 2.0, tol=1e-12)
    want = np.exp(-2j * diag) * v
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_zero_vector_passthrough():
    H = sp.identity(5, format="csr")
    v = np.zeros(5, complex)
    out = expm_multiply_hermitian(H, v, -1j)
    assert np.linalg.norm(out) == 0
