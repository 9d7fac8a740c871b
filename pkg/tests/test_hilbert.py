import numpy as np
import pytest

from focklab import H1ViolationError, conjugate, inner, validate_h1


def test_inner_orthonormality():
    e1 = np.array([1.0, 0.0])
    assert inner(e1, e1) == 1.0


def test_inner_antilinear_left():
    e1 = np.array([1.0 + 0j, 0.0])
    assert inner(1j * e1, e1) == pytest.approx(-1j)


def test_inner_orthogonality():
    assert inner(np.array([1.0, 1.0]), np.array([1.0, -1.0])) == 0.0


def test_inner_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        inner(np.array([1.0]), np.array([1.0, 2.0]))


def test_inner_positive_definite(rng):
    for _ in range(25):
        f = rng.normal(size=3) + 1j * rng.normal(size=3)
        assert inner(f, f).real > 0
        assert abs(inner(f, f).imag) < 1e-15


def test_conjugate_entrywise():
    np.testing.assert_array_equal(conjugate(np.array([1 + 1j, 0])), np.array([1 - 1j, 0]))


def test_conjugate_fixes_real():
    f = np.array([0.3, -2.0])
    np.testing.assert_array_equal(conjugate(f), f)


def test_conjugate_involution_and_norm(rng):
    for _ in range(20):
        f = rng.normal(size=4) + 1j * rng.normal(size=4)
        np.testing.assert_allclose(conjugate(conjugate(f)), f)
        assert np.linalg.norm(conjugate(f)) == pytest.approx(np.linalg.norm(f))


def test_validate_h1_identity():
    assert validate_h1(np.eye(3)) == pytest.approx(1.0)


def test_validate_h1_diag():
    assert validate_h1(np.diag([1.0, 2.0])) == pytest.approx(1.0)


def test_validate_h1_negative_spectrum():
    with pytest.raises(H1ViolationError, match="spectrum not >= m>0"):
        validate_h1(np.diag([-1.0, 2.0]))


def test_validate_h1_non_hermitian():
    with pytest.raises(H1ViolationError, match="Hermitian"):
        validate_h1(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_validate_h1_complex_entries():
    A = np.array([[1.0, 0.5j], [-0.5j, 1.0]])
    with pytest.raises(H1ViolationError, match="conjugation"):
        validate_h1(A)


def test_space_lower_bound(space2, rng):
    for _ in range(20):
        f = rng.normal(size=2) + 1j * rng.normal(size=2)
        quad = inner(f, space2.A @ f)
        assert abs(quad.imag) < 1e-12
        assert quad.real >= space2.m * inner(f, f).real - 1e-12


def test_space_exp_is_unitary(space2):
    U = space2.exp_A(0.7)
    np.testing.assert_allclose(U @ U.conj().T, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(space2.exp_A(0.0), np.eye(2), atol=1e-15)
