import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svcgraph.linalg import deflated_spectrum, jacobi_eigh, power_iteration


def sym(seed, n):
    a = np.random.default_rng(seed).normal(size=(n, n))
    return (a + a.T) / 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_jacobi_matches_eigh(seed, n):
    a = sym(seed, n)
    vals, vecs = jacobi_eigh(a)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(a)[::-1], atol=1e-10)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(a @ vecs, vecs * vals, atol=1e-9)


def test_jacobi_diagonal_input():
    vals, vecs = jacobi_eigh(np.diag([1.0, 3.0, 2.0]))
    assert vals.tolist() == [3.0, 2.0, 1.0]
    assert np.array_equal(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])


def test_jacobi_rejects_nonsquare():
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((2, 3)))


def test_power_iteration_dominant():
    a = np.diag([5.0, -2.0, 1.0])
    lam, x = power_iteration(a)
    assert lam == pytest.approx(5.0)
    assert abs(x[0]) == pytest.approx(1.0)


def test_deflated_spectrum_psd():
    b = np.random.default_rng(3).normal(size=(6, 6))
    a = b @ b.T
    got = sorted(deflated_spectrum(a), reverse=True)
    np.testing.assert_allclose(got, np.linalg.eigvalsh(a)[::-1], rtol=1e-6, atol=1e-8)
