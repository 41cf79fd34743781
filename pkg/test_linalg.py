#!/usr/bin/env python3
"""
Tests for the dense complex linear algebra helpers and the Jacobi eigensolver
"""

import numpy as np
import pytest

from app.models.quantum import SIGMA_X, SIGMA_Y, SIGMA_Z
from app.utils.errors import DimensionError, UnphysicalStateError
from app.utils.linalg import (
    commutator,
    dagger,
    frobenius_norm,
    hermitian_eigendecompose,
    hermitian_sqrt,
    kron,
)
from conftest import random_density


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def test_pauli_commutator():
    assert np.allclose(commutator(SIGMA_X, SIGMA_Y), 2j * SIGMA_Z)
    assert np.allclose(commutator(SIGMA_Z, SIGMA_Z), 0)


def test_commutator_shape_mismatch():
    with pytest.raises(DimensionError):
        commutator(np.eye(2), np.eye(4))


def test_commutator_batched():
    batch = np.stack([SIGMA_X, SIGMA_Y])
    out = commutator(batch, SIGMA_Z)
    assert out.shape == (2, 2, 2)
    assert np.allclose(out[0], -2j * SIGMA_Y)


def test_frobenius_and_dagger():
    assert frobenius_norm(np.eye(2)) == pytest.approx(np.sqrt(2))
    m = np.array([[1, 2j], [3, 4]])
    assert np.array_equal(dagger(m), m.conj().T)


def test_kron_dimension_cap():
    assert kron(SIGMA_X, SIGMA_Z).shape == (4, 4)
    with pytest.raises(DimensionError):
        kron(np.eye(4), np.eye(2))


@pytest.mark.parametrize("dim", [2, 4])
def test_eigendecompose_random_hermitian(rng, dim):
    for _ in range(20):
        a = random_hermitian(rng, dim)
        spectrum = hermitian_eigendecompose(a)
        v = spectrum.eigenvectors
        assert np.allclose(v.conj().T @ v, np.eye(dim), atol=1e-12)
        assert frobenius_norm(spectrum.reconstruct() - a) <= 1e-12 * max(1.0, frobenius_norm(a))
        assert np.allclose(spectrum.eigenvalues, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-12)
        assert np.all(np.diff(spectrum.eigenvalues) <= 0)


def test_eigendecompose_complex_phase():
    a = np.array([[1, 1j], [-1j, 1]])
    spectrum = hermitian_eigendecompose(a)
    assert np.allclose(spectrum.eigenvalues, [2, 0], atol=1e-14)


def test_eigendecompose_degenerate_and_diagonal():
    spectrum = hermitian_eigendecompose(np.eye(4))
    assert np.allclose(spectrum.eigenvalues, 1.0)
    assert np.allclose(spectrum.eigenvectors, np.eye(4))

    spectrum = hermitian_eigendecompose(np.diag([0.1, 0.7, -0.2, 0.4]))
    assert np.allclose(spectrum.eigenvalues, [0.7, 0.4, 0.1, -0.2])


def test_eigendecompose_rejects_non_hermitian():
    with pytest.raises(DimensionError):
        hermitian_eigendecompose(np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionError):
        hermitian_eigendecompose(np.ones((2, 3)))


def test_hermitian_sqrt(rng):
    rho = random_density(rng, 4)
    s = hermitian_sqrt(rho)
    assert np.allclose(s @ s, rho, atol=1e-12)
    assert np.allclose(s, s.conj().T)


def test_hermitian_sqrt_rejects_negative():
    with pytest.raises(UnphysicalStateError):
        hermitian_sqrt(np.diag([1.0, -0.5]))
