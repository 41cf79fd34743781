"""
Small dense complex-matrix algebra: commutators, norms, Kronecker products and
a cyclic Jacobi eigensolver for Hermitian matrices of dimension 2 or 4.
"""

from dataclasses import dataclass

import numpy as np

from app.utils.errors import ConvergenceError, DimensionError, UnphysicalStateError

HERMITIAN_TOL = 1e-10
EIGEN_CLAMP_FLOOR = -1e-10
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
# eigenvalues this far below the largest one are rounding noise
EIGEN_NOISE = 1e-14
MAX_DIM = 4


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order and the matching eigenvectors as columns."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a) -> np.ndarray:
    """Coerce to a square complex128 matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {m.shape}")
    return m


def dagger(a):
    """Conjugate transpose over the last two axes; works for arrays and tape tensors."""
    if isinstance(a, np.ndarray):
        return np.conj(np.swapaxes(a, -1, -2))
    return a.dagger()


def commutator(a, b):
    """Return AB - BA."""
    if a.shape[-2:] != b.shape[-2:] or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"Commutator of mismatched shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def frobenius_norm(a) -> float:
    m = np.asarray(a, dtype=np.complex128)
    return float(np.sqrt(np.sum(m.real ** 2 + m.imag ** 2)))


def kron(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[0] * b.shape[0] > MAX_DIM:
        raise DimensionError(f"Kronecker product of dimension {a.shape[0] * b.shape[0]} exceeds {MAX_DIM}")
    return np.kron(a, b)


def hermiticity_defect(a: np.ndarray) -> float:
    return frobenius_norm(a - a.conj().T)


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    defect = hermiticity_defect(a)
    if defect > tol * max(1.0, frobenius_norm(a)):
        raise DimensionError(f"Matrix is not Hermitian (‖A - A†‖_F = {defect:.3e})")


def _off_diagonal_mass(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return frobenius_norm(off)


def _rotation(a: np.ndarray, p: int, q: int) -> np.ndarray:
    """Unitary J with (J† A J)[p, q] = 0.

    The phase of a[p, q] is removed first so the remaining 2x2 block is real
    symmetric, then the classical Jacobi angle is applied.
    """
    apq = a[p, q]
    magnitude = abs(apq)
    phase = apq / magnitude
    theta = (a[q, q].real - a[p, p].real) / (2.0 * magnitude)
    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
    if theta < 0.0:
        t = -t
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    j = np.eye(a.shape[0], dtype=np.complex128)
    j[p, p] = c
    j[p, q] = s
    j[q, p] = -s * np.conj(phase)
    j[q, q] = c * np.conj(phase)
    return j


def hermitian_eigendecompose(a) -> Spectrum:
    """Eigen-decompose a Hermitian matrix with cyclic Jacobi sweeps."""
    a = as_matrix(a)
    check_hermitian(a)
    n = a.shape[0]
    work = 0.5 * (a + a.conj().T)
    vectors = np.eye(n, dtype=np.complex128)
    tol = JACOBI_TOL * max(1.0, frobenius_norm(a))

    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_diagonal_mass(work) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if work[p, q] == 0.0:
                    continue
                j = _rotation(work, p, q)
                work = j.conj().T @ work @ j
                work[p, q] = 0.0
                work[q, p] = 0.0
                vectors = vectors @ j
    else:
        residual = _off_diagonal_mass(work)
        if residual >= tol:
            raise ConvergenceError("Jacobi eigensolver did not converge", residual)

    eigenvalues = np.real(np.diag(work)).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return Spectrum(eigenvalues=eigenvalues[order], eigenvectors=vectors[:, order])


def clamp_spectrum(eigenvalues: np.ndarray) -> np.ndarray:
    """Descending eigenvalues with negatives and rounding noise set to zero."""
    values = np.clip(eigenvalues, 0.0, None)
    if values.size:
        values[values < EIGEN_NOISE * values[0]] = 0.0
    return values


def hermitian_sqrt(a, floor: float = EIGEN_CLAMP_FLOOR) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix."""
    spectrum = hermitian_eigendecompose(a)
    smallest = float(spectrum.eigenvalues[-1])
    if smallest < floor:
        raise UnphysicalStateError("Matrix square root of a non-PSD matrix", smallest)
    roots = np.sqrt(clamp_spectrum(spectrum.eigenvalues))
    v = spectrum.eigenvectors
    s = (v * roots) @ v.conj().T
    return 0.5 * (s + s.conj().T)
