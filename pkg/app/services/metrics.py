"""
Error and state-quality measures for predicted trajectories
"""

from typing import Optional

import numpy as np

from app.models.quantum import SIGMA_Y
from app.models.trajectory import Trajectory
from app.utils.errors import DimensionError, UnphysicalStateError
from app.utils.linalg import (
    as_matrix,
    check_hermitian,
    clamp_spectrum,
    frobenius_norm,
    hermitian_eigendecompose,
    hermitian_sqrt,
    kron,
)

# eigenvalues below this are an error, above it they are clamped to zero
PSD_CLAMP_FLOOR = -1e-6
EXPECTATION_IMAG_TOL = 1e-10

_SIGMA_YY = kron(SIGMA_Y, SIGMA_Y)


def avg_frobenius_error(pred: Trajectory, ref: Trajectory) -> float:
    """Mean over grid points of ||pred(t_i) - ref(t_i)||_F."""
    pred.check_same_grid(ref)
    diff = pred.values - ref.values
    per_point = np.sqrt(np.sum(diff.real ** 2 + diff.imag ** 2, axis=(-2, -1)))
    return float(np.mean(per_point))


def physical_density(rho, floor: float = PSD_CLAMP_FLOOR) -> np.ndarray:
    """Clamp tiny negative eigenvalues to zero and renormalize the trace."""
    rho = as_matrix(rho)
    spectrum = hermitian_eigendecompose(rho)
    smallest = float(spectrum.eigenvalues[-1])
    if smallest < floor:
        raise UnphysicalStateError("Density matrix has a negative eigenvalue", smallest)
    eigenvalues = clamp_spectrum(spectrum.eigenvalues)
    total = eigenvalues.sum()
    if not total > 0:
        raise UnphysicalStateError("Density matrix has zero trace after clamping", smallest)
    v = spectrum.eigenvectors
    out = (v * (eigenvalues / total)) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def fidelity(p, r) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(p) r sqrt(p)))^2."""
    p = physical_density(p)
    r = physical_density(r)
    if p.shape != r.shape:
        raise DimensionError(f"Cannot compare states of shapes {p.shape} and {r.shape}")
    sp = hermitian_sqrt(p)
    m = sp @ r @ sp
    m = 0.5 * (m + m.conj().T)
    roots = np.sqrt(clamp_spectrum(hermitian_eigendecompose(m).eigenvalues))
    return float(min(1.0, roots.sum() ** 2))


def avg_fidelity(pred: Trajectory, ref: Trajectory) -> float:
    pred.check_same_grid(ref)
    return float(np.mean([fidelity(p, r) for p, r in zip(pred.values, ref.values)]))


def fidelity_series(pred: Trajectory, ref: Trajectory) -> np.ndarray:
    """Per-point fidelity; NaN where either state is unphysical."""
    pred.check_same_grid(ref)
    out = np.full(len(pred), np.nan)
    for i, (p, r) in enumerate(zip(pred.values, ref.values)):
        try:
            out[i] = fidelity(p, r)
        except UnphysicalStateError:
            pass
    return out


def coherence_l1(rho) -> float:
    """Sum of the moduli of the off-diagonal entries."""
    rho = as_matrix(rho)
    return float(np.sum(np.abs(rho)) - np.sum(np.abs(np.diag(rho))))


def concurrence(rho) -> float:
    """Two-qubit concurrence max(0, s1 - s2 - s3 - s4) from the eigenvalues of sqrt(rho) rho~ sqrt(rho)."""
    rho = as_matrix(rho)
    if rho.shape != (4, 4):
        raise DimensionError(f"Concurrence needs a two-qubit state, got shape {rho.shape}")
    rho = physical_density(rho)
    flipped = _SIGMA_YY @ rho.conj() @ _SIGMA_YY
    sr = hermitian_sqrt(rho)
    m = sr @ flipped @ sr
    m = 0.5 * (m + m.conj().T)
    s = np.sqrt(clamp_spectrum(hermitian_eigendecompose(m).eigenvalues))
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def expectation(rho, observable) -> float:
    """Tr(rho A) for Hermitian rho and A."""
    rho = as_matrix(rho)
    observable = as_matrix(observable)
    check_hermitian(observable)
    value = np.trace(rho @ observable)
    if abs(value.imag) > EXPECTATION_IMAG_TOL:
        raise UnphysicalStateError(f"Expectation value has imaginary part {value.imag:.3e}")
    return float(value.real)


def populations(rho) -> np.ndarray:
    return np.real(np.diag(as_matrix(rho))).copy()


def max_trace_error(traj: Trajectory) -> float:
    traces = np.trace(traj.values, axis1=-2, axis2=-1)
    return float(np.max(np.abs(traces - 1.0)))


def max_hermiticity_error(traj: Trajectory) -> float:
    return float(max(frobenius_norm(m - m.conj().T) for m in traj.values))


def min_eigenvalue(traj: Trajectory) -> float:
    return float(min(hermitian_eigendecompose(0.5 * (m + m.conj().T)).eigenvalues[-1] for m in traj.values))


def safe_metric(fn, *args) -> Optional[float]:
    """Run a state metric; None when the state is unphysical."""
    try:
        return fn(*args)
    except UnphysicalStateError:
        return None


def state_diagnostics(traj: Trajectory) -> dict:
    """Trace, Hermiticity and positivity defects of a density-matrix trajectory."""
    return {
        "max_trace_error": max_trace_error(traj),
        "max_hermiticity_error": max_hermiticity_error(traj),
        "min_eigenvalue": min_eigenvalue(traj),
    }
