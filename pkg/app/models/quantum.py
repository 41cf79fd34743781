"""
Benchmark open systems (spin-boson, two-qubit XXZ), the right-hand sides of the
master equation and the auxiliary-operator equations, and the real-linear maps
between network feature vectors and complex matrices.

Basis convention: |0> = (1, 0) with sigma_z|0> = +|0>; two-qubit states are ordered
|00>, |01>, |10>, |11>; sigma_minus = |1><0|.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.autodiff.tape import Tensor
from app.utils.errors import ConfigValidationError, DimensionError, UnphysicalStateError
from app.utils.linalg import (
    as_matrix,
    check_hermitian,
    commutator,
    dagger,
    hermitian_eigendecompose,
    kron,
)

IDENTITY2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)
SIGMA_PLUS = SIGMA_MINUS.conj().T

Placement = Tuple[int, int, int, int]


@dataclass(frozen=True)
class BathParams:
    """Coupling strength Gamma, characteristic frequency gamma and temperature T (hbar = k_B = 1)."""
    Gamma: float
    gamma: float
    T: float

    def __post_init__(self):
        for name in ("Gamma", "gamma", "T"):
            if not getattr(self, name) > 0:
                raise ConfigValidationError(f"Bath parameter {name} must be positive")

    @property
    def o_coefficient(self) -> complex:
        return complex(self.Gamma * self.T * self.gamma / 2, -self.Gamma * self.gamma ** 2 / 2)

    @property
    def q_coefficient(self) -> float:
        return self.Gamma * self.T * self.gamma / 2


@dataclass(frozen=True)
class FeatureLayout:
    """Where each real feature lands in a complex operator.

    A placement (row, col, re, im) writes features[re] + i*features[im] into
    entry (row, col); tied entries repeat the same feature indices.
    """
    dim: int
    placements: Tuple[Placement, ...]
    names: Tuple[str, ...]
    basis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.names)
        used = sorted({i for p in self.placements for i in p[2:]})
        if used != list(range(n)):
            raise DimensionError(f"Layout features {used} do not cover 0..{n - 1}")
        basis = np.zeros((n, self.dim * self.dim), dtype=np.complex128)
        for row, col, re, im in self.placements:
            basis[re, row * self.dim + col] += 1.0
            basis[im, row * self.dim + col] += 1j
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def n_features(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class DensityLayout:
    """Feature parametrization of a Hermitian, unit-trace density matrix."""
    mode: str
    dim: int
    names: Tuple[str, ...]
    basis: np.ndarray = field(init=False, repr=False, compare=False)
    offset: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode == "two-level-triplet":
            basis, offset = _triplet_map()
        elif self.mode == "hermitian-trace-normalized":
            basis, offset = _trace_normalized_map(self.dim)
        else:
            raise ConfigValidationError(f"Unknown density layout mode '{self.mode}'")
        if basis.shape[0] != len(self.names):
            raise DimensionError("Density layout names do not match its feature count")
        basis.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "offset", offset)

    @property
    def n_features(self) -> int:
        return len(self.names)


def _triplet_map() -> Tuple[np.ndarray, np.ndarray]:
    # [p, x, y] -> [[p, x + iy], [x - iy, 1 - p]]
    basis = np.zeros((3, 4), dtype=np.complex128)
    basis[0, 0], basis[0, 3] = 1.0, -1.0
    basis[1, 1], basis[1, 2] = 1.0, 1.0
    basis[2, 1], basis[2, 2] = 1j, -1j
    offset = np.array([0, 0, 0, 1], dtype=np.complex128)
    return basis, offset


def _trace_normalized_map(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    # first dim features: mean-shifted diagonal; then (re, im) of the upper triangle, row-major
    pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    basis = np.zeros((dim + 2 * len(pairs), dim * dim), dtype=np.complex128)
    for k in range(dim):
        for i in range(dim):
            basis[k, i * dim + i] = (1.0 if i == k else 0.0) - 1.0 / dim
    for m, (i, j) in enumerate(pairs):
        re, im = dim + 2 * m, dim + 2 * m + 1
        basis[re, i * dim + j] = 1.0
        basis[re, j * dim + i] = 1.0
        basis[im, i * dim + j] = 1j
        basis[im, j * dim + i] = -1j
    offset = (np.eye(dim, dtype=np.complex128) / dim).reshape(-1)
    return basis, offset


@dataclass(frozen=True)
class SystemSpec:
    """A benchmark system: Hamiltonian, Lindblad operator, bath and feature layouts."""
    name: str
    dim: int
    H: np.ndarray
    L: np.ndarray
    bath: BathParams
    o_layout: FeatureLayout
    q_layout: FeatureLayout
    rho_layout: DensityLayout
    observables: Dict[str, np.ndarray] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for label, m in (("H", self.H), ("L", self.L)):
            if m.shape != (self.dim, self.dim):
                raise DimensionError(f"{label} has shape {m.shape}, expected {(self.dim, self.dim)}")
            m.setflags(write=False)
        check_hermitian(self.H, tol=1e-12)
        for layout in (self.o_layout, self.q_layout, self.rho_layout):
            if layout.dim != self.dim:
                raise DimensionError(f"Layout dimension {layout.dim} does not match system dimension {self.dim}")
        object.__setattr__(self, "L_dag", self.L.conj().T.copy())

    @property
    def heads(self) -> Dict[str, int]:
        return {"O": self.o_layout.n_features, "Q": self.q_layout.n_features}


def spin_boson_spec(bath: BathParams) -> SystemSpec:
    """H_s = sigma_z, L = sigma_x; only the off-diagonal operator entries are free."""
    o_layout = FeatureLayout(2, ((0, 1, 0, 1), (1, 0, 2, 3)),
                             ("re_O12", "im_O12", "re_O21", "im_O21"))
    q_layout = FeatureLayout(2, ((0, 1, 0, 1), (1, 0, 2, 3)),
                             ("re_Q12", "im_Q12", "re_Q21", "im_Q21"))
    rho_layout = DensityLayout("two-level-triplet", 2, ("rho11", "re_rho12", "im_rho12"))
    return SystemSpec(
        name="spin_boson",
        dim=2,
        H=SIGMA_Z.copy(),
        L=SIGMA_X.copy(),
        bath=bath,
        o_layout=o_layout,
        q_layout=q_layout,
        rho_layout=rho_layout,
        observables={"sigma_z": SIGMA_Z},
    )


def xxz_spec(J: float, Delta: float, bath: BathParams) -> SystemSpec:
    """Two-qubit XXZ chain with the collective lowering operator as Lindblad operator."""
    H = J * (kron(SIGMA_X, SIGMA_X) + kron(SIGMA_Y, SIGMA_Y)) + Delta * kron(SIGMA_Z, SIGMA_Z)
    L = kron(SIGMA_MINUS, IDENTITY2) + kron(IDENTITY2, SIGMA_MINUS)
    # O21 = O31 and O42 = O43; Q12 = Q13 and Q24 = Q34 (1-based)
    o_layout = FeatureLayout(4, ((1, 0, 0, 1), (2, 0, 0, 1), (3, 1, 2, 3), (3, 2, 2, 3)),
                             ("re_O21", "im_O21", "re_O42", "im_O42"))
    q_layout = FeatureLayout(4, ((0, 1, 0, 1), (0, 2, 0, 1), (1, 3, 2, 3), (2, 3, 2, 3)),
                             ("re_Q12", "im_Q12", "re_Q24", "im_Q24"))
    pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    rho_names = tuple([f"d{i + 1}" for i in range(4)]
                      + [f"{part}_rho{i + 1}{j + 1}" for i, j in pairs for part in ("re", "im")])
    rho_layout = DensityLayout("hermitian-trace-normalized", 4, rho_names)
    return SystemSpec(
        name="xxz",
        dim=4,
        H=H,
        L=L,
        bath=bath,
        o_layout=o_layout,
        q_layout=q_layout,
        rho_layout=rho_layout,
        observables={"sigma_z1": kron(SIGMA_Z, IDENTITY2), "sigma_z2": kron(IDENTITY2, SIGMA_Z)},
    )


def build_system(name: str, bath: BathParams, J: float = 2.0, Delta: float = 0.5) -> SystemSpec:
    if name == "spin_boson":
        return spin_boson_spec(bath)
    if name == "xxz":
        return xxz_spec(J, Delta, bath)
    raise ConfigValidationError(f"Unknown system '{name}'")


# feature <-> matrix maps

def _check_features(features, n: int):
    if features.shape[-1] != n:
        raise DimensionError(f"Expected {n} features, got {features.shape[-1]}")


def _reshape(flat, dim: int):
    return flat.reshape(*flat.shape[:-1], dim, dim)


def features_to_operator(features, layout: FeatureLayout):
    """Real-linear reconstruction; accepts a feature vector, a batch, or a tape tensor batch."""
    if not isinstance(features, Tensor):
        features = np.asarray(features, dtype=np.float64)
    _check_features(features, layout.n_features)
    return _reshape(features @ layout.basis, layout.dim)


def operator_to_features(matrix, layout: FeatureLayout) -> np.ndarray:
    """Read features back from the first placement of each feature index."""
    m = np.asarray(matrix)
    out = np.zeros(m.shape[:-2] + (layout.n_features,))
    seen = set()
    for row, col, re, im in layout.placements:
        if re in seen:
            continue
        seen.add(re)
        out[..., re] = m[..., row, col].real
        out[..., im] = m[..., row, col].imag
    return out


def features_to_density(features, layout: DensityLayout):
    """Hermitian unit-trace density matrix from its feature vector (or batch)."""
    if not isinstance(features, Tensor):
        features = np.asarray(features, dtype=np.float64)
    _check_features(features, layout.n_features)
    return _reshape(features @ layout.basis + layout.offset, layout.dim)


def density_rate(dfeatures_dt, layout: DensityLayout):
    """d(rho)/dt from feature derivatives; the constant offset drops out."""
    if not isinstance(dfeatures_dt, Tensor):
        dfeatures_dt = np.asarray(dfeatures_dt, dtype=np.float64)
    _check_features(dfeatures_dt, layout.n_features)
    return _reshape(dfeatures_dt @ layout.basis, layout.dim)


def density_to_features(rho, layout: DensityLayout) -> np.ndarray:
    m = np.asarray(rho)
    dim = layout.dim
    if layout.mode == "two-level-triplet":
        return np.stack([m[..., 0, 0].real, m[..., 0, 1].real, m[..., 0, 1].imag], axis=-1)
    diag = np.real(np.diagonal(m, axis1=-2, axis2=-1))
    parts = [diag]
    for i in range(dim):
        for j in range(i + 1, dim):
            parts.append(np.stack([m[..., i, j].real, m[..., i, j].imag], axis=-1))
    return np.concatenate(parts, axis=-1)


# right-hand sides

def _check_dims(spec: SystemSpec, *mats):
    for m in mats:
        if tuple(m.shape[-2:]) != (spec.dim, spec.dim):
            raise DimensionError(f"Operator of shape {tuple(m.shape)} does not fit a {spec.dim}-level system")


def _generator(O, Q, spec: SystemSpec):
    return -1j * spec.H - (spec.L_dag @ O + spec.L @ Q)


def rhs_O(O, Q, spec: SystemSpec):
    """dO/dt = (Gamma T gamma/2 - i Gamma gamma^2/2) L - gamma O + [-i H - (L^dag O + L Q), O]."""
    _check_dims(spec, O, Q)
    bath = spec.bath
    return bath.o_coefficient * spec.L - bath.gamma * O + commutator(_generator(O, Q, spec), O)


def rhs_Q(O, Q, spec: SystemSpec):
    """dQ/dt = (Gamma T gamma/2) L^dag - gamma Q + [-i H - (L^dag O + L Q), Q]."""
    _check_dims(spec, O, Q)
    bath = spec.bath
    return bath.q_coefficient * spec.L_dag - bath.gamma * Q + commutator(_generator(O, Q, spec), Q)


def rhs_rho(rho, O, Q, spec: SystemSpec, check: bool = True):
    """Master-equation right-hand side for the reduced density matrix."""
    _check_dims(spec, rho, O, Q)
    if check and isinstance(rho, np.ndarray) and rho.ndim == 2:
        check_density_matrix(rho, tol=1e-8, require_psd=False)
    L, L_dag = spec.L, spec.L_dag
    return (-1j * commutator(spec.H, rho)
            + commutator(L, rho @ dagger(O))
            - commutator(L_dag, O @ rho)
            + commutator(L_dag, rho @ dagger(Q))
            - commutator(L, Q @ rho))


# states

def check_density_matrix(rho: np.ndarray, tol: float = 1e-10, require_psd: bool = True) -> None:
    rho = as_matrix(rho)
    check_hermitian(rho, tol=tol)
    trace = np.trace(rho)
    if abs(trace - 1.0) > tol:
        raise UnphysicalStateError(f"Density matrix trace {trace.real:.12g} differs from 1")
    if require_psd:
        smallest = float(hermitian_eigendecompose(rho).eigenvalues[-1])
        if smallest < -tol:
            raise UnphysicalStateError("Density matrix is not positive semidefinite", smallest)


def ket_projector(amplitudes: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=np.complex128)
    psi = psi / np.sqrt(np.vdot(psi, psi).real)
    return np.outer(psi, psi.conj())


def initial_state(selector: str, dim: int, matrix: Optional[List[List[List[float]]]] = None) -> np.ndarray:
    """rho_0 from a selector: ket0, ket00, bell or a custom [[[re, im], ...], ...] matrix."""
    if selector == "ket0":
        rho = ket_projector([1, 0])
    elif selector == "ket00":
        rho = ket_projector([1, 0, 0, 0])
    elif selector == "bell":
        rho = ket_projector([1, 0, 0, 1])
    elif selector == "custom":
        if matrix is None:
            raise ConfigValidationError("Custom initial state needs a matrix")
        data = np.asarray(matrix, dtype=np.float64)
        if data.ndim != 3 or data.shape[-1] != 2:
            raise ConfigValidationError("Custom initial state must be [[[re, im], ...], ...]")
        rho = data[..., 0] + 1j * data[..., 1]
    else:
        raise ConfigValidationError(f"Unknown initial state '{selector}'")
    if rho.shape != (dim, dim):
        raise ConfigValidationError(f"Initial state '{selector}' is {rho.shape[0]}-dimensional, system is {dim}-dimensional")
    check_density_matrix(rho)
    return rho
