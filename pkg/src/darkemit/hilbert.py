"""Truncated Fock x qubit x qubit Hilbert space and elementary operators.

Everything downstream (Hamiltonians, master equation, correlation sweeps)
works with the dense complex matrices built here.  The basis ordering is
fixed: photon number major, then qubit 1, then qubit 2, with "down" before
"up", i.e. index = 4*n + 2*s1 + s2 for spin bits s in {0 (down), 1 (up)}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpaceMismatchError",
    "SystemSpace",
    "Operator",
    "QuantumState",
    "make_space",
    "identity",
    "annihilator",
    "creator",
    "number_op",
    "pauli",
    "sigma_minus",
    "sigma_plus",
    "parity_operator",
    "basis_state",
    "basis_label",
    "singlet_state",
    "expectation",
    "fidelity",
]

HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-10

DOWN, UP = 0, 1
_SPIN_CHARS = {"d": 0, "u": 1, "↓": 0, "↑": 1}


class SpaceMismatchError(ValueError):
    """Raised when combining objects that live in different spaces."""


@dataclass(frozen=True)
class SystemSpace:
    """Descriptor of the truncated composite space (N_max photons, 2 qubits)."""

    fock_cutoff: int
    n_qubits: int = 2

    def __post_init__(self):
        if self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be >= 1, got {self.fock_cutoff}")
        if self.n_qubits != 2:
            raise ValueError("only the two-qubit space is supported")

    @property
    def dim(self) -> int:
        return (self.fock_cutoff + 1) * 2**self.n_qubits

    def index(self, n: int, s1: int, s2: int) -> int:
        """Basis index of |n, s1, s2> with s = 0 (down) or 1 (up)."""
        if not (0 <= n <= self.fock_cutoff):
            raise ValueError(f"photon number {n} outside [0, {self.fock_cutoff}]")
        if s1 not in (0, 1) or s2 not in (0, 1):
            raise ValueError("spin labels must be 0 (down) or 1 (up)")
        return 4 * n + 2 * s1 + s2

    def unindex(self, i: int) -> tuple[int, int, int]:
        """Inverse of :meth:`index`."""
        if not (0 <= i < self.dim):
            raise ValueError(f"index {i} outside [0, {self.dim})")
        return i // 4, (i // 2) % 2, i % 2

    # Diagonal label arrays used heavily by the kernels.
    def photon_numbers(self) -> np.ndarray:
        return np.repeat(np.arange(self.fock_cutoff + 1), 4).astype(float)

    def spin_bits(self, qubit: int) -> np.ndarray:
        if qubit == 1:
            pattern = np.array([0, 0, 1, 1], dtype=float)
        elif qubit == 2:
            pattern = np.array([0, 1, 0, 1], dtype=float)
        else:
            raise ValueError("qubit index must be 1 or 2")
        return np.tile(pattern, self.fock_cutoff + 1)


def make_space(fock_cutoff: int) -> SystemSpace:
    """Construct the truncated space; fock_cutoff must be >= 1."""
    return SystemSpace(int(fock_cutoff))


def _check_same_space(a, b):
    if a.space != b.space:
        raise SpaceMismatchError(
            f"operands live in different spaces: {a.space} vs {b.space}"
        )


@dataclass
class Operator:
    """Dense complex matrix tied to a :class:`SystemSpace`."""

    space: SystemSpace
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=complex)
        d = self.space.dim
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({d}, {d})")
        if self.hermitian:
            dev = np.abs(self.matrix - self.matrix.conj().T).max()
            if dev >= HERMITICITY_TOL:
                raise ValueError(f"hermitian flag set but |A - A^dag|_max = {dev:.3e}")

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, hermitian=self.hermitian)

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, self.matrix + other.matrix,
                        hermitian=self.hermitian and other.hermitian)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, self.matrix - other.matrix,
                        hermitian=self.hermitian and other.hermitian)

    def __mul__(self, scalar) -> "Operator":
        herm = self.hermitian and abs(np.imag(scalar)) == 0
        return Operator(self.space, self.matrix * scalar, hermitian=herm)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, self.matrix @ other.matrix)

    def commutator_norm(self, other: "Operator") -> float:
        _check_same_space(self, other)
        c = self.matrix @ other.matrix - other.matrix @ self.matrix
        return float(np.abs(c).max())


@dataclass
class QuantumState:
    """Pure state vector or density matrix over a :class:`SystemSpace`."""

    space: SystemSpace
    kind: str  # "pure" | "density"
    data: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=complex)
        d = self.space.dim
        if self.kind == "pure":
            if self.data.shape != (d,):
                raise ValueError(f"pure state shape {self.data.shape} != ({d},)")
            if self.validate:
                nrm = np.linalg.norm(self.data)
                if abs(nrm - 1.0) > NORM_TOL:
                    raise ValueError(f"pure state norm {nrm} != 1")
        elif self.kind == "density":
            if self.data.shape != (d, d):
                raise ValueError(f"density matrix shape {self.data.shape} != ({d},{d})")
            if self.validate:
                tr = np.trace(self.data).real
                if abs(tr - 1.0) > NORM_TOL:
                    raise ValueError(f"density matrix trace {tr} != 1")
                if np.abs(self.data - self.data.conj().T).max() > 1e-10:
                    raise ValueError("density matrix is not Hermitian")
                if np.linalg.eigvalsh(self.data).min() < -NORM_TOL:
                    raise ValueError("density matrix has negative eigenvalues")
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")

    def to_density(self) -> "QuantumState":
        if self.kind == "density":
            return self
        rho = np.outer(self.data, self.data.conj())
        return QuantumState(self.space, "density", rho, validate=False)

    def density_matrix(self) -> np.ndarray:
        return self.to_density().data


# ---------------------------------------------------------------------------
# elementary operators


def identity(space: SystemSpace) -> Operator:
    return Operator(space, np.eye(space.dim), hermitian=True)


def annihilator(space: SystemSpace) -> Operator:
    """Photon annihilation operator, <n-1|a|n> = sqrt(n)."""
    d = space.dim
    m = np.zeros((d, d), dtype=complex)
    for n in range(1, space.fock_cutoff + 1):
        for q in range(4):
            m[4 * (n - 1) + q, 4 * n + q] = np.sqrt(n)
    return Operator(space, m)


def creator(space: SystemSpace) -> Operator:
    return annihilator(space).dag()


def number_op(space: SystemSpace) -> Operator:
    return Operator(space, np.diag(space.photon_numbers().astype(complex)),
                    hermitian=True)


_PAULI = {
    # basis order (down, up): sigma_y = -i(|up><down| - |down><up|)
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


def _qubit_op(space: SystemSpace, qubit: int, m2: np.ndarray) -> np.ndarray:
    if qubit == 1:
        q4 = np.kron(m2, np.eye(2))
    elif qubit == 2:
        q4 = np.kron(np.eye(2), m2)
    else:
        raise ValueError("qubit index must be 1 or 2")
    return np.kron(np.eye(space.fock_cutoff + 1), q4)


def pauli(space: SystemSpace, qubit: int, axis: str) -> Operator:
    """Pauli operator on the named qubit; identity on everything else.

    Convention: sigma_z |up> = +|up>, sigma_z |down> = -|down>.
    """
    if axis not in _PAULI:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    return Operator(space, _qubit_op(space, qubit, _PAULI[axis]), hermitian=True)


def sigma_minus(space: SystemSpace, qubit: int) -> Operator:
    """Lowering operator |down><up| on the named qubit."""
    m2 = np.array([[0, 1], [0, 0]], dtype=complex)  # (down, up) ordering
    return Operator(space, _qubit_op(space, qubit, m2))


def sigma_plus(space: SystemSpace, qubit: int) -> Operator:
    return sigma_minus(space, qubit).dag()


def parity_operator(space: SystemSpace) -> Operator:
    """P = sigma_1z sigma_2z exp(i pi a^dag a); diagonal with entries +-1."""
    n = space.photon_numbers()
    z1 = 2 * space.spin_bits(1) - 1
    z2 = 2 * space.spin_bits(2) - 1
    diag = z1 * z2 * ((-1.0) ** n)
    return Operator(space, np.diag(diag.astype(complex)), hermitian=True)


def parity_diagonal(space: SystemSpace) -> np.ndarray:
    """The +-1 diagonal of the parity operator as a real vector."""
    n = space.photon_numbers()
    z1 = 2 * space.spin_bits(1) - 1
    z2 = 2 * space.spin_bits(2) - 1
    return z1 * z2 * ((-1.0) ** n)


def _parse_spin(token) -> int:
    if isinstance(token, (int, np.integer)):
        if token in (0, 1):
            return int(token)
        raise ValueError(f"spin must be 0 or 1, got {token}")
    ch = str(token)
    if ch in _SPIN_CHARS:
        return _SPIN_CHARS[ch]
    raise ValueError(f"unknown spin label {token!r}")


def basis_state(space: SystemSpace, n: int, s1, s2) -> QuantumState:
    """Basis ket |n, s1, s2>; spins accept 0/1 or 'd'/'u' (or arrows)."""
    vec = np.zeros(space.dim, dtype=complex)
    vec[space.index(n, _parse_spin(s1), _parse_spin(s2))] = 1.0
    return QuantumState(space, "pure", vec, validate=False)


def basis_label(space: SystemSpace, i: int) -> str:
    n, s1, s2 = space.unindex(i)
    arrows = {0: "d", 1: "u"}
    return f"{n}{arrows[s1]}{arrows[s2]}"


def singlet_state(space: SystemSpace, n: int = 0) -> QuantumState:
    """|n> (|du> - |ud>)/sqrt(2), the cavity-decoupled qubit singlet."""
    vec = np.zeros(space.dim, dtype=complex)
    vec[space.index(n, DOWN, UP)] = 1 / np.sqrt(2)
    vec[space.index(n, UP, DOWN)] = -1 / np.sqrt(2)
    return QuantumState(space, "pure", vec, validate=False)


# ---------------------------------------------------------------------------
# expectation values and fidelity


def expectation(state: QuantumState, op: Operator) -> complex:
    """<A> = <psi|A|psi> for pure states, Tr(rho A) for density matrices."""
    _check_same_space(state, op)
    if state.kind == "pure":
        return complex(state.data.conj() @ (op.matrix @ state.data))
    return complex(np.trace(op.matrix @ state.data))


def fidelity(state: QuantumState, target: QuantumState) -> float:
    """Overlap with a pure target: |<t|psi>|^2 or <t|rho|t>."""
    _check_same_space(state, target)
    if target.kind != "pure":
        raise ValueError("fidelity target must be a pure state")
    t = target.data
    if state.kind == "pure":
        return float(abs(t.conj() @ state.data) ** 2)
    return float((t.conj() @ (state.data @ t)).real)


# ---------------------------------------------------------------------------
# serialization (test fixtures): complex arrays as interleaved (re, im) pairs
# in column-major order, plus a small JSON header.


def _complex_to_pairs(arr: np.ndarray) -> list[float]:
    flat = np.asarray(arr, dtype=complex).flatten(order="F")
    out = np.empty(2 * flat.size)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tolist()


def _pairs_to_complex(pairs, shape) -> np.ndarray:
    buf = np.asarray(pairs, dtype=float)
    flat = buf[0::2] + 1j * buf[1::2]
    return flat.reshape(shape, order="F")


def operator_to_json(op: Operator) -> str:
    return json.dumps({
        "type": "operator",
        "fock_cutoff": op.space.fock_cutoff,
        "shape": list(op.matrix.shape),
        "order": "column-major",
        "data": _complex_to_pairs(op.matrix),
    })


def operator_from_json(blob: str) -> Operator:
    doc = json.loads(blob)
    space = make_space(doc["fock_cutoff"])
    return Operator(space, _pairs_to_complex(doc["data"], tuple(doc["shape"])))


def state_to_json(state: QuantumState) -> str:
    return json.dumps({
        "type": "state",
        "kind": state.kind,
        "fock_cutoff": state.space.fock_cutoff,
        "shape": list(state.data.shape),
        "order": "column-major",
        "data": _complex_to_pairs(state.data),
    })


def state_from_json(blob: str) -> QuantumState:
    doc = json.loads(blob)
    space = make_space(doc["fock_cutoff"])
    data = _pairs_to_complex(doc["data"], tuple(doc["shape"]))
    return QuantumState(space, doc["kind"], data)
