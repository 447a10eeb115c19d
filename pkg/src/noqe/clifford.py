"""Clifford tableaux: uniform sampling, circuits, and stabilizer pullbacks.

A tableau stores the conjugation action of a Clifford unitary U on the Pauli
generators as a binary symplectic matrix. Row q is the image of X_q, row N+q
the image of Z_q; columns split into an X block then a Z block, and each row
carries a sign bit, encoding the Pauli (-1)^r i^(x.z) X^x Z^z. Global phase
is ignored throughout: shadows only ever need U^dag |b><b| U.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ContractError
from .sim import Circuit, Statevector

MAX_TABLEAU_QUBITS = 12

_OP_NAMES = ("H", "S", "CNOT", "CZ", "X", "Z")


@dataclass(frozen=True)
class CliffordTableau:
    """Symplectic matrix m (2N x 2N over GF(2)) plus sign bits r (2N)."""

    num_qubits: int
    m: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        n = self.num_qubits
        if not 1 <= n <= MAX_TABLEAU_QUBITS:
            raise ContractError(
                f"tableau width {n} outside 1..{MAX_TABLEAU_QUBITS}"
            )
        m = np.ascontiguousarray(np.asarray(self.m, dtype=np.uint8) & 1)
        r = np.ascontiguousarray(np.asarray(self.r, dtype=np.uint8) & 1)
        if m.shape != (2 * n, 2 * n):
            raise ContractError(f"tableau matrix shape {m.shape} != {(2*n, 2*n)}")
        if r.shape != (2 * n,):
            raise ContractError(f"sign vector shape {r.shape} != {(2*n,)}")
        m.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "r", r)

    def is_symplectic(self) -> bool:
        n = self.num_qubits
        lam = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        lam[:n, n:] = np.eye(n, dtype=np.uint8)
        lam[n:, :n] = np.eye(n, dtype=np.uint8)
        lhs = (self.m @ lam @ self.m.T) & 1
        return bool(np.array_equal(lhs, lam))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CliffordTableau):
            return NotImplemented
        return (
            self.num_qubits == other.num_qubits
            and np.array_equal(self.m, other.m)
            and np.array_equal(self.r, other.r)
        )


def identity_tableau(num_qubits: int) -> CliffordTableau:
    n = num_qubits
    return CliffordTableau(n, np.eye(2 * n, dtype=np.uint8), np.zeros(2 * n, np.uint8))


def sample_uniform_clifford(num_qubits: int, rng) -> CliffordTableau:
    """Draw a tableau uniformly over the Clifford group (mod global phase).

    rng may be a numpy Generator or a plain integer seed; either way the draw
    is deterministic for a given rng state.
    """
    n = num_qubits
    if not 1 <= n <= MAX_TABLEAU_QUBITS:
        raise ContractError(f"tableau width {n} outside 1..{MAX_TABLEAU_QUBITS}")
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
    else:
        seed = int(rng.integers(1 << 63))
    m = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    _kernels._sample_tableau(n, seed, m, r)
    return CliffordTableau(n, m, r)


def _update(m: np.ndarray, r: np.ndarray, n: int, kind: str, qubits) -> None:
    """Apply one gate's conjugation action to every tableau row in place."""
    if kind == "H":
        (q,) = qubits
        x = m[:, q].copy()
        z = m[:, n + q].copy()
        r ^= x & z
        m[:, q] = z
        m[:, n + q] = x
    elif kind == "S":
        (q,) = qubits
        r ^= m[:, q] & m[:, n + q]
        m[:, n + q] ^= m[:, q]
    elif kind == "Sdg":
        _update(m, r, n, "S", qubits)
        _update(m, r, n, "Z", qubits)
    elif kind == "X":
        (q,) = qubits
        r ^= m[:, n + q]
    elif kind == "Z":
        (q,) = qubits
        r ^= m[:, q]
    elif kind == "CNOT":
        c, t = qubits
        r ^= m[:, c] & m[:, n + t] & (m[:, t] ^ m[:, n + c] ^ 1)
        m[:, t] ^= m[:, c]
        m[:, n + c] ^= m[:, n + t]
    elif kind == "CZ":
        c, t = qubits
        r ^= m[:, c] & m[:, t] & (m[:, n + c] ^ m[:, n + t])
        m[:, n + c] ^= m[:, t]
        m[:, n + t] ^= m[:, c]
    else:
        raise ContractError(f"gate kind {kind!r} is not in the Clifford subset")


def tableau_from_circuit(circuit: Circuit) -> CliffordTableau:
    """Tableau of a circuit over {H, S, Sdg, X, Z, CNOT, CZ}."""
    n = circuit.num_qubits
    m = np.eye(2 * n, dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    for gate in circuit.gates:
        _update(m, r, n, gate.name, gate.qubits)
    return CliffordTableau(n, m, r)


def to_circuit(tableau: CliffordTableau) -> Circuit:
    """Canonical staged decomposition over {H, S, CNOT, CZ, X, Z}.

    Deterministic per tableau; the returned circuit implements the tableau's
    unitary up to global phase.
    """
    n = tableau.num_qubits
    m = np.ascontiguousarray(tableau.m.copy())
    r = np.ascontiguousarray(tableau.r.copy())
    ops = np.empty((8 * n * n + 8 * n + 8, 3), dtype=np.int32)
    ng = _kernels._synthesize(m, r, n, ops)
    if ng < 0:
        raise ContractError("tableau is not symplectic")
    circuit = Circuit(n)
    for g in range(ng):
        name = _OP_NAMES[ops[g, 0]]
        if name in ("CNOT", "CZ"):
            circuit.add(name, int(ops[g, 1]), int(ops[g, 2]))
        else:
            circuit.add(name, int(ops[g, 1]))
    return circuit


def dense_unitary(tableau: CliffordTableau) -> np.ndarray:
    """The tableau's unitary with first column phase fixed positive real."""
    n = tableau.num_qubits
    d = 1 << n
    psi0 = np.empty(d, dtype=np.complex128)
    u = np.empty((d, d), dtype=np.complex128)
    _kernels._dense_unitary(tableau.m, tableau.r, n, psi0, u)
    return u


def pullback_basis_state(tableau: CliffordTableau, bits: str) -> Statevector:
    """U^dag |b> for outcome bitstring b, as a normalized stabilizer state."""
    n = tableau.num_qubits
    if len(bits) != n or set(bits) - {"0", "1"}:
        raise ContractError(f"outcome {bits!r} is not a {n}-bit string")
    b = int(bits, 2)
    d = 1 << n
    psi0 = np.empty(d, dtype=np.complex128)
    out = np.empty(d, dtype=np.complex128)
    _kernels._pullback_vector(tableau.m, tableau.r, n, b, psi0, out)
    return Statevector(n, out)
