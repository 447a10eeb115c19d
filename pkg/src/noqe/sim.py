"""Small dense statevector simulator.

Qubit 0 is the leftmost / most significant bit: bitstring b maps to index
sum_q b_q * 2^(N-1-q). Gates are applied by reshaping the amplitude vector to
a rank-N tensor and contracting the gate matrix over the target axes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParseError, ResourceError

MAX_QUBITS = 12

_SQ2 = 1.0 / math.sqrt(2.0)

# parameter-free gate matrices
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}

_ARITY = {
    "H": 1, "X": 1, "Z": 1, "S": 1, "Sdg": 1, "PHASE": 1, "RZ": 1, "RY": 1,
    "U1Q": 1, "CNOT": 2, "CZ": 2, "CRZ": 2, "GIVENS": 2, "U2Q": 2, "CSWAP": 3,
}

_NPARAMS = {
    "PHASE": 1, "RZ": 1, "RY": 1, "CRZ": 1, "GIVENS": 1,
    "U1Q": 8, "U2Q": 32,
}

# names whose dagger is obtained by negating the angle
_NEGATE_PARAM = {"PHASE", "RZ", "RY", "CRZ", "GIVENS"}
_DAGGER_NAME = {"S": "Sdg", "Sdg": "S"}


def gate_names() -> tuple[str, ...]:
    return tuple(_ARITY)


@dataclass(frozen=True)
class Gate:
    """One gate application: a kind name, target qubits, and parameters.

    U1Q/U2Q carry an explicit unitary, flattened row-major as alternating
    re/im floats in ``params``.
    """

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.name not in _ARITY:
            raise ContractError(f"unknown gate kind {self.name!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != _ARITY[self.name]:
            raise ContractError(
                f"{self.name} expects {_ARITY[self.name]} qubits, got {self.qubits}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ContractError(f"{self.name} targets repeat a qubit: {self.qubits}")
        want = _NPARAMS.get(self.name, 0)
        if len(self.params) != want:
            raise ContractError(
                f"{self.name} expects {want} params, got {len(self.params)}"
            )
        if self.name in ("U1Q", "U2Q"):
            m = self.matrix()
            if not np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-10):
                raise ContractError(f"{self.name} matrix is not unitary")

    def matrix(self) -> np.ndarray:
        """Dense matrix on the gate's own qubits, most significant first."""
        name = self.name
        if name in _FIXED:
            return _FIXED[name]
        if name == "PHASE":
            return np.diag([1.0, np.exp(1j * self.params[0])])
        if name == "RZ":
            t = self.params[0] / 2.0
            return np.diag([np.exp(-1j * t), np.exp(1j * t)])
        if name == "RY":
            t = self.params[0] / 2.0
            return np.array(
                [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]],
                dtype=complex,
            )
        if name == "CRZ":
            t = self.params[0] / 2.0
            return np.diag([1.0, 1.0, np.exp(-1j * t), np.exp(1j * t)])
        if name == "GIVENS":
            c, s = math.cos(self.params[0]), math.sin(self.params[0])
            return np.array(
                [[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]],
                dtype=complex,
            )
        if name == "CSWAP":
            m = np.eye(8, dtype=complex)
            # |1ab> -> |1ba>
            m[[5, 6]] = m[[6, 5]]
            return m
        if name in ("U1Q", "U2Q"):
            dim = 2 if name == "U1Q" else 4
            p = np.asarray(self.params)
            return (p[0::2] + 1j * p[1::2]).reshape(dim, dim)
        raise ContractError(f"unknown gate kind {name!r}")

    def dagger(self) -> "Gate":
        if self.name in _DAGGER_NAME:
            return Gate(_DAGGER_NAME[self.name], self.qubits)
        if self.name in _NEGATE_PARAM:
            return Gate(self.name, self.qubits, (-self.params[0],))
        if self.name in ("U1Q", "U2Q"):
            return gate_from_matrix(self.matrix().conj().T, self.qubits)
        return self  # self-inverse

    def to_dict(self) -> dict:
        return {"name": self.name, "qubits": list(self.qubits),
                "params": list(self.params)}


def gate_from_matrix(m: np.ndarray, qubits: tuple[int, ...]) -> Gate:
    """Wrap an explicit 2x2 or 4x4 unitary as a U1Q/U2Q gate."""
    m = np.asarray(m, dtype=complex)
    name = {2: "U1Q", 4: "U2Q"}.get(m.shape[0])
    if name is None or m.shape[0] != m.shape[1]:
        raise ContractError(f"expected 2x2 or 4x4 matrix, got {m.shape}")
    params = []
    for v in m.reshape(-1):
        params.extend((v.real, v.imag))
    return Gate(name, qubits, tuple(params))


@dataclass
class Circuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ContractError("circuit needs at least one qubit")
        for g in self.gates:
            if any(q < 0 or q >= self.num_qubits for q in g.qubits):
                raise ContractError(
                    f"gate {g.name} targets {g.qubits}, outside 0..{self.num_qubits - 1}"
                )

    def add(self, name: str, *qubits: int, params: tuple[float, ...] = ()) -> "Circuit":
        g = Gate(name, tuple(qubits), params)
        if any(q < 0 or q >= self.num_qubits for q in g.qubits):
            raise ContractError(f"gate {name} targets {qubits}, out of range")
        self.gates.append(g)
        return self

    def extended(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise ContractError("cannot concatenate circuits of different widths")
        return Circuit(self.num_qubits, list(self.gates) + list(other.gates))

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, [g.dagger() for g in reversed(self.gates)])

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits,
                "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            n = int(data["num_qubits"])
            raw = data["gates"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad circuit payload: {exc}") from exc
        gates = []
        for k, g in enumerate(raw):
            try:
                gates.append(
                    Gate(str(g["name"]), tuple(g["qubits"]),
                         tuple(g.get("params", ())))
                )
            except (KeyError, TypeError, ValueError, ContractError) as exc:
                raise ParseError(f"bad gate at index {k}: {exc}") from exc
        try:
            return cls(n, gates)
        except ContractError as exc:
            raise ParseError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "Circuit":
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class Statevector:
    num_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        d = 2**self.num_qubits
        self.amps = np.asarray(self.amps, dtype=complex).reshape(d)

    @classmethod
    def zero_state(cls, num_qubits: int) -> "Statevector":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def from_bitstring(cls, bits: str) -> "Statevector":
        if set(bits) - {"0", "1"}:
            raise ContractError(f"bad bitstring {bits!r}")
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def bitstring(self, index: int) -> str:
        return format(index, f"0{self.num_qubits}b")


def _apply_to_tensor(tensor: np.ndarray, gate: Gate) -> np.ndarray:
    """Apply a gate to a tensor whose leading axes are qubit axes."""
    k = len(gate.qubits)
    mat = gate.matrix().reshape((2,) * (2 * k))
    moved = np.tensordot(mat, tensor, axes=(tuple(range(k, 2 * k)), gate.qubits))
    # tensordot puts the contracted output axes first; move them home
    return np.moveaxis(moved, tuple(range(k)), gate.qubits)


def apply_gate(amps: np.ndarray, gate: Gate, num_qubits: int) -> np.ndarray:
    """Apply one gate to a flat amplitude array, returning a new array."""
    out = _apply_to_tensor(amps.reshape((2,) * num_qubits), gate)
    return np.ascontiguousarray(out).reshape(-1)


def run_circuit(circuit: Circuit, initial: Statevector | None = None) -> Statevector:
    """Run a circuit on |0...0> or a caller-supplied state."""
    if circuit.num_qubits > MAX_QUBITS:
        raise ResourceError(
            f"statevector limited to {MAX_QUBITS} qubits, got {circuit.num_qubits}"
        )
    if initial is None:
        state = Statevector.zero_state(circuit.num_qubits)
    else:
        if initial.num_qubits != circuit.num_qubits:
            raise ContractError("initial state width does not match circuit")
        state = Statevector(initial.num_qubits, initial.amps.copy())
    amps = state.amps
    for g in circuit.gates:
        amps = apply_gate(amps, g, circuit.num_qubits)
    out = Statevector(circuit.num_qubits, amps)
    drift = abs(out.norm() - 1.0)
    if drift > 1e-10:
        raise ContractError(f"norm drifted by {drift:.2e} during simulation")
    return out


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of the whole circuit (small widths only)."""
    if circuit.num_qubits > MAX_QUBITS:
        raise ResourceError(
            f"dense unitary limited to {MAX_QUBITS} qubits, got {circuit.num_qubits}"
        )
    d = 2**circuit.num_qubits
    # evolve all columns of the identity at once; the trailing axis is the
    # column index and is untouched by the contraction
    u = np.eye(d, dtype=complex).reshape((2,) * circuit.num_qubits + (d,))
    for g in circuit.gates:
        u = _apply_to_tensor(u, g)
    return np.ascontiguousarray(u).reshape(d, d)


def inner_product(a: Statevector, b: Statevector) -> complex:
    """<a|b>."""
    if a.num_qubits != b.num_qubits:
        raise ContractError("states live on different qubit counts")
    return complex(np.vdot(a.amps, b.amps))


def sample_bitstrings(state: Statevector, shots: int, seed: int) -> dict[str, int]:
    """Sample measurement outcomes; returns {bitstring: count}."""
    if shots < 1:
        raise ContractError("shots must be >= 1")
    p = state.probabilities()
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p)
    return {
        state.bitstring(i): int(c) for i, c in enumerate(counts) if c > 0
    }
