"""Density-matrix evolution with calibrated per-gate noise channels.

Channel placement follows the hardware-style model: after every gate, each
enabled channel acts on the gate's support at rate lambda*p1 (one-qubit gates)
or lambda*p2 (two-qubit gates; depolarizing acts on the pair jointly, the
damping channels on each constituent qubit). Channel order is fixed:
depolarizing, then amplitude damping, then phase damping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ContractError, ParseError, ResourceError
from .sim import Circuit, Gate, Statevector

MAX_DM_QUBITS = 10

CHANNEL_KINDS = ("depolarizing", "amplitude_damping", "phase_damping")


@dataclass(frozen=True)
class NoiseModel:
    """Gate-level noise: base rates, a global strength scale, enabled channels."""

    p1: float = 3e-5
    p2: float = 1.5e-3
    lam: float = 1.0
    channels: tuple[str, ...] = CHANNEL_KINDS

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        for ch in self.channels:
            if ch not in CHANNEL_KINDS:
                raise ContractError(f"unknown channel kind {ch!r}")
        if self.lam < 0:
            raise ContractError("noise scale must be >= 0")
        for rate in (self.rate1, self.rate2):
            if not 0.0 <= rate <= 1.0:
                raise ContractError(f"effective rate {rate} outside [0, 1]")

    @property
    def rate1(self) -> float:
        return self.lam * self.p1

    @property
    def rate2(self) -> float:
        return self.lam * self.p2

    def scaled(self, lam: float) -> "NoiseModel":
        return NoiseModel(self.p1, self.p2, lam, self.channels)

    def is_trivial(self) -> bool:
        return self.lam == 0.0 or not self.channels

    def rate_triples(self) -> tuple[np.ndarray, np.ndarray]:
        """(dep, amp, phase) rates for 1q and 2q gates; zeros disable."""
        r1 = np.zeros(3)
        r2 = np.zeros(3)
        for k, ch in enumerate(CHANNEL_KINDS):
            if ch in self.channels:
                r1[k] = self.rate1
                r2[k] = self.rate2
        return r1, r2

    def to_dict(self) -> dict:
        return {
            "p1": self.p1,
            "p2": self.p2,
            "lambda": self.lam,
            "channels": list(self.channels),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        try:
            return cls(
                p1=float(data.get("p1", 3e-5)),
                p2=float(data.get("p2", 1.5e-3)),
                lam=float(data.get("lambda", 1.0)),
                channels=tuple(data.get("channels", CHANNEL_KINDS)),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad noise config: {exc}") from exc
        except ContractError as exc:
            raise ParseError(f"bad noise config: {exc}") from exc


@dataclass
class DensityMatrix:
    num_qubits: int
    mat: np.ndarray

    def __post_init__(self):
        d = 2**self.num_qubits
        self.mat = np.asarray(self.mat, dtype=complex).reshape(d, d)

    @classmethod
    def zero_state(cls, num_qubits: int) -> "DensityMatrix":
        d = 2**num_qubits
        m = np.zeros((d, d), dtype=complex)
        m[0, 0] = 1.0
        return cls(num_qubits, m)

    @classmethod
    def from_statevector(cls, state: Statevector) -> "DensityMatrix":
        return cls(state.num_qubits, np.outer(state.amps, state.amps.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))

    def fidelity_with(self, state: Statevector) -> float:
        """<psi| rho |psi> for a pure comparison state."""
        return float(np.real(np.vdot(state.amps, self.mat @ state.amps)))

    def validate(self) -> None:
        if np.max(np.abs(self.mat - self.mat.conj().T)) > 1e-10:
            raise ContractError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > 1e-10:
            raise ContractError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(self.mat).min() < -1e-8:
            raise ContractError("density matrix has a significantly negative eigenvalue")


def _conjugate_tensor(t: np.ndarray, mat: np.ndarray, qubits, num_qubits: int):
    """rho -> U rho U^dag on a (2,)*2N tensor, row axes q, col axes N+q."""
    k = len(qubits)
    m = mat.reshape((2,) * (2 * k))
    rows = tuple(qubits)
    t = np.moveaxis(
        np.tensordot(m, t, axes=(tuple(range(k, 2 * k)), rows)),
        tuple(range(k)),
        rows,
    )
    cols = tuple(num_qubits + q for q in qubits)
    t = np.moveaxis(
        np.tensordot(m.conj(), t, axes=(tuple(range(k, 2 * k)), cols)),
        tuple(range(k)),
        cols,
    )
    return t


def _depolarize(t: np.ndarray, qubits, rate: float, num_qubits: int) -> np.ndarray:
    k = len(qubits)
    axes = tuple(qubits) + tuple(num_qubits + q for q in qubits)
    t2 = np.moveaxis(t, axes, tuple(range(2 * k)))
    dim = 2**k
    shape = t2.shape
    flat = t2.reshape(dim, dim, -1)
    marginal = np.einsum("aab->b", flat)
    out = (1.0 - rate) * flat
    idx = np.arange(dim)
    out[idx, idx, :] += (rate / dim) * marginal[None, :]
    return np.moveaxis(out.reshape(shape), tuple(range(2 * k)), axes)


def _damp(t: np.ndarray, qubit: int, rate: float, num_qubits: int, kind: str):
    axes = (qubit, num_qubits + qubit)
    t2 = np.moveaxis(t, axes, (0, 1)).copy()
    keep = np.sqrt(1.0 - rate)
    if kind == "amplitude_damping":
        t2[0, 0] = t2[0, 0] + rate * t2[1, 1]
        t2[1, 1] = (1.0 - rate) * t2[1, 1]
    t2[0, 1] = keep * t2[0, 1]
    t2[1, 0] = keep * t2[1, 0]
    return np.moveaxis(t2, (0, 1), axes)


def apply_channel(rho: DensityMatrix, kind: str, qubits, rate: float) -> DensityMatrix:
    """One noise channel on the given qubits; returns a new density matrix."""
    if kind not in CHANNEL_KINDS:
        raise ContractError(f"unknown channel kind {kind!r}")
    if not 0.0 <= rate <= 1.0:
        raise ContractError(f"rate {rate} outside [0, 1]")
    qubits = tuple(int(q) for q in qubits)
    n = rho.num_qubits
    if any(q < 0 or q >= n for q in qubits):
        raise ContractError(f"channel qubits {qubits} out of range")
    t = rho.mat.reshape((2,) * (2 * n))
    if kind == "depolarizing":
        t = _depolarize(t, qubits, rate, n)
    else:
        for q in qubits:
            t = _damp(t, q, rate, n, kind)
    return DensityMatrix(n, t.reshape(2**n, 2**n))


def _gate_noise(t: np.ndarray, model: NoiseModel, qubits, num_qubits: int):
    rate = model.rate1 if len(qubits) == 1 else model.rate2
    if rate == 0.0:
        return t
    if "depolarizing" in model.channels:
        t = _depolarize(t, qubits, rate, num_qubits)
    for kind in ("amplitude_damping", "phase_damping"):
        if kind in model.channels:
            for q in qubits:
                t = _damp(t, q, rate, num_qubits, kind)
    return t


def noisy_run(
    circuit: Circuit,
    model: NoiseModel,
    initial: DensityMatrix | None = None,
) -> DensityMatrix:
    """Evolve a density matrix through the circuit with per-gate channels."""
    n = circuit.num_qubits
    if n > MAX_DM_QUBITS:
        raise ResourceError(
            f"density matrix limited to {MAX_DM_QUBITS} qubits, got {n}"
        )
    if initial is None:
        rho = DensityMatrix.zero_state(n)
    elif initial.num_qubits != n:
        raise ContractError("initial density matrix width does not match circuit")
    else:
        rho = DensityMatrix(n, initial.mat.copy())
    t = rho.mat.reshape((2,) * (2 * n))
    for g in circuit.gates:
        if len(g.qubits) > 2:
            raise ContractError(
                f"{g.name} has no native noise dose; compile to 1q/2q gates first"
            )
        t = _conjugate_tensor(t, g.matrix(), g.qubits, n)
        if not model.is_trivial():
            t = _gate_noise(t, model, g.qubits, n)
    return DensityMatrix(n, t.reshape(2**n, 2**n))


def gate_arrays(circuit: Circuit):
    """Flatten a 1q/2q circuit into arrays for the compiled evolution kernel."""
    ng = len(circuit.gates)
    arity = np.empty(ng, dtype=np.int64)
    qa = np.zeros(ng, dtype=np.int64)
    qb = np.zeros(ng, dtype=np.int64)
    mats = np.zeros((ng, 4, 4), dtype=np.complex128)
    for i, g in enumerate(circuit.gates):
        k = len(g.qubits)
        if k > 2:
            raise ContractError(
                f"{g.name} has no native noise dose; compile to 1q/2q gates first"
            )
        arity[i] = k
        qa[i] = g.qubits[0]
        if k == 2:
            qb[i] = g.qubits[1]
        mats[i, : 2**k, : 2**k] = g.matrix()
    return arity, qa, qb, mats


def noisy_run_fast(
    circuit: Circuit,
    model: NoiseModel,
    initial: DensityMatrix | None = None,
) -> DensityMatrix:
    """Same contract as noisy_run, on the compiled kernel (larger widths)."""
    n = circuit.num_qubits
    if n > MAX_DM_QUBITS:
        raise ResourceError(
            f"density matrix limited to {MAX_DM_QUBITS} qubits, got {n}"
        )
    if initial is None:
        rho = DensityMatrix.zero_state(n)
    elif initial.num_qubits != n:
        raise ContractError("initial density matrix width does not match circuit")
    else:
        rho = DensityMatrix(n, initial.mat.copy())
    arity, qa, qb, mats = gate_arrays(circuit)
    r1, r2 = model.rate_triples()
    buf = np.ascontiguousarray(rho.mat)
    _kernels._evolve_dm(buf, arity, qa, qb, mats, r1, r2, n)
    return DensityMatrix(n, buf)


def sample_from_density(rho: DensityMatrix, shots: int, seed: int) -> dict[str, int]:
    """Computational-basis sampling from the diagonal; {bitstring: count}."""
    if shots < 1:
        raise ContractError("shots must be >= 1")
    p = np.real(np.diag(rho.mat)).copy()
    p[p < 0] = 0.0
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p)
    n = rho.num_qubits
    return {
        format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c > 0
    }


_PAULI_2x2 = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)


def pauli_vector(mat: np.ndarray, num_qubits: int) -> np.ndarray:
    """Coefficients v_j = Tr(P_j rho) over all Pauli strings, qubit 0 first.

    The result indexes Pauli strings base-4 (I,X,Y,Z) with qubit 0 in the
    most significant digit; it is real for Hermitian input.
    """
    n = num_qubits
    cur = mat.reshape((2,) * (2 * n))
    # contract row/column axis pairs from the last qubit so the new Pauli
    # axes stack up in qubit order at the front
    for q in range(n - 1, -1, -1):
        lead = n - 1 - q  # Pauli axes already produced
        cur = np.tensordot(
            _PAULI_2x2, cur, axes=((2, 1), (lead + q, lead + 2 * q + 1))
        )
    flat = cur.reshape(4**n)
    if np.max(np.abs(flat.imag)) > 1e-9:
        raise ContractError("density matrix is not Hermitian")
    return np.ascontiguousarray(flat.real)
