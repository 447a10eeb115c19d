"""Reference-state circuits, interference-test estimation, matrix assembly,
and the generalized eigenvalue solve.

Two measurement routes produce the same (H, S) matrix pair: the shadow route
acquires three randomized-measurement datasets per reference state and
reconstructs every element in postprocessing, while the baseline route runs a
controlled-swap interference circuit per pair of references and reads the
elements off an ancilla. ``solve_gevp`` turns either result into energies.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import estimators, seeding, shadows
from .errors import (
    ContractError,
    DegenerateSubspaceError,
    EstimateError,
    ParseError,
    UnreliableDivisionError,
)
from .noise import NoiseModel, noisy_run_fast
from .pauli import PauliSum
from .sim import Circuit, Gate, run_circuit

S_MIN_DEFAULT = 1e-4
_CERT_TOL = 1e-10

# two-qubit native-gate cost of each multi-qubit gate kind (a CSWAP compiles
# to 7 two-qubit natives, a Givens rotation to 2, a controlled-RZ to 1; an
# arbitrary two-qubit unitary needs at most 3)
_TWO_QUBIT_COST = {"CNOT": 1, "CZ": 1, "CRZ": 1, "GIVENS": 2, "U2Q": 3, "CSWAP": 7}


# ---------------------------------------------------------------------------
# reference specifications


def _hamming_leak(state: np.ndarray, num_qubits: int, weight: int) -> float:
    """Probability weight outside the given Hamming-weight sector."""
    idx = np.arange(state.shape[0])
    pop = np.array([bin(i).count("1") for i in idx])
    return float(np.sum(np.abs(state[pop != weight]) ** 2))


@dataclass(frozen=True)
class ReferenceSpec:
    """One reference state: an ansatz circuit applied to an occupation string.

    The ansatz is certified at construction: it must leave the vacuum
    invariant (up to phase) and preserve the Hamming weight of the occupation
    string, i.e. be particle-conserving on the states we use it on.
    """

    label: str
    num_qubits: int
    ansatz: Circuit
    hf_occupation: str = ""

    def __post_init__(self):
        n = self.num_qubits
        if n < 2 or n % 2 != 0:
            raise ContractError(f"num_qubits must be even and >= 2, got {n}")
        if self.ansatz.num_qubits != n:
            raise ContractError(
                f"ansatz acts on {self.ansatz.num_qubits} qubits, spec has {n}"
            )
        if not self.hf_occupation:
            object.__setattr__(
                self, "hf_occupation", "1" * (n // 2) + "0" * (n // 2)
            )
        occ = self.hf_occupation
        if len(occ) != n or set(occ) - {"0", "1"}:
            raise ContractError(f"bad occupation string {occ!r} for {n} qubits")
        vac = run_circuit(self.ansatz).amps
        if abs(abs(vac[0]) - 1.0) > _CERT_TOL:
            raise ContractError(
                f"ansatz for {self.label!r} does not preserve the vacuum "
                f"(|<0|U|0>| = {abs(vac[0]):.12f})"
            )
        out = run_circuit(build_reference_circuit(self)).amps
        leak = _hamming_leak(out, n, occ.count("1"))
        if leak > _CERT_TOL:
            raise ContractError(
                f"ansatz for {self.label!r} leaks {leak:.3e} probability out "
                "of the occupation Hamming sector"
            )

    @property
    def occupied(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.hf_occupation) if c == "1")


# ---------------------------------------------------------------------------
# circuit builders


def ansatz_circuit(
    num_qubits: int,
    subroutines,
    rotation_givens=(),
) -> Circuit:
    """Assemble a correlator circuit from an angle list.

    Each subroutine applies a chain of Givens rotations on neighboring pairs
    (num_qubits - 1 angles) followed by a controlled-RZ phase on every qubit
    pair (num_qubits * (num_qubits - 1) / 2 angles); for 4 qubits that is
    3 + 6 = 9 angles per subroutine. ``rotation_givens`` appends extra
    neighboring Givens rotations, given as (pair, angle) entries where pair q
    means qubits (q, q+1); these absorb an orbital rotation between reference
    bases, which generally couples non-neighboring modes and therefore needs
    a swap-conjugated sequence rather than a single ascending chain.
    """
    n = int(num_qubits)
    if n < 2:
        raise ContractError("ansatz needs at least 2 qubits")
    pairs = [(p, q) for p in range(n) for q in range(p + 1, n)]
    want = (n - 1) + len(pairs)
    circ = Circuit(n)
    for k, angles in enumerate(subroutines):
        angles = [float(a) for a in angles]
        if len(angles) != want:
            raise ContractError(
                f"subroutine {k} has {len(angles)} angles, expected {want}"
            )
        for q in range(n - 1):
            circ.add("GIVENS", q, q + 1, params=(angles[q],))
        for (p, q), a in zip(pairs, angles[n - 1:]):
            circ.add("CRZ", p, q, params=(a,))
    for entry in rotation_givens:
        q, a = entry
        q = int(q)
        if not 0 <= q < n - 1:
            raise ContractError(f"rotation pair ({q}, {q + 1}) out of range")
        circ.add("GIVENS", q, q + 1, params=(float(a),))
    return circ


def build_reference_circuit(spec: ReferenceSpec) -> Circuit:
    """X gates realizing the occupation string, then the ansatz."""
    circ = Circuit(spec.num_qubits)
    for q, c in enumerate(spec.hf_occupation):
        if c == "1":
            circ.add("X", q)
    return circ.extended(spec.ansatz)


def build_auxiliary_circuit(spec: ReferenceSpec, kind: str) -> Circuit:
    """Circuit preparing (|0...0> + |psi>)/sqrt(2), or with i|psi> for kind I.

    A GHZ ladder over the occupied qubits creates the superposition of the
    vacuum with the occupation string; the ansatz then dresses the occupied
    branch while leaving the vacuum branch alone.
    """
    if kind not in ("R", "I"):
        raise ContractError(f"kind must be 'R' or 'I', got {kind!r}")
    occ = spec.occupied
    if not occ:
        raise ContractError(
            f"reference {spec.label!r} occupies no qubits; the auxiliary "
            "superposition with the vacuum is degenerate"
        )
    circ = Circuit(spec.num_qubits)
    circ.add("H", occ[0])
    for a, b in zip(occ, occ[1:]):
        circ.add("CNOT", a, b)
    if kind == "I":
        circ.add("S", occ[0])
    return circ.extended(spec.ansatz)


def _offset_gates(circ: Circuit, offset: int):
    for g in circ.gates:
        yield Gate(g.name, tuple(q + offset for q in g.qubits), g.params)


def build_hadamard_circuit(
    spec_i: ReferenceSpec,
    spec_j: ReferenceSpec,
    theta: float,
    simplified: bool = True,
) -> Circuit:
    """Interference circuit on 2N + 1 qubits for one pair of references.

    Register A is qubits 0..N-1, register B is N..2N-1, the control is the
    last qubit. The first stage entangles the control with which register
    holds the occupation string; by default it uses the cheap form (X gates
    plus one CNOT per occupied qubit) that is exact whenever both references
    start from product occupation strings. ``simplified=False`` keeps the
    textbook controlled-swap network instead and requires matching
    occupations. After the per-register ansatzes and the second
    controlled-swap network, a final H on the control puts the state in the
    form (|psi_i>|+> + e^{i theta} |psi_j>|->)/sqrt(2), so measuring any
    observable P on register A together with Z on the control estimates
    Re(e^{i theta} <psi_i|P|psi_j>).
    """
    n = spec_i.num_qubits
    if spec_j.num_qubits != n:
        raise ContractError(
            f"register mismatch: {spec_i.label!r} has {n} qubits, "
            f"{spec_j.label!r} has {spec_j.num_qubits}"
        )
    ctrl = 2 * n
    circ = Circuit(2 * n + 1)
    for q in spec_i.occupied:
        circ.add("X", q)
    circ.add("H", ctrl)
    if float(theta) != 0.0:
        circ.add("PHASE", ctrl, params=(float(theta),))
    if simplified:
        for q in spec_i.occupied:
            circ.add("CNOT", ctrl, q)
        for q in spec_j.occupied:
            circ.add("CNOT", ctrl, q + n)
    else:
        if spec_i.hf_occupation != spec_j.hf_occupation:
            raise ContractError(
                "the unsimplified first stage requires matching occupation "
                "strings"
            )
        for q in range(n):
            circ.add("CSWAP", ctrl, q, q + n)
    circ.gates.extend(spec_i.ansatz.gates)
    circ.gates.extend(_offset_gates(spec_j.ansatz, n))
    for q in range(n):
        circ.add("CSWAP", ctrl, q, q + n)
    circ.add("H", ctrl)
    return circ


def _toffoli_gates(c: int, a: int, b: int) -> list[Gate]:
    t = math.pi / 4.0
    return [
        Gate("H", (b,)),
        Gate("CNOT", (a, b)),
        Gate("PHASE", (b,), (-t,)),
        Gate("CNOT", (c, b)),
        Gate("PHASE", (b,), (t,)),
        Gate("CNOT", (a, b)),
        Gate("PHASE", (b,), (-t,)),
        Gate("CNOT", (c, b)),
        Gate("PHASE", (b,), (t,)),
        Gate("PHASE", (a,), (t,)),
        Gate("H", (b,)),
        Gate("CNOT", (c, a)),
        Gate("PHASE", (c,), (t,)),
        Gate("PHASE", (a,), (-t,)),
        Gate("CNOT", (c, a)),
    ]


def compile_cswaps(circ: Circuit) -> Circuit:
    """Rewrite CSWAP gates into 1q/2q gates so noisy evolution accepts them."""
    out = Circuit(circ.num_qubits)
    for g in circ.gates:
        if g.name != "CSWAP":
            out.gates.append(g)
            continue
        c, a, b = g.qubits
        out.gates.append(Gate("CNOT", (b, a)))
        out.gates.extend(_toffoli_gates(c, a, b))
        out.gates.append(Gate("CNOT", (b, a)))
    return out


@dataclass(frozen=True)
class ResourceReport:
    """Gate census of a circuit with two-qubit-native conversion applied."""

    counts: dict
    two_qubit: int
    single_qubit: int


def resource_report(circ: Circuit) -> ResourceReport:
    """Count gates and convert multi-qubit kinds to two-qubit natives.

    The conversion rule is fixed (CSWAP -> 7, GIVENS -> 2, CRZ -> 1,
    CNOT/CZ -> 1); single-qubit gates are counted as written, without
    re-compilation.
    """
    counts: dict[str, int] = {}
    for g in circ.gates:
        counts[g.name] = counts.get(g.name, 0) + 1
    two = sum(_TWO_QUBIT_COST.get(name, 0) * c for name, c in counts.items())
    one = sum(c for name, c in counts.items() if name not in _TWO_QUBIT_COST)
    return ResourceReport(counts, two, one)


# ---------------------------------------------------------------------------
# interference-test estimation


@dataclass(frozen=True)
class ElementEstimate:
    """One (S_ij, H_ij) pair with standard errors and the settings count."""

    s: complex
    s_se: float
    h: complex
    h_se: float
    settings: int
    diagonal: bool
    grouped: bool


def _identity_word(n: int) -> str:
    return "I" * n


def _state_matches(amps: np.ndarray, support: list[str], equal=()) -> bool:
    """True if amps live on the given bitstrings with (globally) real phases.

    ``equal`` lists groups of bitstrings whose amplitudes must coincide;
    grouping tables use it to encode the symmetry assumptions their factor
    relations were derived under.
    """
    keep = np.zeros(amps.shape[0], dtype=bool)
    for b in support:
        keep[int(b, 2)] = True
    if float(np.sum(np.abs(amps[~keep]) ** 2)) > 1e-8:
        return False
    lead = amps[keep][np.argmax(np.abs(amps[keep]))]
    gauge = amps * np.exp(-1j * np.angle(lead))
    if np.max(np.abs(gauge[keep].imag)) >= 1e-6:
        return False
    for grp in equal:
        vals = [gauge[int(b, 2)] for b in grp]
        if np.max(np.abs(np.diff(vals))) >= 1e-6:
            return False
    return True


def _parse_groups(table, num_qubits: int):
    """[(rep, {member: complex factor})] from the JSON-shaped group list."""
    out = []
    for entry in table:
        rep = entry["representative"]
        members = {
            w: complex(f[0], f[1]) for w, f in entry["members"].items()
        }
        if rep not in members:
            raise ParseError(f"group representative {rep!r} missing from members")
        out.append((rep, members))
    return out


class HadamardRunner:
    """Prepares and caches the measurement distributions for one element.

    A runner owns every measurement setting needed for (S_ij, H_ij): for each
    setting it builds the rotated circuit, evolves it once (statevector, or
    density matrix under noise), and keeps only the outcome distribution.
    Repeated ``estimate`` calls with different seeds or shot counts then just
    resample, which is what the noise sweeps and extrapolation loops need.
    """

    def __init__(
        self,
        spec_i: ReferenceSpec,
        spec_j: ReferenceSpec,
        ham: PauliSum,
        noise: NoiseModel | None = None,
        groups=None,
        scale: float = 1.0,
        fold=None,
    ):
        n = spec_i.num_qubits
        if ham.num_qubits != n:
            raise ContractError(
                f"hamiltonian acts on {ham.num_qubits} qubits, specs on {n}"
            )
        self.num_qubits = n
        self.noise = noise
        self.diagonal = spec_i is spec_j or spec_i == spec_j
        self.grouped = False
        self._fold = fold
        self._scale = float(scale)
        self._dists: dict = {}
        iden = _identity_word(n)
        terms = dict(ham.terms)
        self._det = 0.0 + 0.0j

        if self.diagonal:
            base = build_reference_circuit(spec_i)
            self._bases = {0: base}
            amps = run_circuit(base).amps
            table = (groups or {}).get("diag")
            if table is not None and _state_matches(amps, table["support"]):
                self.grouped = True
                self._det = sum(
                    complex(terms[w]) * float(v)
                    for w, v in table["deterministic"].items()
                    if w in terms
                )
                covered = set(table["deterministic"]) | set(table["zero"])
                parsed = _parse_groups(table["groups"], n)
                for rep, members in parsed:
                    covered |= set(members)
                if set(terms) - covered:
                    self.grouped = False
            if self.grouped:
                self._settings = [
                    (rep, {w: f for w, f in members.items() if w in terms})
                    for rep, members in parsed
                ]
            else:
                if iden in terms:
                    self._det = complex(terms[iden])
                self._settings = [
                    (w, {w: 1.0 + 0.0j}) for w in terms if w != iden
                ]
        else:
            self._bases = {
                0: build_hadamard_circuit(spec_i, spec_j, 0.0),
                1: build_hadamard_circuit(spec_i, spec_j, math.pi / 2.0),
            }
            table = (groups or {}).get("offdiag")
            if table is not None:
                psi_i = run_circuit(build_reference_circuit(spec_i)).amps
                psi_j = run_circuit(build_reference_circuit(spec_j)).amps
                if _state_matches(
                    psi_i, table["support_i"], table.get("equal_i", ())
                ) and _state_matches(
                    psi_j, table["support_j"], table.get("equal_j", ())
                ):
                    parsed = _parse_groups(table["groups"], n)
                    covered = set()
                    for rep, members in parsed:
                        covered |= set(members)
                    reps = {rep for rep, _ in parsed}
                    if iden in reps and not (set(terms) - covered):
                        self.grouped = True
                        self._settings = [
                            (
                                rep,
                                {
                                    w: f
                                    for w, f in members.items()
                                    if w in terms or w == iden
                                },
                            )
                            for rep, members in parsed
                        ]
            if not self.grouped:
                words = [iden] + [w for w in terms if w != iden]
                self._settings = [(w, {w: 1.0 + 0.0j}) for w in words]
        self._terms = terms

    @property
    def settings(self) -> int:
        return len(self._settings)

    def _rotated(self, theta_key: int, rep: str) -> tuple[np.ndarray, np.ndarray]:
        """(outcome distribution, per-outcome parity) for one setting."""
        key = (theta_key, rep)
        if key in self._dists:
            return self._dists[key]
        base = self._bases[theta_key]
        circ = Circuit(base.num_qubits, list(base.gates))
        support = [q for q, letter in enumerate(rep) if letter != "I"]
        for q in support:
            letter = rep[q]
            if letter == "Y":
                circ.add("Sdg", q)
            if letter in ("X", "Y"):
                circ.add("H", q)
        if not self.diagonal:
            support = support + [2 * self.num_qubits]
        if self._fold is not None and self._scale != 1.0:
            circ = self._fold(circ, self._scale)
        if self.noise is None or self.noise.is_trivial():
            probs = np.abs(run_circuit(circ).amps) ** 2
        else:
            rho = noisy_run_fast(compile_cswaps(circ), self.noise)
            probs = np.clip(np.real(np.diag(rho.mat)), 0.0, None)
        probs = probs / probs.sum()
        idx = np.arange(probs.shape[0])
        parity = np.ones(probs.shape[0])
        width = circ.num_qubits
        for q in support:
            parity *= 1.0 - 2.0 * ((idx >> (width - 1 - q)) & 1)
        self._dists[key] = (probs, parity)
        return self._dists[key]

    def _measure(self, theta_key, rep, shots, rng):
        probs, parity = self._rotated(theta_key, rep)
        if shots is None:
            return float(np.dot(probs, parity)), 0.0
        counts = rng.multinomial(shots, probs)
        est = float(np.dot(counts, parity) / shots)
        var = max(1.0 - est * est, 0.0) / shots
        return est, math.sqrt(var)

    def _assemble(self, measured):
        """Combine per-setting complex values into (S, H) with errors."""
        iden = _identity_word(self.num_qubits)
        s_val, s_var = 1.0 + 0.0j, 0.0
        h_val, h_var = self._det, 0.0
        for (rep, members), (value, var0, var1) in zip(self._settings, measured):
            for w, f in members.items():
                contrib = complex(f) * value
                if w == iden and not self.diagonal:
                    s_val = contrib
                    s_var = abs(f) ** 2 * (var0 + var1)
                if w in self._terms:
                    c = complex(self._terms[w]) * complex(f)
                    h_val += c * value
                    h_var += abs(c) ** 2 * (var0 + var1)
        return ElementEstimate(
            complex(s_val),
            math.sqrt(s_var),
            complex(h_val),
            math.sqrt(h_var),
            self.settings,
            self.diagonal,
            self.grouped,
        )

    def estimate(self, shots: int, seed: int = 0) -> ElementEstimate:
        """Finite-shot estimate; shots are split uniformly across runs."""
        runs = self.settings * (1 if self.diagonal else 2)
        if shots < runs:
            raise ContractError(
                f"{shots} shots cannot cover {runs} measurement runs"
            )
        per = shots // runs
        measured = []
        for k, (rep, _members) in enumerate(self._settings):
            rng = np.random.default_rng(seeding.derive(seed, 41, k))
            if self.diagonal:
                z0, se0 = self._measure(0, rep, per, rng)
                measured.append((complex(z0), se0 * se0, 0.0))
            else:
                z0, se0 = self._measure(0, rep, per, rng)
                zp, sep = self._measure(1, rep, per, rng)
                measured.append((complex(z0, -zp), se0 * se0, sep * sep))
        return self._assemble(measured)

    def exact_elements(self) -> ElementEstimate:
        """Infinite-shot limit: exact expectations of every setting."""
        measured = []
        for rep, _members in self._settings:
            z0, _ = self._measure(0, rep, None, None)
            if self.diagonal:
                measured.append((complex(z0), 0.0, 0.0))
            else:
                zp, _ = self._measure(1, rep, None, None)
                measured.append((complex(z0, -zp), 0.0, 0.0))
        return self._assemble(measured)


def hadamard_estimate_elements(
    spec_i: ReferenceSpec,
    spec_j: ReferenceSpec,
    ham: PauliSum,
    shots: int,
    noise: NoiseModel | None = None,
    seed: int = 0,
    groups=None,
    exact: bool = False,
) -> ElementEstimate:
    """(S_ij, H_ij) from interference circuits.

    Off-diagonal elements measure <P (x) Z_ctrl> at control phases 0 and
    pi/2; the pi/2 run returns Re(i x) = -Im x, so the complex value is
    z_0 - i z_{pi/2}. Diagonal elements skip the ancilla entirely and measure
    the reference state directly. A grouping table (see the bundled
    molecular data) collapses equivalent Pauli terms onto one representative
    per group; without one, every term is its own setting.
    """
    runner = HadamardRunner(spec_i, spec_j, ham, noise, groups)
    if exact:
        return runner.exact_elements()
    return runner.estimate(shots, seed)


# ---------------------------------------------------------------------------
# matrix assembly


@dataclass
class MatrixElementEstimates:
    """Estimated (H, S) matrices with errors and per-element diagnostics."""

    labels: tuple
    s: np.ndarray
    h: np.ndarray
    s_se: np.ndarray
    h_se: np.ndarray
    flags: list = field(default_factory=list)
    method: str = "shadow"
    metadata: dict = field(default_factory=dict)


def _hermitized(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.conj().T)


def exact_matrices(specs, ham: PauliSum) -> MatrixElementEstimates:
    """Statevector-oracle matrices (no sampling); errors are zero."""
    m = len(specs)
    states = [run_circuit(build_reference_circuit(sp)).amps for sp in specs]
    hmat = ham.materialize()
    s = np.eye(m, dtype=complex)
    h = np.zeros((m, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            if i != j:
                s[i, j] = np.vdot(states[i], states[j])
            h[i, j] = np.vdot(states[i], hmat @ states[j])
    return MatrixElementEstimates(
        tuple(sp.label for sp in specs),
        s,
        _hermitized(h),
        np.zeros((m, m)),
        np.zeros((m, m)),
        [],
        "exact",
        {},
    )


def _slice_dataset(ds: shadows.ShadowDataset, a: int, b: int):
    return shadows.ShadowDataset(
        ds.state_label, ds.num_qubits, ds.tab_words[a:b], ds.srt[a:b], ds.metadata
    )


def _shadow_elements(moments, ham_mat, m, distill):
    """All matrix elements from per-dataset moments.

    moments is a dict label -> (mo, mo_r, mo_i). Returns (s, h, flags);
    elements whose overlap falls below the safe-division floor come back as
    NaN with a flag entry instead of raising.
    """
    labels = list(moments)
    nref = len(labels)
    ests = {}
    for li, (mo, mo_r, mo_i) in moments.items():
        trio = []
        for mom in (mo, mo_r, mo_i):
            mat = mom.ustat(m)
            est = estimators.ShadowEstimate(
                mat, m, mom.n, complex(np.trace(mat))
            )
            trio.append(estimators.distill(est) if distill else est)
        ests[li] = trio
    s = np.eye(nref, dtype=complex)
    h = np.zeros((nref, nref), dtype=complex)
    flags = []
    for i, li in enumerate(labels):
        h[i, i] = np.trace(ham_mat @ ests[li][0].matrix)
        for j in range(i + 1, nref):
            lj = labels[j]
            ov = estimators.overlap_from_estimates(
                ests[li][0], ests[li][1], ests[li][2], ests[lj][0], ests[lj][1]
            )
            s[i, j] = ov.value
            s[j, i] = np.conj(ov.value)
            try:
                el = estimators.element_from_estimates(
                    ests[li][0], ests[lj][0], ham_mat, ov.value
                )
            except UnreliableDivisionError as exc:
                flags.append(
                    {
                        "i": i,
                        "j": j,
                        "flag": "unreliable_division",
                        "overlap": [ov.value.real, ov.value.imag],
                        "numerator": [exc.numerator.real, exc.numerator.imag],
                    }
                )
                el = complex(np.nan, np.nan)
            h[i, j] = el
            h[j, i] = np.conj(el)
    return s, _hermitized(h), flags


def assemble_matrices(
    specs,
    ham: PauliSum,
    method: str = "shadow",
    budget: int = 10000,
    noise: NoiseModel | None = None,
    m: int = 3,
    distill: bool = False,
    seed: int = 0,
    groups=None,
    exact: bool = False,
    se_blocks: int = 40,
    datasets=None,
) -> MatrixElementEstimates:
    """Estimate the full (H, S) matrix pair over a list of reference specs.

    The shadow route acquires three datasets per reference (the state and its
    two auxiliary superpositions) of ``budget`` snapshots each and
    reconstructs every element in postprocessing. The interference route runs
    per-pair circuits, spending ``budget`` shots per matrix element. Shadow
    standard errors come from disjoint-block scatter (``se_blocks`` blocks),
    which costs one extra pass; set ``se_blocks=0`` to skip them.

    ``datasets`` (shadow route only) supplies previously recorded snapshots
    as a mapping label -> (state, re, im) dataset trio, skipping acquisition;
    the effective budget becomes the shortest dataset length.
    """
    if not specs:
        raise ContractError("need at least one reference spec")
    if method not in ("shadow", "hadamard"):
        raise ContractError(f"unknown method {method!r}")
    if m not in (1, 2, 3):
        raise ContractError(f"estimator order must be 1, 2, or 3, got {m}")
    labels = [sp.label for sp in specs]
    if len(set(labels)) != len(labels):
        raise ContractError("reference labels must be unique")
    n = specs[0].num_qubits
    for sp in specs:
        if sp.num_qubits != n:
            raise ContractError("reference specs disagree on qubit count")
    if exact:
        return exact_matrices(specs, ham)
    if budget < 1:
        raise ContractError("budget must be >= 1")
    nref = len(specs)

    if method == "hadamard":
        s = np.eye(nref, dtype=complex)
        h = np.zeros((nref, nref), dtype=complex)
        s_se = np.zeros((nref, nref))
        h_se = np.zeros((nref, nref))
        setting_counts = {}
        for i, sp in enumerate(specs):
            for j in range(i, nref):
                runner = HadamardRunner(sp, specs[j], ham, noise, groups)
                el = runner.estimate(budget, seeding.derive(seed, 2, i, j))
                setting_counts[f"{labels[i]},{labels[j]}"] = el.settings
                h[i, j] = el.h
                h[j, i] = np.conj(el.h)
                h_se[i, j] = h_se[j, i] = el.h_se
                if i != j:
                    s[i, j] = el.s
                    s[j, i] = np.conj(el.s)
                    s_se[i, j] = s_se[j, i] = el.s_se
        return MatrixElementEstimates(
            tuple(labels),
            s,
            _hermitized(h),
            s_se,
            h_se,
            [],
            "hadamard",
            {"budget": budget, "settings": setting_counts},
        )

    # shadow route
    if datasets is None:
        datasets = {}
        for i, sp in enumerate(specs):
            preps = (
                build_reference_circuit(sp),
                build_auxiliary_circuit(sp, "R"),
                build_auxiliary_circuit(sp, "I"),
            )
            datasets[sp.label] = tuple(
                shadows.acquire(
                    prep,
                    budget,
                    noise=noise,
                    rng=seeding.derive(seed, 1, i, k),
                    label=f"{sp.label}:{tag}",
                )
                for k, (prep, tag) in enumerate(zip(preps, ("state", "re", "im")))
            )
    else:
        missing = [sp.label for sp in specs if sp.label not in datasets]
        if missing:
            raise ContractError(f"datasets missing for references {missing}")
        for li, trio in datasets.items():
            if len(trio) != 3:
                raise ContractError(
                    f"reference {li!r} needs a (state, re, im) dataset trio"
                )
            for ds in trio:
                if ds.num_qubits != n:
                    raise ContractError(
                        f"dataset {ds.state_label!r} has {ds.num_qubits} "
                        f"qubits, references have {n}"
                    )
        budget = min(len(ds) for trio in datasets.values() for ds in trio)
    moments = {
        li: tuple(estimators.ShadowMoments(ds) for ds in trio)
        for li, trio in datasets.items()
    }
    ham_mat = ham.materialize()
    s, h, flags = _shadow_elements(moments, ham_mat, m, distill)

    s_se = np.zeros((nref, nref))
    h_se = np.zeros((nref, nref))
    blocks = min(se_blocks, budget // max(m, 2))
    if blocks >= 2:
        svals = np.empty((blocks, nref, nref), dtype=complex)
        hvals = np.empty((blocks, nref, nref), dtype=complex)
        edges = np.linspace(0, budget, blocks + 1, dtype=int)
        for b in range(blocks):
            mo_b = {
                li: tuple(
                    estimators.ShadowMoments(
                        _slice_dataset(ds, edges[b], edges[b + 1])
                    )
                    for ds in trio
                )
                for li, trio in datasets.items()
            }
            try:
                sb, hb, _ = _shadow_elements(mo_b, ham_mat, m, distill)
            except EstimateError:
                sb = np.full((nref, nref), np.nan, dtype=complex)
                hb = np.full((nref, nref), np.nan, dtype=complex)
            svals[b] = sb
            hvals[b] = hb

        def scatter(vals):
            re = np.nanstd(vals.real, axis=0, ddof=1)
            im = np.nanstd(vals.imag, axis=0, ddof=1)
            return np.sqrt((re**2 + im**2) / blocks)

        s_se = scatter(svals)
        h_se = scatter(hvals)
        np.fill_diagonal(s_se, 0.0)

    return MatrixElementEstimates(
        tuple(labels),
        s,
        h,
        s_se,
        h_se,
        flags,
        "shadow",
        {"budget": budget, "m": m, "distill": distill},
    )


# ---------------------------------------------------------------------------
# generalized eigenvalue solve


@dataclass(frozen=True)
class GevpResult:
    """Solution of H c = E S c restricted to the well-conditioned subspace."""

    energies: np.ndarray
    coefficients: np.ndarray
    retained_dim: int
    discarded: np.ndarray
    residuals: np.ndarray


def solve_gevp(est, s_min: float = S_MIN_DEFAULT) -> GevpResult:
    """Canonical orthogonalization: project out overlap directions < s_min.

    Both matrices are Hermitized first; the overlap eigenbasis scaled by
    w^{-1/2} maps the problem to an ordinary Hermitian eigenproblem in the
    retained subspace. Coefficients are returned in the original
    non-orthogonal basis, one column per energy (ascending).
    """
    if isinstance(est, MatrixElementEstimates):
        h, s = est.h, est.s
    else:
        h, s = est
    h = np.asarray(h, dtype=complex)
    s = np.asarray(s, dtype=complex)
    if h.shape != s.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractError(f"matrix shapes disagree: H {h.shape}, S {s.shape}")
    if not (0.0 < s_min < 1.0):
        raise ContractError(f"s_min must lie in (0, 1), got {s_min}")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(s))):
        raise ContractError(
            "matrices contain non-finite entries (flagged elements?)"
        )
    h = _hermitized(h)
    s = _hermitized(s)
    w, v = np.linalg.eigh(s)
    keep = w >= s_min
    if not np.any(keep):
        raise DegenerateSubspaceError(
            f"all {w.size} overlap eigenvalues fall below s_min={s_min:g}"
        )
    x = v[:, keep] / np.sqrt(w[keep])
    ht = _hermitized(x.conj().T @ h @ x)
    energies, u = np.linalg.eigh(ht)
    coeff = x @ u
    residuals = np.array(
        [
            float(np.linalg.norm(h @ coeff[:, k] - energies[k] * (s @ coeff[:, k])))
            for k in range(energies.size)
        ]
    )
    return GevpResult(
        energies, coeff, int(np.sum(keep)), w[~keep], residuals
    )


# ---------------------------------------------------------------------------
# end-to-end experiment


_CONFIG_DEFAULTS = {
    "method": "shadow",
    "budget": 10000,
    "estimator_m": 3,
    "distill": False,
    "noise": None,
    "s_min": S_MIN_DEFAULT,
    "seed": 0,
}


def load_config(obj, base_dir=None) -> dict:
    """Validate a config mapping (or JSON file path) and fill defaults."""
    import os

    if isinstance(obj, (str, os.PathLike)):
        base_dir = os.path.dirname(os.fspath(obj))
        try:
            with open(obj, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("config must be a JSON object")
    cfg = dict(_CONFIG_DEFAULTS)
    cfg.update(obj)
    for key in ("hamiltonian", "references"):
        if key not in cfg:
            raise ParseError(f"config is missing {key!r}")
    if cfg["method"] not in ("shadow", "hadamard"):
        raise ParseError(f"unknown method {cfg['method']!r}")
    if not isinstance(cfg["budget"], int) or cfg["budget"] < 1:
        raise ParseError("budget must be a positive integer")
    if cfg["estimator_m"] not in (1, 2, 3):
        raise ParseError("estimator_m must be 1, 2, or 3")
    if not isinstance(cfg["references"], list) or not cfg["references"]:
        raise ParseError("references must be a non-empty list")
    if not (0.0 < float(cfg["s_min"]) < 1.0):
        raise ParseError("s_min must lie in (0, 1)")

    def _resolve(path):
        if base_dir and not os.path.isabs(path):
            return os.path.join(base_dir, path)
        return path

    cfg["hamiltonian"] = _resolve(cfg["hamiltonian"])
    refs = []
    for k, ref in enumerate(cfg["references"]):
        if not isinstance(ref, dict) or "label" not in ref or "circuit" not in ref:
            raise ParseError(f"reference {k} needs 'label' and 'circuit'")
        refs.append({"label": ref["label"], "circuit": _resolve(ref["circuit"])})
    cfg["references"] = refs
    if cfg.get("groups"):
        cfg["groups"] = _resolve(cfg["groups"])
    if cfg["noise"] is not None and not isinstance(cfg["noise"], dict):
        raise ParseError("noise must be an object or null")
    return cfg


def _complex_matrix_json(mat: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def load_problem(cfg: dict):
    """(hamiltonian, specs, groups, noise) from a validated config."""
    ham = PauliSum.load(cfg["hamiltonian"])
    specs = []
    for ref in cfg["references"]:
        circ = Circuit.load(ref["circuit"])
        specs.append(ReferenceSpec(ref["label"], ham.num_qubits, circ))
    groups = None
    if cfg.get("groups"):
        try:
            with open(cfg["groups"], "r", encoding="utf-8") as fh:
                groups = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read groups table: {exc}") from exc
    noise = None
    if cfg["noise"] is not None:
        noise = NoiseModel.from_dict(cfg["noise"])
    return ham, specs, groups, noise


def noqe_energy(config, exact: bool = False, base_dir=None) -> dict:
    """Run the whole experiment described by a config; returns the report.

    With ``exact=True`` sampling is bypassed entirely and the matrices come
    from statevector oracles; the resulting ground energy is the exact value
    the sampled runs are compared against.
    """
    cfg = load_config(config, base_dir)
    t0 = time.perf_counter()
    ham, specs, groups, noise = load_problem(cfg)
    t1 = time.perf_counter()
    est = assemble_matrices(
        specs,
        ham,
        method=cfg["method"],
        budget=cfg["budget"],
        noise=noise,
        m=cfg["estimator_m"],
        distill=bool(cfg["distill"]),
        seed=int(cfg["seed"]),
        groups=groups,
        exact=exact,
    )
    t2 = time.perf_counter()
    gevp = solve_gevp(est, float(cfg["s_min"]))
    t3 = time.perf_counter()

    resources = {
        "references": [
            {
                "label": sp.label,
                "two_qubit": resource_report(build_reference_circuit(sp)).two_qubit,
                "single_qubit": resource_report(
                    build_reference_circuit(sp)
                ).single_qubit,
            }
            for sp in specs
        ]
    }
    if len(specs) >= 2:
        base = resource_report(build_hadamard_circuit(specs[0], specs[1], 0.0))
        worst_ref = max(r["two_qubit"] for r in resources["references"])
        resources["hadamard_pair"] = {
            "two_qubit": base.two_qubit,
            "single_qubit": base.single_qubit,
        }
        resources["two_qubit_ratio"] = (
            worst_ref / base.two_qubit if base.two_qubit else None
        )

    return {
        "version": 1,
        "method": est.method,
        "exact": bool(exact),
        "unit": ham.unit,
        "seed": int(cfg["seed"]),
        "budget": int(cfg["budget"]),
        "estimator_m": int(cfg["estimator_m"]),
        "distill": bool(cfg["distill"]),
        "noise": cfg["noise"],
        "s_min": float(cfg["s_min"]),
        "labels": list(est.labels),
        "s": _complex_matrix_json(est.s),
        "h": _complex_matrix_json(est.h),
        "s_se": [[float(x) for x in row] for row in est.s_se],
        "h_se": [[float(x) for x in row] for row in est.h_se],
        "flags": est.flags,
        "estimate_metadata": est.metadata,
        "energies": [float(e) for e in gevp.energies],
        "ground_energy": float(gevp.energies[0]),
        "retained_dim": gevp.retained_dim,
        "discarded_overlaps": [float(x) for x in gevp.discarded],
        "residuals": [float(x) for x in gevp.residuals],
        "resources": resources,
        "timing": {
            "load_s": t1 - t0,
            "estimate_s": t2 - t1,
            "solve_s": t3 - t2,
            "total_s": t3 - t0,
        },
    }


# ---------------------------------------------------------------------------
# bundled molecular data


def _data_text(name: str) -> str:
    try:
        return (resources.files("noqe.data") / name).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ParseError(f"bundled data file {name!r} is missing") from exc


def h2_hamiltonian() -> PauliSum:
    """The bundled 4-qubit molecular Hamiltonian (27 Pauli terms)."""
    return PauliSum.from_dict(json.loads(_data_text("h2_hamiltonian.json")))


def h2_metadata() -> dict:
    return json.loads(_data_text("h2_references.json"))


def h2_config_path() -> str:
    """Path of the bundled ready-to-run experiment config."""
    return str(resources.files("noqe.data") / "h2_config.json")


def h2_measurement_groups() -> dict:
    return json.loads(_data_text("h2_groups.json"))


def _spec_from_entry(entry: dict, label: str) -> ReferenceSpec:
    ansatz = ansatz_circuit(
        4, entry["subroutines"], entry.get("rotation_givens", ())
    )
    return ReferenceSpec(label, 4, ansatz)


def h2_reference_specs() -> tuple[ReferenceSpec, ReferenceSpec]:
    """The two bundled reference states, expressed in the first state's basis."""
    meta = h2_metadata()
    return (
        _spec_from_entry(meta["ref1"], "ref1"),
        _spec_from_entry(meta["ref2"], "ref2"),
    )


def h2_reference2_own_basis() -> tuple[ReferenceSpec, PauliSum]:
    """Reference 2 in its own orbital basis, with the matching Hamiltonian.

    Diagonal elements are cheapest measured in the basis where the state has
    the two-determinant form; this pairs the un-rotated ansatz with the
    Hamiltonian transformed into that basis.
    """
    meta = h2_metadata()
    spec = _spec_from_entry(meta["ref2_own"], "ref2_own")
    ham = PauliSum.from_dict(
        json.loads(_data_text("h2_hamiltonian_ref2_basis.json"))
    )
    return spec, ham
