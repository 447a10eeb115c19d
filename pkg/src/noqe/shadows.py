"""Randomized Clifford measurements: acquisition, inversion, persistence.

A dataset is a pure function of (preparation circuit, noise model, master
seed): every snapshot index derives its own PRNG seed, so acquisition order
and chunking never change the result. Snapshots are stored packed — the
tableau bit matrix, its sign bits, and the outcome bitstring fit in a few
machine words each — and dense vectors are materialized on demand.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from . import __version__, _kernels, seeding
from .clifford import CliffordTableau, pullback_basis_state
from .errors import ContractError, FormatError
from .noise import NoiseModel, noisy_run_fast, pauli_vector
from .sim import Circuit, run_circuit

CHUNK = 65536


@dataclass(frozen=True)
class Snapshot:
    """One randomized measurement: the sampled Clifford and its outcome."""

    tableau: CliffordTableau
    outcome: str

    def __post_init__(self):
        n = self.tableau.num_qubits
        if len(self.outcome) != n or set(self.outcome) - {"0", "1"}:
            raise ContractError(
                f"outcome {self.outcome!r} is not a {n}-bit string"
            )


def snapshot_matrix(snap: Snapshot) -> np.ndarray:
    """Inverse-channel image (D+1)|s><s| - I of a single snapshot."""
    s = pullback_basis_state(snap.tableau, snap.outcome).amps
    d = s.shape[0]
    return (d + 1) * np.outer(s, s.conj()) - np.eye(d)


def _tab_nbytes(n: int) -> int:
    return (4 * n * n + 7) // 8


def _sign_nbytes(n: int) -> int:
    return (2 * n + 7) // 8


def _tab_nwords(n: int) -> int:
    return (4 * n * n + 63) // 64


@dataclass
class ShadowDataset:
    """An ordered collection of snapshots of one prepared state.

    ``tab_words`` packs each tableau row-major into uint64 words; ``srt``
    packs the outcome index (low ``num_qubits`` bits) and the 2N sign bits
    above it.
    """

    state_label: str
    num_qubits: int
    tab_words: np.ndarray
    srt: np.ndarray
    metadata: dict

    def __post_init__(self):
        n = self.num_qubits
        self.tab_words = np.ascontiguousarray(self.tab_words, dtype=np.uint64)
        self.srt = np.ascontiguousarray(self.srt, dtype=np.uint64)
        if self.tab_words.shape != (self.srt.shape[0], _tab_nwords(n)):
            raise ContractError("packed snapshot arrays have mismatched shapes")

    def __len__(self) -> int:
        return self.srt.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShadowDataset):
            return NotImplemented
        return (
            self.state_label == other.state_label
            and self.num_qubits == other.num_qubits
            and np.array_equal(self.tab_words, other.tab_words)
            and np.array_equal(self.srt, other.srt)
            and self.metadata == other.metadata
        )

    def snapshot(self, i: int) -> Snapshot:
        n = self.num_qubits
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise ContractError(f"snapshot index {i} out of range")
        m = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        r = np.zeros(2 * n, dtype=np.uint8)
        b = _kernels._unpack_tableau(self.tab_words, self.srt, n, i, m, r)
        return Snapshot(CliffordTableau(n, m, r), format(b, f"0{n}b"))

    @property
    def snapshots(self) -> list[Snapshot]:
        return [self.snapshot(i) for i in range(len(self))]

    def state_vectors(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Dense pullback states U^dag|b> for snapshots [start, stop)."""
        if stop is None:
            stop = len(self)
        svecs = np.empty((stop - start, 1 << self.num_qubits), dtype=complex)
        _kernels._pullback_chunk(
            self.num_qubits, self.tab_words[start:stop], self.srt[start:stop], svecs
        )
        return svecs

    def save(self, path) -> None:
        n = self.num_qubits
        nt, ns = _tab_nbytes(n), _sign_nbytes(n)
        bmask = (1 << n) - 1
        smask = (1 << (2 * n)) - 1
        lines = []
        for i in range(len(self)):
            word = int(self.srt[i])
            rec = {
                "t": self.tab_words[i].astype("<u8").tobytes()[:nt].hex(),
                "s": ((word >> n) & smask).to_bytes(ns, "little").hex(),
                "b": format(word & bmask, f"0{n}b"),
            }
            lines.append(json.dumps(rec, separators=(",", ":")))
        digest = hashlib.sha256()
        for line in lines:
            digest.update(line.encode())
            digest.update(b"\n")
        header = {
            "label": self.state_label,
            "num_qubits": n,
            "count": len(self),
            "records_sha256": digest.hexdigest(),
            **self.metadata,
        }
        tmp = f"{path}.tmp"
        with open(tmp, "w") as f:
            f.write(json.dumps(header, separators=(",", ":")) + "\n")
            for line in lines:
                f.write(line + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "ShadowDataset":
        with open(path) as f:
            raw = f.read().splitlines()
        if not raw:
            raise FormatError(f"{path}: empty dataset file")
        try:
            header = json.loads(raw[0])
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad header: {exc}") from exc
        for key in ("label", "num_qubits", "count", "records_sha256"):
            if key not in header:
                raise FormatError(f"{path}: header missing {key!r}")
        n = int(header["num_qubits"])
        count = int(header["count"])
        if not 1 <= n <= 12:
            raise FormatError(f"{path}: num_qubits {n} outside 1..12")
        body = raw[1:]
        if len(body) != count:
            raise FormatError(
                f"record {len(body)}: expected {count} records, found {len(body)}"
            )
        nt, ns = _tab_nbytes(n), _sign_nbytes(n)
        nw = _tab_nwords(n)
        tab_words = np.zeros((count, nw), dtype=np.uint64)
        srt = np.zeros(count, dtype=np.uint64)
        digest = hashlib.sha256()
        for i, line in enumerate(body):
            digest.update(line.encode())
            digest.update(b"\n")
            try:
                rec = json.loads(line)
                tb = bytes.fromhex(rec["t"])
                sb = bytes.fromhex(rec["s"])
                bits = rec["b"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"record {i}: {exc}") from exc
            if len(tb) != nt or len(sb) != ns:
                raise FormatError(f"record {i}: packed field length mismatch")
            if len(bits) != n or set(bits) - {"0", "1"}:
                raise FormatError(f"record {i}: outcome {bits!r} is not {n} bits")
            tab_words[i] = np.frombuffer(tb.ljust(8 * nw, b"\x00"), dtype="<u8")
            srt[i] = np.uint64(
                int(bits, 2) | (int.from_bytes(sb, "little") << n)
            )
        if digest.hexdigest() != header["records_sha256"]:
            raise FormatError(f"{path}: records checksum mismatch")
        metadata = {
            k: v
            for k, v in header.items()
            if k not in ("label", "num_qubits", "count", "records_sha256")
        }
        return cls(str(header["label"]), n, tab_words, srt, metadata)


def acquire(
    prep: Circuit,
    n: int,
    noise: NoiseModel | None = None,
    rng=None,
    label: str = "state",
) -> ShadowDataset:
    """Collect n single-shot randomized Clifford measurements of prep's state.

    Each snapshot draws a fresh uniform Clifford U, evolves the prepared
    state through U (with per-gate noise when a nontrivial model is given),
    and Born-samples one Z-basis outcome. The master seed fans out to
    per-index seeds, so the dataset depends only on (prep, noise, seed).
    """
    if n < 1:
        raise ContractError("snapshot count must be >= 1")
    nq = prep.num_qubits
    if rng is None:
        rng = np.random.default_rng()
    if isinstance(rng, (int, np.integer)):
        master = int(rng)
    else:
        master = int(rng.integers(1 << 63))
    trivial = noise is None or noise.is_trivial()
    if trivial:
        psi = np.ascontiguousarray(run_circuit(prep).amps)
    else:
        rho = noisy_run_fast(prep, noise)
        vprep = pauli_vector(rho.mat, nq)
        r1, r2 = noise.rate_triples()
    tab_words = np.zeros((n, _tab_nwords(nq)), dtype=np.uint64)
    srt = np.zeros(n, dtype=np.uint64)
    scratch = np.empty((min(n, CHUNK), 1 << nq), dtype=complex)
    for start in range(0, n, CHUNK):
        count = min(CHUNK, n - start)
        seeds = seeding.snapshot_seeds(master, start, count)
        block = (tab_words[start : start + count], srt[start : start + count])
        if trivial:
            _kernels._acquire_ideal_chunk(nq, psi, seeds, *block, scratch[:count])
        else:
            _kernels._acquire_pauli_chunk(
                nq, vprep, seeds, r1, r2, *block, scratch[:count],
                _kernels._PTM_PERM1, _kernels._PTM_SIGN1,
                _kernels._PTM_PERM2, _kernels._PTM_SIGN2,
            )
    metadata = {
        "seed": master,
        "scheme": seeding.SCHEME,
        "noise": None if noise is None else noise.to_dict(),
        "circuit_sha256": prep.sha256(),
        "version": __version__,
    }
    return ShadowDataset(label, nq, tab_words, srt, metadata)
