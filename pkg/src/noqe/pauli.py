"""Pauli words, weighted Pauli sums, and their dense forms.

Conventions: a word is a string over {I, X, Y, Z} with qubit 0 as the leftmost
letter; basis index of a bitstring b is sum_q b_q * 2^(N-1-q), so qubit 0 is
the most significant bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParseError, ResourceError

MAX_DENSE_QUBITS = 12

_LETTERS = frozenset("IXYZ")

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def check_word(word: str, num_qubits: int) -> str:
    if len(word) != num_qubits:
        raise ContractError(
            f"Pauli word {word!r} has length {len(word)}, expected {num_qubits}"
        )
    bad = set(word) - _LETTERS
    if bad:
        raise ContractError(f"Pauli word {word!r} contains invalid letters {sorted(bad)}")
    return word


def apply_word(word: str, vec: np.ndarray) -> np.ndarray:
    """Apply a Pauli word to a statevector without materializing a matrix.

    X/Y flip the corresponding bit (index XOR), Z/Y contribute signs, each Y a
    factor of i on the bit-0 -> bit-1 direction. O(2^N) per word.
    """
    n = len(word)
    check_word(word, n)
    d = vec.shape[0]
    if d != 2**n:
        raise ContractError(f"vector dim {d} does not match word length {n}")
    flip = 0
    zmask = 0
    ny = 0
    for q, letter in enumerate(word):
        bit = 1 << (n - 1 - q)
        if letter in ("X", "Y"):
            flip |= bit
        if letter in ("Z", "Y"):
            zmask |= bit
        if letter == "Y":
            ny += 1
    idx = np.arange(d)
    src = idx ^ flip
    # sign from Z-part acting on the source basis state, phase i per Y plus
    # a -1 for each Y whose source bit is set (Y|1> = -i|0>, Y|0> = i|1>).
    par = _parity(src & zmask)
    phase = (1j) ** (ny % 4) * (-1.0) ** par
    return phase * vec[src]


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x >>= 1
    return out


def word_matrix(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word (guardrailed)."""
    if len(word) > MAX_DENSE_QUBITS:
        raise ResourceError(
            f"refusing to materialize {len(word)} qubits (> {MAX_DENSE_QUBITS})"
        )
    m = np.array([[1.0 + 0j]])
    for letter in word:
        m = np.kron(m, _SINGLE[letter])
    return m


@dataclass
class PauliSum:
    """Weighted sum of Pauli words, optionally carrying a unit label."""

    num_qubits: int
    terms: list[tuple[str, complex]]
    unit: str = "dimensionless"

    def __post_init__(self):
        for word, _ in self.terms:
            check_word(word, self.num_qubits)

    @property
    def term_count(self) -> int:
        return len(self.terms)

    @property
    def hermitian(self) -> bool:
        return all(abs(complex(c).imag) < 1e-12 for _, c in self.terms)

    def materialize(self) -> np.ndarray:
        if self.num_qubits > MAX_DENSE_QUBITS:
            raise ResourceError(
                f"refusing to materialize {self.num_qubits} qubits "
                f"(> {MAX_DENSE_QUBITS})"
            )
        d = 2**self.num_qubits
        out = np.zeros((d, d), dtype=complex)
        for word, coeff in self.terms:
            out += coeff * word_matrix(word)
        return out

    def expectation(self, vec: np.ndarray) -> complex:
        """<vec| sum |vec> via per-word O(2^N) application."""
        acc = 0.0 + 0.0j
        for word, coeff in self.terms:
            acc += coeff * np.vdot(vec, apply_word(word, vec))
        return acc

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "unit": self.unit,
            "terms": [
                {"pauli": w, "re": float(complex(c).real), "im": float(complex(c).imag)}
                for w, c in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PauliSum":
        try:
            n = int(data["num_qubits"])
            unit = str(data.get("unit", "dimensionless"))
            raw = data["terms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad Pauli-sum payload: {exc}") from exc
        merged: dict[str, complex] = {}
        order: list[str] = []
        for k, term in enumerate(raw):
            try:
                word = str(term["pauli"])
                coeff = complex(float(term["re"]), float(term.get("im", 0.0)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad term at index {k}: {exc}") from exc
            if not (math.isfinite(coeff.real) and math.isfinite(coeff.imag)):
                raise ParseError(f"bad term at index {k}: non-finite coefficient")
            try:
                check_word(word, n)
            except ContractError as exc:
                raise ParseError(f"bad term at index {k}: {exc}") from exc
            if word in merged:
                merged[word] += coeff
            else:
                merged[word] = coeff
                order.append(word)
        return cls(num_qubits=n, terms=[(w, merged[w]) for w in order], unit=unit)

    @classmethod
    def load(cls, path) -> "PauliSum":
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


@dataclass
class FrobeniusBound:
    """Frobenius-norm sample-complexity constant B = D * sum_k w_k^2."""

    B: float
    D: int

    @classmethod
    def from_sum(cls, psum: PauliSum) -> "FrobeniusBound":
        d = 2**psum.num_qubits
        b = d * float(sum(abs(c) ** 2 for _, c in psum.terms))
        return cls(B=b, D=d)
