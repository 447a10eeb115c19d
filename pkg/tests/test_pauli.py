import json

import numpy as np
import pytest

from noqe.errors import ContractError, ParseError, ResourceError
from noqe.pauli import FrobeniusBound, PauliSum, apply_word, word_matrix

_I = np.eye(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0, -1.0]).astype(complex)
_MAT = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}


def _kron_word(word):
    m = np.eye(1, dtype=complex)
    for ch in word:
        m = np.kron(m, _MAT[ch])
    return m


@pytest.mark.parametrize("word", ["Z", "II", "XY", "ZXIY", "YYZX"])
def test_word_matrix_matches_kron(word):
    np.testing.assert_allclose(word_matrix(word), _kron_word(word), atol=1e-12)


@pytest.mark.parametrize("word", ["X", "ZZ", "XYZ", "IYXZ"])
def test_word_matrix_involutory_hermitian(word):
    m = word_matrix(word)
    d = m.shape[0]
    np.testing.assert_allclose(m @ m, np.eye(d), atol=1e-12)
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)


def test_single_qubit_values():
    np.testing.assert_allclose(word_matrix("Z"), np.diag([1, -1]))
    np.testing.assert_allclose(word_matrix("II"), np.eye(4))


@pytest.mark.parametrize("seed", range(6))
def test_apply_word_matches_dense(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    word = "".join(rng.choice(list("IXYZ"), size=n))
    vec = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    np.testing.assert_allclose(
        apply_word(word, vec), word_matrix(word) @ vec, atol=1e-12
    )


def test_apply_word_rejects_bad_letters():
    with pytest.raises(ContractError):
        apply_word("XQ", np.zeros(4, dtype=complex))


def test_word_matrix_guardrail():
    with pytest.raises(ResourceError):
        word_matrix("I" * 13)


def test_expectation_eigenstates():
    s = PauliSum(4, [("ZZII", 1.0)])
    vec = np.zeros(16, dtype=complex)
    vec[0b1100] = 1.0
    assert s.expectation(vec) == pytest.approx(1.0)
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    assert PauliSum(1, [("X", 1.0)]).expectation(plus) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(4))
def test_expectation_matches_dense(seed):
    rng = np.random.default_rng(100 + seed)
    words = ["".join(rng.choice(list("IXYZ"), size=3)) for _ in range(5)]
    coeffs = rng.normal(size=5)
    s = PauliSum(3, list(zip(words, coeffs)))
    vec = rng.normal(size=8) + 1j * rng.normal(size=8)
    vec /= np.linalg.norm(vec)
    dense = s.materialize()
    np.testing.assert_allclose(
        s.expectation(vec), np.vdot(vec, dense @ vec), atol=1e-10
    )


def test_ground_state_matches_materialized_minimum():
    rng = np.random.default_rng(3)
    words = ["".join(rng.choice(list("IXYZ"), size=2)) for _ in range(6)]
    s = PauliSum(2, [(w, c) for w, c in zip(words, rng.normal(size=6))])
    h = s.materialize()
    evals, evecs = np.linalg.eigh(h)
    assert s.expectation(evecs[:, 0]) == pytest.approx(evals[0], abs=1e-10)


def test_parse_round_trip(tmp_path):
    payload = {
        "num_qubits": 2,
        "unit": "Hartree",
        "terms": [
            {"pauli": "ZI", "re": 0.25, "im": 0.0},
            {"pauli": "XX", "re": -0.5, "im": 0.0},
        ],
    }
    path = tmp_path / "h.json"
    path.write_text(json.dumps(payload))
    s = PauliSum.load(path)
    assert s.num_qubits == 2
    assert s.term_count == 2
    assert s.unit == "Hartree"
    out = tmp_path / "h2.json"
    s.save(out)
    again = PauliSum.load(out)
    assert again.to_dict() == s.to_dict()


def test_parse_merges_duplicates():
    data = {
        "num_qubits": 2,
        "terms": [
            {"pauli": "ZZ", "re": 0.2, "im": 0.0},
            {"pauli": "XX", "re": 1.0, "im": 0.0},
            {"pauli": "ZZ", "re": 0.3, "im": 0.0},
        ],
    }
    s = PauliSum.from_dict(data)
    assert s.term_count == 2
    # merged coefficient, original first-seen order preserved
    assert s.terms[0][0] == "ZZ"
    assert s.terms[0][1] == pytest.approx(0.5)


@pytest.mark.parametrize(
    "terms",
    [
        [{"pauli": "ZZZ", "re": 1.0, "im": 0.0}],  # wrong length
        [{"pauli": "ZA", "re": 1.0, "im": 0.0}],  # bad letter
        [{"pauli": "ZZ", "re": float("nan"), "im": 0.0}],  # non-finite
    ],
)
def test_parse_rejects_bad_terms(terms):
    with pytest.raises(ParseError):
        PauliSum.from_dict({"num_qubits": 2, "terms": terms})


def test_parse_error_names_term_index():
    data = {
        "num_qubits": 2,
        "terms": [
            {"pauli": "ZZ", "re": 1.0, "im": 0.0},
            {"pauli": "BAD!", "re": 1.0, "im": 0.0},
        ],
    }
    with pytest.raises(ParseError, match="index 1"):
        PauliSum.from_dict(data)


def test_hermitian_flag():
    assert PauliSum(1, [("Z", 1.0)]).hermitian
    assert not PauliSum(1, [("Z", 1.0 + 0.5j)]).hermitian


def test_frobenius_bound():
    rng = np.random.default_rng(11)
    for _ in range(5):
        n = int(rng.integers(1, 5))
        k = int(rng.integers(1, 10))
        words = list({"".join(rng.choice(list("IXYZ"), size=n)) for _ in range(k)})
        coeffs = rng.normal(size=len(words))
        s = PauliSum(n, list(zip(words, coeffs)))
        b = FrobeniusBound.from_sum(s)
        d = 2**n
        tr_h2 = np.trace(s.materialize() @ s.materialize()).real
        assert abs(tr_h2 - b.B) <= 1e-8 * d
        assert b.D == d
