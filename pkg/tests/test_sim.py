import numpy as np
import pytest

from noqe.errors import ContractError, ParseError, ResourceError
from noqe.sim import (
    Circuit,
    Gate,
    Statevector,
    circuit_unitary,
    gate_from_matrix,
    gate_names,
    inner_product,
    run_circuit,
    sample_bitstrings,
)

_SQ2 = 1.0 / np.sqrt(2.0)


def _random_gate(rng, num_qubits):
    name = rng.choice(["H", "X", "Z", "S", "Sdg", "PHASE", "RZ", "RY",
                       "CNOT", "CZ", "CRZ", "GIVENS"])
    arity = 1 if name in ("H", "X", "Z", "S", "Sdg", "PHASE", "RZ", "RY") else 2
    qubits = tuple(rng.choice(num_qubits, size=arity, replace=False))
    params = ()
    if name in ("PHASE", "RZ", "RY", "CRZ", "GIVENS"):
        params = (float(rng.uniform(-np.pi, np.pi)),)
    return Gate(name, qubits, params)


@pytest.mark.parametrize("name", [n for n in gate_names() if n not in ("U1Q", "U2Q")])
def test_all_gates_unitary(name):
    arity = {"CNOT": 2, "CZ": 2, "CRZ": 2, "GIVENS": 2, "CSWAP": 3}.get(name, 1)
    params = (0.37,) if name in ("PHASE", "RZ", "RY", "CRZ", "GIVENS") else ()
    g = Gate(name, tuple(range(arity)), params)
    m = g.matrix()
    np.testing.assert_allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-12)


def test_fixed_matrices():
    np.testing.assert_allclose(
        Gate("H", (0,)).matrix(), np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]])
    )
    np.testing.assert_allclose(Gate("S", (0,)).matrix(), np.diag([1, 1j]))
    t = 0.8
    np.testing.assert_allclose(
        Gate("RZ", (0,), (t,)).matrix(),
        np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)]),
    )
    np.testing.assert_allclose(
        Gate("CRZ", (0, 1), (t,)).matrix(),
        np.diag([1, 1, np.exp(-0.5j * t), np.exp(0.5j * t)]),
    )
    c, s = np.cos(t), np.sin(t)
    np.testing.assert_allclose(
        Gate("GIVENS", (0, 1), (t,)).matrix(),
        [[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]],
        atol=1e-15,
    )


def test_cswap_matrix_swaps_targets():
    m = Gate("CSWAP", (0, 1, 2)).matrix()
    # control set: |101> <-> |110>
    v = np.zeros(8)
    v[0b101] = 1.0
    out = m @ v
    assert out[0b110] == pytest.approx(1.0)
    # control clear: fixed point
    v = np.zeros(8)
    v[0b001] = 1.0
    np.testing.assert_allclose(m @ v, v)


@pytest.mark.parametrize("name,qubits,params", [
    ("H", (0, 1), ()),            # wrong arity
    ("CNOT", (0, 0), ()),         # repeated qubit
    ("RZ", (0,), ()),             # missing parameter
    ("NOPE", (0,), ()),           # unknown kind
])
def test_gate_contract_errors(name, qubits, params):
    with pytest.raises(ContractError):
        Gate(name, qubits, params)


def test_u2q_must_be_unitary():
    bad = np.ones((4, 4), dtype=complex)
    with pytest.raises(ContractError):
        gate_from_matrix(bad, (0, 1))


def test_gate_from_matrix_round_trip():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    q, _ = np.linalg.qr(a)
    g = gate_from_matrix(q, (1, 0))
    np.testing.assert_allclose(g.matrix(), q, atol=1e-12)


@pytest.mark.parametrize("name", ["H", "S", "Sdg", "PHASE", "RZ", "CRZ",
                                  "GIVENS", "CSWAP"])
def test_dagger_inverts(name):
    arity = {"CRZ": 2, "GIVENS": 2, "CSWAP": 3}.get(name, 1)
    params = (1.1,) if name in ("PHASE", "RZ", "RY", "CRZ", "GIVENS") else ()
    g = Gate(name, tuple(range(arity)), params)
    np.testing.assert_allclose(
        g.matrix() @ g.dagger().matrix(), np.eye(2**arity), atol=1e-12
    )


def test_bell_state():
    c = Circuit(2)
    c.add("H", 0).add("CNOT", 0, 1)
    out = run_circuit(c)
    np.testing.assert_allclose(out.amps, [_SQ2, 0, 0, _SQ2], atol=1e-12)


def test_qubit_order_convention():
    # X on qubit 0 of 3 flips the most significant bit
    c = Circuit(3)
    c.add("X", 0)
    out = run_circuit(c)
    assert out.amps[0b100] == pytest.approx(1.0)
    assert out.bitstring(0b100) == "100"


@pytest.mark.parametrize("seed", range(8))
def test_run_matches_dense_unitary(seed):
    rng = np.random.default_rng(seed)
    n = 3
    c = Circuit(n, [_random_gate(rng, n) for _ in range(10)])
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    psi /= np.linalg.norm(psi)
    out = run_circuit(c, Statevector(n, psi))
    np.testing.assert_allclose(out.amps, circuit_unitary(c) @ psi, atol=1e-10)


def test_run_is_linear():
    rng = np.random.default_rng(42)
    n = 3
    c = Circuit(n, [_random_gate(rng, n) for _ in range(6)])
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    b = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    al, be = 0.3 + 0.1j, -0.7 + 0.4j
    u = circuit_unitary(c)
    np.testing.assert_allclose(
        u @ (al * a + be * b), al * (u @ a) + be * (u @ b), atol=1e-10
    )


def test_givens_preserves_hamming_weight():
    g = Gate("GIVENS", (0, 1), (0.9,)).matrix()
    # exhaustive on 2 qubits: |00> and |11> fixed, {|01>,|10>} closed
    np.testing.assert_allclose(g[:, 0], [1, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(g[:, 3], [0, 0, 0, 1], atol=1e-12)
    assert abs(g[0, 1]) + abs(g[3, 1]) < 1e-12
    assert abs(g[0, 2]) + abs(g[3, 2]) < 1e-12


def test_inverse_circuit():
    rng = np.random.default_rng(7)
    c = Circuit(3, [_random_gate(rng, 3) for _ in range(12)])
    u = circuit_unitary(c)
    uinv = circuit_unitary(c.inverse())
    np.testing.assert_allclose(uinv @ u, np.eye(8), atol=1e-10)


def test_circuit_json_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    c = Circuit(3, [_random_gate(rng, 3) for _ in range(8)])
    path = tmp_path / "c.json"
    c.save(path)
    again = Circuit.load(path)
    assert again.to_dict() == c.to_dict()
    assert again.sha256() == c.sha256()


def test_circuit_parse_errors(tmp_path):
    with pytest.raises(ParseError, match="index 1"):
        Circuit.from_dict({
            "num_qubits": 2,
            "gates": [
                {"name": "H", "qubits": [0]},
                {"name": "H", "qubits": [0, 1]},
            ],
        })
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        Circuit.load(bad)


def test_out_of_range_qubits_rejected():
    c = Circuit(2)
    with pytest.raises(ContractError):
        c.add("H", 2)
    with pytest.raises(ContractError):
        Circuit(1, [Gate("CNOT", (0, 1))])


def test_guardrail():
    with pytest.raises(ResourceError):
        run_circuit(Circuit(13))


def test_initial_state_width_checked():
    with pytest.raises(ContractError):
        run_circuit(Circuit(2), Statevector.zero_state(3))


def test_inner_product():
    a = Statevector.from_bitstring("1100")
    b = Statevector.from_bitstring("0011")
    assert inner_product(a, b) == 0
    assert inner_product(a, a) == pytest.approx(1.0)
    with pytest.raises(ContractError):
        inner_product(a, Statevector.zero_state(3))


def test_sampling_basis_state():
    s = Statevector.from_bitstring("1100")
    assert sample_bitstrings(s, 100, seed=0) == {"1100": 100}


def test_sampling_balanced_and_deterministic():
    s = Statevector(1, np.array([_SQ2, _SQ2]))
    counts = sample_bitstrings(s, 100_000, seed=123)
    sigma = np.sqrt(100_000 * 0.25)
    assert abs(counts["0"] - 50_000) < 5 * sigma
    assert counts == sample_bitstrings(s, 100_000, seed=123)
