"""Cross-route checks on the compiled acquisition kernels.

Every fast path here has an independent slow route: the packed-snapshot
round trip against the raw tableau, the Pauli-coefficient evolution against
the dense density-matrix evolution, and the noisy samplers against each
other and against the ideal sampler at zero noise.
"""

import numpy as np
import pytest

from noqe import _kernels, noise, sim
from noqe.noise import DensityMatrix, NoiseModel
from noqe.seeding import snapshot_seeds

OPNAME = {0: "H", 1: "S", 2: "CNOT", 3: "CZ", 4: "X", 5: "Z"}


def chunk_buffers(n, count):
    words = (4 * n * n + 63) // 64
    tab = np.zeros((count, words), dtype=np.uint64)
    srt = np.zeros(count, dtype=np.uint64)
    svecs = np.zeros((count, 1 << n), dtype=np.complex128)
    return tab, srt, svecs


def sampled_ops(n, seed):
    """Sample a tableau and synthesize its gate list (op, a, b) rows."""
    M = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    _kernels._sample_tableau(n, np.uint64(seed), M, r)
    ops = np.empty((8 * n * n + 8 * n + 8, 3), dtype=np.int32)
    ng = _kernels._synthesize(M, r, n, ops)
    assert ng >= 0
    return ops, ng


def ops_to_circuit(ops, ng, n):
    c = sim.Circuit(n)
    for g in range(ng):
        name = OPNAME[ops[g, 0]]
        if name in ("CNOT", "CZ"):
            c.add(name, int(ops[g, 1]), int(ops[g, 2]))
        else:
            c.add(name, int(ops[g, 1]))
    return c


def random_density(rng, n):
    d = 1 << n
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.mark.parametrize("n", [1, 2, 4])
def test_pack_unpack_round_trip(n):
    M = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    r = np.zeros(2 * n, dtype=np.uint8)
    tab, srt, _ = chunk_buffers(n, 30)
    stored = []
    for i in range(30):
        _kernels._sample_tableau(n, np.uint64(1000 + i), M, r)
        b = i % (1 << n)
        srt[i] = _kernels._pack_tableau(M, r, b, n, tab, i)
        stored.append((M.copy(), r.copy(), b))
    M2 = np.zeros_like(M)
    r2 = np.zeros_like(r)
    for i, (m0, r0, b0) in enumerate(stored):
        b = _kernels._unpack_tableau(tab, srt, n, i, M2, r2)
        assert b == b0
        assert np.array_equal(M2, m0)
        assert np.array_equal(r2, r0)


@pytest.mark.parametrize("n", [2, 3])
def test_pullback_chunk_rebuilds_stored_vectors(n):
    d = 1 << n
    rng = np.random.default_rng(n)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi /= np.linalg.norm(psi)
    seeds = snapshot_seeds(7, 0, 200)
    tab, srt, svecs = chunk_buffers(n, 200)
    _kernels._acquire_ideal_chunk(n, psi.astype(complex), seeds, tab, srt, svecs)
    rebuilt = np.zeros_like(svecs)
    _kernels._pullback_chunk(n, tab, srt, rebuilt)
    assert np.array_equal(rebuilt, svecs)


def test_chunk_boundaries_do_not_change_snapshots():
    n, total = 3, 120
    rng = np.random.default_rng(0)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi = (psi / np.linalg.norm(psi)).astype(complex)
    tab_a, srt_a, sv_a = chunk_buffers(n, total)
    _kernels._acquire_ideal_chunk(n, psi, snapshot_seeds(9, 0, total), tab_a, srt_a, sv_a)
    tab_b, srt_b, sv_b = chunk_buffers(n, total)
    for start, count in ((0, 50), (50, 70)):
        _kernels._acquire_ideal_chunk(
            n,
            psi,
            snapshot_seeds(9, start, count),
            tab_b[start : start + count],
            srt_b[start : start + count],
            sv_b[start : start + count],
        )
    assert np.array_equal(tab_a, tab_b)
    assert np.array_equal(srt_a, srt_b)
    assert np.array_equal(sv_a, sv_b)


def test_pauli_evolution_matches_density_route():
    rng = np.random.default_rng(3)
    model = NoiseModel(p1=0.004, p2=0.03, lam=1.3)
    r1, r2 = model.rate_triples()
    for trial in range(12):
        n = int(rng.integers(1, 5))
        ops, ng = sampled_ops(n, 5000 + trial)
        rho0 = random_density(rng, n)
        ref = noise.noisy_run(
            ops_to_circuit(ops, ng, n), model, DensityMatrix(n, rho0)
        )
        v = noise.pauli_vector(rho0, n)
        _kernels._pauli_run(
            v, ops, ng, n, r1, r2,
            _kernels._PTM_PERM1, _kernels._PTM_SIGN1,
            _kernels._PTM_PERM2, _kernels._PTM_SIGN2,
        )
        assert np.max(np.abs(v - noise.pauli_vector(ref.mat, n))) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 4])
def test_noisy_samplers_agree_exactly(n):
    # the Pauli-coefficient sampler is a basis change of the dense-matrix
    # sampler, so matched seeds must give identical packed snapshots
    rng = np.random.default_rng(13 + n)
    rho = np.ascontiguousarray(random_density(rng, n))
    r1 = np.array([0.002, 0.001, 0.0015])
    r2 = np.array([0.03, 0.01, 0.02])
    seeds = snapshot_seeds(17, 0, 400)
    tab_a, srt_a, sv_a = chunk_buffers(n, 400)
    _kernels._acquire_noisy_chunk(n, rho, seeds, r1, r2, tab_a, srt_a, sv_a)
    tab_b, srt_b, sv_b = chunk_buffers(n, 400)
    _kernels._acquire_pauli_chunk(
        n, noise.pauli_vector(rho, n), seeds, r1, r2, tab_b, srt_b, sv_b,
        _kernels._PTM_PERM1, _kernels._PTM_SIGN1,
        _kernels._PTM_PERM2, _kernels._PTM_SIGN2,
    )
    assert np.array_equal(tab_a, tab_b)
    assert np.array_equal(srt_a, srt_b)
    assert np.array_equal(sv_a, sv_b)


@pytest.mark.parametrize("n", [2, 3])
def test_zero_noise_sampler_matches_ideal(n):
    d = 1 << n
    rng = np.random.default_rng(23 + n)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi = (psi / np.linalg.norm(psi)).astype(complex)
    rho = np.ascontiguousarray(np.outer(psi, psi.conj()))
    zeros = np.zeros(3)
    seeds = snapshot_seeds(29, 0, 300)
    tab_a, srt_a, sv_a = chunk_buffers(n, 300)
    _kernels._acquire_ideal_chunk(n, psi, seeds, tab_a, srt_a, sv_a)
    tab_b, srt_b, sv_b = chunk_buffers(n, 300)
    _kernels._acquire_pauli_chunk(
        n, noise.pauli_vector(rho, n), seeds, zeros, zeros, tab_b, srt_b, sv_b,
        _kernels._PTM_PERM1, _kernels._PTM_SIGN1,
        _kernels._PTM_PERM2, _kernels._PTM_SIGN2,
    )
    assert np.array_equal(tab_a, tab_b)
    assert np.array_equal(srt_a, srt_b)
    assert np.array_equal(sv_a, sv_b)


def test_seed_derivation_is_chunk_invariant():
    whole = snapshot_seeds(123, 0, 100)
    parts = np.concatenate(
        [snapshot_seeds(123, 0, 37), snapshot_seeds(123, 37, 63)]
    )
    assert np.array_equal(whole, parts)
    assert len(np.unique(whole)) == 100
