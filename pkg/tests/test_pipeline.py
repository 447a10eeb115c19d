"""Circuit builders, interference-test estimation, matrix assembly, GEVP."""

import json

import numpy as np
import pytest

from noqe import sim
from noqe.errors import ContractError, DegenerateSubspaceError, ParseError
from noqe.pipeline import (
    ElementEstimate,
    HadamardRunner,
    ReferenceSpec,
    ansatz_circuit,
    assemble_matrices,
    build_auxiliary_circuit,
    build_hadamard_circuit,
    build_reference_circuit,
    compile_cswaps,
    exact_matrices,
    h2_config_path,
    h2_hamiltonian,
    h2_measurement_groups,
    h2_metadata,
    h2_reference_specs,
    hadamard_estimate_elements,
    load_config,
    noqe_energy,
    resource_report,
    solve_gevp,
)
from noqe.pauli import PauliSum
from noqe.sim import Circuit, run_circuit


def random_ansatz(rng, num_qubits=4, subroutines=2):
    """Particle-conserving ansatz with random angles (certified by builder)."""
    per = (num_qubits - 1) + num_qubits * (num_qubits - 1) // 2
    angles = [rng.uniform(-2.0, 2.0, size=per).tolist() for _ in range(subroutines)]
    return ansatz_circuit(num_qubits, angles)


def state_of(circ):
    return run_circuit(circ).amps


def hamming(idx, n):
    return bin(idx & ((1 << n) - 1)).count("1")


# ---------------------------------------------------------------------------
# reference circuits


class TestReferenceCircuit:
    def test_identity_ansatz_gives_occupation_string(self):
        spec = ReferenceSpec("hf", 4, Circuit(4))
        vec = state_of(build_reference_circuit(spec))
        expect = np.zeros(16, dtype=complex)
        expect[0b1100] = 1.0
        np.testing.assert_allclose(vec, expect, atol=1e-12)

    def test_zero_angles_act_as_identity(self):
        ansatz = ansatz_circuit(4, [[0.0] * 9])
        spec = ReferenceSpec("hf", 4, ansatz)
        vec = state_of(build_reference_circuit(spec))
        assert abs(vec[0b1100]) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_nonzero_angles_preserve_hamming_weight(self, seed):
        rng = np.random.default_rng(seed)
        spec = ReferenceSpec("r", 4, random_ansatz(rng))
        vec = state_of(build_reference_circuit(spec))
        support = np.flatnonzero(np.abs(vec) > 1e-12)
        assert all(hamming(i, 4) == 2 for i in support)

    def test_odd_qubit_count_rejected(self):
        with pytest.raises(ContractError):
            ReferenceSpec("bad", 3, Circuit(3))

    def test_non_particle_conserving_ansatz_rejected(self):
        leaky = Circuit(4).add("X", 3)
        with pytest.raises(ContractError):
            ReferenceSpec("bad", 4, leaky)
        tilted = Circuit(4).add("RY", 0, params=(0.3,))
        with pytest.raises(ContractError):
            ReferenceSpec("bad", 4, tilted)

    def test_custom_occupation(self):
        spec = ReferenceSpec("alt", 4, Circuit(4), hf_occupation="1010")
        vec = state_of(build_reference_circuit(spec))
        assert abs(vec[0b1010]) == pytest.approx(1.0, abs=1e-12)

    def test_subroutine_shape(self):
        # one subroutine at N=4: a 3-rotation chain plus 6 controlled phases
        circ = ansatz_circuit(4, [[0.1] * 9])
        names = [g.name for g in circ.gates]
        assert names.count("GIVENS") == 3
        assert names.count("CRZ") == 6


# ---------------------------------------------------------------------------
# auxiliary circuits


class TestAuxiliaryCircuit:
    def test_kind_r_identity_ansatz(self):
        spec = ReferenceSpec("hf", 4, Circuit(4))
        vec = state_of(build_auxiliary_circuit(spec, "R"))
        expect = np.zeros(16, dtype=complex)
        expect[0] = expect[0b1100] = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(vec, expect, atol=1e-12)

    def test_kind_i_identity_ansatz(self):
        spec = ReferenceSpec("hf", 4, Circuit(4))
        vec = state_of(build_auxiliary_circuit(spec, "I"))
        expect = np.zeros(16, dtype=complex)
        expect[0] = 1.0 / np.sqrt(2.0)
        expect[0b1100] = 1.0j / np.sqrt(2.0)
        np.testing.assert_allclose(vec, expect, atol=1e-12)

    @pytest.mark.parametrize("kind,phase", [("R", 1.0), ("I", 1.0j)])
    def test_random_ansatz_fidelity(self, kind, phase):
        # invariant: 100 random particle-conserving ansatzes, fidelity 1-1e-10
        rng = np.random.default_rng(17 if kind == "R" else 18)
        worst = 1.0
        for _ in range(100):
            spec = ReferenceSpec("r", 4, random_ansatz(rng, subroutines=1))
            psi = state_of(build_reference_circuit(spec))
            target = np.zeros(16, dtype=complex)
            target[0] = 1.0
            target = (target + phase * psi) / np.sqrt(2.0)
            got = state_of(build_auxiliary_circuit(spec, kind))
            worst = min(worst, abs(np.vdot(target, got)) ** 2)
        assert worst >= 1.0 - 1e-10

    def test_bad_kind_rejected(self):
        spec = ReferenceSpec("hf", 4, Circuit(4))
        with pytest.raises(ContractError):
            build_auxiliary_circuit(spec, "Q")

    def test_vacuum_occupation_rejected(self):
        spec = ReferenceSpec("vac", 4, Circuit(4), hf_occupation="0000")
        with pytest.raises(ContractError):
            build_auxiliary_circuit(spec, "R")


# ---------------------------------------------------------------------------
# interference-test circuit


def ctrl_z_expectation(circ, num_qubits):
    """<Z on the last qubit> of the circuit's output state."""
    vec = state_of(circ)
    idx = np.arange(vec.size)
    signs = 1.0 - 2.0 * (idx & 1).astype(float)  # last qubit is least significant
    return float(np.sum(signs * np.abs(vec) ** 2))


class TestHadamardCircuit:
    def test_qubit_count(self):
        spec = ReferenceSpec("hf", 4, Circuit(4))
        assert build_hadamard_circuit(spec, spec, 0.0).num_qubits == 9

    def test_identity_pair_gives_unit_overlap(self):
        spec = ReferenceSpec("hf", 4, Circuit(4))
        circ = build_hadamard_circuit(spec, spec, 0.0)
        assert ctrl_z_expectation(circ, 9) == pytest.approx(1.0, abs=1e-10)

    def test_register_mismatch_rejected(self):
        a = ReferenceSpec("a", 4, Circuit(4))
        b = ReferenceSpec("b", 2, Circuit(2))
        with pytest.raises(ContractError):
            build_hadamard_circuit(a, b, 0.0)

    @pytest.mark.parametrize("seed", range(4))
    def test_ancilla_z_equals_re_overlap(self, seed):
        # <I (x) Z> = Re<psi_i|psi_j> to 1e-10, nontrivial ansatzes
        rng = np.random.default_rng(30 + seed)
        si = ReferenceSpec("i", 4, random_ansatz(rng, subroutines=1))
        sj = ReferenceSpec("j", 4, random_ansatz(rng, subroutines=1))
        vi = state_of(build_reference_circuit(si))
        vj = state_of(build_reference_circuit(sj))
        got = ctrl_z_expectation(build_hadamard_circuit(si, sj, 0.0), 9)
        assert got == pytest.approx(np.vdot(vi, vj).real, abs=1e-10)

    def test_theta_half_pi_reads_imaginary_part(self):
        rng = np.random.default_rng(77)
        si = ReferenceSpec("i", 4, random_ansatz(rng, subroutines=1))
        sj = ReferenceSpec("j", 4, random_ansatz(rng, subroutines=1))
        vi = state_of(build_reference_circuit(si))
        vj = state_of(build_reference_circuit(sj))
        got = ctrl_z_expectation(build_hadamard_circuit(si, sj, np.pi / 2), 9)
        # Re(e^{i pi/2} <i|j>) = -Im<i|j>
        assert got == pytest.approx(-np.vdot(vi, vj).imag, abs=1e-10)

    def test_compiled_cswaps_preserve_state(self):
        rng = np.random.default_rng(5)
        si = ReferenceSpec("i", 4, random_ansatz(rng, subroutines=1))
        sj = ReferenceSpec("j", 4, random_ansatz(rng, subroutines=1))
        circ = build_hadamard_circuit(si, sj, 0.3)
        raw = state_of(circ)
        compiled = state_of(compile_cswaps(circ))
        phase = np.vdot(raw, compiled)
        assert abs(abs(phase) - 1.0) < 1e-10
        np.testing.assert_allclose(compiled, phase * raw, atol=1e-9)


# ---------------------------------------------------------------------------
# element estimation


@pytest.fixture(scope="module")
def h2():
    ham = h2_hamiltonian()
    specs = h2_reference_specs()
    groups = h2_measurement_groups()
    return ham, specs, groups


class TestElementEstimation:
    def test_exact_mode_matches_statevector_oracle(self, h2):
        ham, specs, _ = h2
        vi = state_of(build_reference_circuit(specs[0]))
        vj = state_of(build_reference_circuit(specs[1]))
        hmat = ham.materialize()
        el = hadamard_estimate_elements(
            specs[0], specs[1], ham, shots=1, exact=True
        )
        assert isinstance(el, ElementEstimate)
        assert el.s == pytest.approx(np.vdot(vi, vj), abs=1e-10)
        assert el.h == pytest.approx(np.vdot(vi, hmat @ vj), abs=1e-10)

    def test_grouped_exact_mode_within_symmetry_tolerance(self, h2):
        # the group table trades per-word measurements for a symmetry that
        # the fitted ansatz satisfies to ~1e-7; the fast path inherits that
        ham, specs, groups = h2
        vi = state_of(build_reference_circuit(specs[0]))
        vj = state_of(build_reference_circuit(specs[1]))
        hmat = ham.materialize()
        el = hadamard_estimate_elements(
            specs[0], specs[1], ham, shots=1, groups=groups, exact=True
        )
        assert el.s == pytest.approx(np.vdot(vi, vj), abs=1e-7)
        assert el.h == pytest.approx(np.vdot(vi, hmat @ vj), abs=1e-6)

    def test_exact_diagonal_matches_oracle(self, h2):
        ham, specs, groups = h2
        v = state_of(build_reference_circuit(specs[0]))
        hmat = ham.materialize()
        el = hadamard_estimate_elements(
            specs[0], specs[0], ham, shots=1, exact=True
        )
        assert el.h.real == pytest.approx(np.vdot(v, hmat @ v).real, abs=1e-10)
        assert el.s == pytest.approx(1.0, abs=1e-12)
        grouped = hadamard_estimate_elements(
            specs[0], specs[0], ham, shots=1, groups=groups, exact=True
        )
        assert grouped.h.real == pytest.approx(el.h.real, abs=1e-6)

    def test_grouped_setting_counts(self, h2):
        # 27 words collapse to 5 off-diagonal settings and 2 diagonal ones
        ham, specs, groups = h2
        off = HadamardRunner(specs[0], specs[1], ham, groups=groups)
        assert off.settings == 5
        diag = HadamardRunner(specs[0], specs[0], ham, groups=groups)
        assert diag.settings == 2

    def test_ungrouped_fallback_counts(self, h2):
        ham, specs, _ = h2
        off = HadamardRunner(specs[0], specs[1], ham)
        assert off.settings > 5

    def test_sampled_estimate_converges(self, h2):
        ham, specs, groups = h2
        exact = hadamard_estimate_elements(
            specs[0], specs[1], ham, shots=1, groups=groups, exact=True
        )
        el = hadamard_estimate_elements(
            specs[0], specs[1], ham, shots=200_000, groups=groups, seed=5
        )
        assert abs(el.s - exact.s) < 4 * el.s_se + 1e-3
        assert abs(el.h - exact.h) < 4 * el.h_se + 1e-3

    def test_se_scales_as_root_shots(self, h2):
        # log-log slope of the Re S scatter vs shots, -0.5 +/- 0.1
        ham, specs, groups = h2
        runner = HadamardRunner(specs[0], specs[1], ham, groups=groups)
        exact = runner.exact_elements().s.real
        levels = (1_000, 10_000, 100_000)
        scatter = []
        for li, shots in enumerate(levels):
            errs = [
                runner.estimate(shots, seed=1000 * li + r).s.real - exact
                for r in range(30)
            ]
            scatter.append(np.std(errs, ddof=1))
        slope = np.polyfit(np.log10(levels), np.log10(scatter), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.1)

    def test_too_few_shots_rejected(self, h2):
        ham, specs, groups = h2
        with pytest.raises(ContractError):
            hadamard_estimate_elements(
                specs[0], specs[1], ham, shots=3, groups=groups
            )


# ---------------------------------------------------------------------------
# matrix assembly


class TestAssembleMatrices:
    def test_single_reference(self, h2):
        ham, specs, _ = h2
        est = assemble_matrices([specs[0]], ham, budget=3000, seed=1)
        assert est.s.shape == (1, 1)
        assert est.s[0, 0] == pytest.approx(1.0)
        v = state_of(build_reference_circuit(specs[0]))
        truth = np.vdot(v, ham.materialize() @ v).real
        assert abs(est.h[0, 0].real - truth) < 5 * est.h_se[0, 0] + 0.05

    def test_two_reference_shapes(self, h2):
        ham, specs, groups = h2
        est = assemble_matrices(specs, ham, budget=2000, seed=2, groups=groups)
        assert est.s.shape == est.h.shape == (2, 2)
        assert est.labels == ("ref1", "ref2")
        np.testing.assert_allclose(est.h, est.h.conj().T, atol=1e-12)
        np.testing.assert_allclose(np.diag(est.s), [1.0, 1.0], atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_cross_method_agreement(self, h2, seed):
        ham, specs, groups = h2
        exact = exact_matrices(specs, ham)
        sh = assemble_matrices(
            specs, ham, method="shadow", budget=60_000, seed=seed
        )
        ha = assemble_matrices(
            specs, ham, method="hadamard", budget=60_000, seed=seed, groups=groups
        )
        for a, b in ((sh.s[0, 1], ha.s[0, 1]), (sh.h[0, 1], ha.h[0, 1])):
            combined = np.hypot(
                sh.s_se[0, 1] + sh.h_se[0, 1], ha.s_se[0, 1] + ha.h_se[0, 1]
            )
            assert abs(a - b) < 3.5 * combined + 0.02
        del exact

    def test_supplied_datasets_match_inline_acquisition(self, h2):
        ham, specs, _ = h2
        inline = assemble_matrices(specs, ham, budget=4000, seed=9)
        # recording and replaying the same acquisition must be equivalent
        from noqe import shadows
        from noqe.pipeline import (
            build_auxiliary_circuit as aux,
            build_reference_circuit as refc,
        )
        from noqe.seeding import derive

        datasets = {}
        for i, sp in enumerate(specs):
            preps = (refc(sp), aux(sp, "R"), aux(sp, "I"))
            datasets[sp.label] = tuple(
                shadows.acquire(p, 4000, rng=derive(9, 1, i, k),
                                label=f"{sp.label}:{tag}")
                for k, (p, tag) in enumerate(zip(preps, ("state", "re", "im")))
            )
        replay = assemble_matrices(specs, ham, budget=4000, seed=9,
                                   datasets=datasets)
        np.testing.assert_allclose(replay.s, inline.s, atol=1e-12)
        np.testing.assert_allclose(replay.h, inline.h, atol=1e-12)

    def test_bad_method_rejected(self, h2):
        ham, specs, _ = h2
        with pytest.raises(ContractError):
            assemble_matrices(specs, ham, method="teleport")

    def test_duplicate_labels_rejected(self, h2):
        ham, specs, _ = h2
        twin = ReferenceSpec("ref1", 4, specs[1].ansatz)
        with pytest.raises(ContractError):
            assemble_matrices([specs[0], twin], ham, budget=100)


# ---------------------------------------------------------------------------
# generalized eigenvalue solve


class TestSolveGevp:
    def test_orthonormal_diagonal(self):
        res = solve_gevp((np.diag([1.0, 2.0]).astype(complex), np.eye(2)))
        np.testing.assert_allclose(res.energies, [1.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(
            np.abs(res.coefficients), np.eye(2), atol=1e-10
        )
        assert res.retained_dim == 2
        assert res.discarded.size == 0

    @pytest.mark.parametrize(
        "a,b,s", [(-1.0, -0.4, 0.6), (0.3, 0.2, -0.5), (-2.0, 0.7, 0.9)]
    )
    def test_symmetric_two_by_two_analytic(self, a, b, s):
        h = np.array([[a, b], [b, a]], dtype=complex)
        ov = np.array([[1.0, s], [s, 1.0]], dtype=complex)
        res = solve_gevp((h, ov))
        expect = sorted(((a + b) / (1 + s), (a - b) / (1 - s)))
        np.testing.assert_allclose(res.energies, expect, atol=1e-10)

    def test_near_singular_overlap_discards_one_direction(self):
        s = np.array([[1.0, 0.99999], [0.99999, 1.0]], dtype=complex)
        h = np.array([[-1.0, -0.9], [-0.9, -1.0]], dtype=complex)
        res = solve_gevp((h, s), s_min=1e-4)
        assert res.retained_dim == 1
        assert res.discarded.size == 1
        assert res.discarded[0] == pytest.approx(1e-5, rel=1e-3)

    def test_all_directions_discarded_raises(self):
        s = 1e-7 * np.eye(2, dtype=complex)
        h = np.eye(2, dtype=complex)
        with pytest.raises(DegenerateSubspaceError):
            solve_gevp((h, s), s_min=1e-4)

    def test_exact_inputs_have_tiny_residuals(self, h2):
        ham, specs, _ = h2
        res = solve_gevp(exact_matrices(specs, ham))
        assert np.all(res.residuals <= 1e-8)
        assert np.all(np.diff(res.energies) >= 0)

    def test_variational_window(self, h2):
        # retained energies stay inside the orthogonalized spectrum bounds
        ham, specs, groups = h2
        est = assemble_matrices(
            specs, ham, method="hadamard", budget=5000, seed=3, groups=groups
        )
        res = solve_gevp(est)
        evals = np.linalg.eigvalsh(ham.materialize())
        margin = 0.5  # sampled matrices need not be strictly variational
        assert res.energies[0] > evals[0] - margin
        assert res.energies[-1] < evals[-1] + margin

    def test_bad_s_min_rejected(self):
        with pytest.raises(ContractError):
            solve_gevp((np.eye(2, dtype=complex), np.eye(2)), s_min=1.5)


# ---------------------------------------------------------------------------
# end-to-end and configs


class TestConfigAndEnergy:
    def test_exact_mode_equals_library_gevp(self, h2):
        ham, specs, _ = h2
        report = noqe_energy(h2_config_path(), exact=True)
        direct = solve_gevp(exact_matrices(specs, ham))
        assert report["ground_energy"] == direct.energies[0]
        assert report["exact"] is True

    def test_report_fields(self):
        report = noqe_energy(h2_config_path(), exact=True)
        for key in (
            "energies", "s", "h", "s_se", "h_se", "resources", "timing",
            "retained_dim", "labels", "unit",
        ):
            assert key in report
        assert report["resources"]["two_qubit_ratio"] <= 0.6

    def test_config_defaults_filled(self):
        cfg = load_config(h2_config_path())
        for key in ("method", "budget", "estimator_m", "distill", "noise",
                    "s_min", "seed"):
            assert key in cfg

    @pytest.mark.parametrize(
        "patch",
        [
            {"method": "magic"},
            {"budget": 0},
            {"budget": "many"},
            {"estimator_m": 5},
            {"s_min": 2.0},
            {"references": []},
            {"references": [{"label": "x"}]},
            {"noise": "strong"},
        ],
    )
    def test_invalid_configs_rejected(self, patch):
        cfg = json.load(open(h2_config_path()))
        cfg.update(patch)
        with pytest.raises(ParseError):
            load_config(cfg, base_dir=None)

    def test_missing_required_keys_rejected(self):
        with pytest.raises(ParseError):
            load_config({"references": [{"label": "a", "circuit": "c.json"}]})
        with pytest.raises(ParseError):
            load_config({"hamiltonian": "h.json"})

    def test_unreadable_config_path(self, tmp_path):
        with pytest.raises(ParseError):
            load_config(str(tmp_path / "missing.json"))


# ---------------------------------------------------------------------------
# bundled data


class TestBundledSystem:
    def test_hamiltonian_term_count_and_ground_state(self):
        ham = h2_hamiltonian()
        assert ham.term_count == 27
        evals = np.linalg.eigvalsh(ham.materialize())
        assert evals[0] == pytest.approx(-1.054, abs=2e-3)

    def test_two_reference_energy_brackets_ground_state(self, h2):
        ham, specs, _ = h2
        res = solve_gevp(exact_matrices(specs, ham))
        evals = np.linalg.eigvalsh(ham.materialize())
        assert res.energies[0] >= evals[0] - 1e-9
        assert res.energies[0] == pytest.approx(evals[0], abs=2e-4)

    def test_metadata_consistency(self):
        meta = h2_metadata()
        specs = h2_reference_specs()
        assert [s.label for s in specs] == ["ref1", "ref2"]
        assert meta["reference_overlap"] == pytest.approx(0.8796, abs=1e-3)
        ham = h2_hamiltonian()
        res = solve_gevp(exact_matrices(specs, ham))
        assert res.energies[0] == pytest.approx(
            meta["energies"]["exact_two_reference"], abs=1e-6
        )
        assert meta["energies"]["full_ci"] == pytest.approx(
            np.linalg.eigvalsh(ham.materialize())[0], abs=1e-9
        )

    def test_groups_cover_hamiltonian(self, h2):
        ham, _, groups = h2
        words = {w for w, _ in ham.terms}
        covered = set()
        for group in groups["offdiag"]["groups"]:
            covered.update(group["members"])
        assert words <= covered
        diag = set(groups["diag"]["deterministic"]) | set(groups["diag"]["zero"])
        for group in groups["diag"]["groups"]:
            diag.update(group["members"])
        assert words <= diag


# ---------------------------------------------------------------------------
# resource census


class TestResources:
    def test_cswap_compiles_to_seven_two_qubit_natives(self):
        circ = Circuit(3).add("CSWAP", 0, 1, 2)
        assert resource_report(circ).two_qubit == 7

    def test_subroutine_two_qubit_count(self):
        circ = ansatz_circuit(4, [[0.1] * 9])
        # 3 Givens at 2 natives each plus 6 controlled phases at 1 each
        assert resource_report(circ).two_qubit == 12

    def test_reference_vs_baseline_ratio(self, h2):
        _, specs, _ = h2
        ref = max(
            resource_report(build_reference_circuit(sp)).two_qubit
            for sp in specs
        )
        base = resource_report(
            build_hadamard_circuit(specs[0], specs[1], 0.0)
        ).two_qubit
        assert ref / base <= 0.6
