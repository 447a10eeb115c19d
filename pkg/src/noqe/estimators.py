"""U-statistics state estimators and matrix-element reconstruction.

Every snapshot materializes to A = (D+1)P - I with P a rank-1 projector, so
the order-m estimators reduce to closed forms in the Gram accumulation
G = sum_a P_a (and, for m = 3, one sandwich accumulation): the ordered
distinct-tuple averages never require an O(n^m) loop. Inclusion-exclusion
over index coincidences gives

    m=2:  (S1^2 - S2) / (n(n-1))
    m=3:  (S1^3 - S2 S1 - S1 S2 - T(S1) + 2 S3) / (n(n-1)(n-2))

with S_k = sum_a A_a^k and T(M) = sum_a A_a M A_a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, EstimateError, UnreliableDivisionError
from .pauli import PauliSum
from .shadows import ShadowDataset

CHUNK = 65536

OVERLAP_FLOOR = 0.05


@dataclass(frozen=True)
class ShadowEstimate:
    """A density-matrix estimate of fixed U-statistics order."""

    matrix: np.ndarray
    m: int
    n: int
    trace: complex

    def __post_init__(self):
        dev = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if dev > 1e-8:
            raise ContractError(f"estimate is not Hermitian (deviation {dev:.2e})")


class ShadowMoments:
    """Pinned state vectors of one dataset, for repeated weighted estimates.

    Bootstrap resampling re-evaluates the closed forms many times with
    multiplicity weights; holding the pulled-back vectors avoids re-unpacking
    the tableaux on every pass.
    """

    def __init__(self, ds: ShadowDataset):
        self.num_qubits = ds.num_qubits
        self.n = len(ds)
        self.svecs = ds.state_vectors()

    def gram(self, counts: np.ndarray | None = None) -> np.ndarray:
        """sum_a c_a P_a as a dense matrix (c = 1 when counts is None)."""
        k = self.svecs
        if counts is None:
            return k.T @ k.conj()
        return (k.T * counts) @ k.conj()

    def sandwich(self, mat: np.ndarray, counts: np.ndarray | None = None):
        """sum_a c_a <s_a|M|s_a> P_a, the rank-1 part of T(M)."""
        k = self.svecs
        quad = np.einsum("ai,ai->a", k.conj(), k @ mat.T)
        if counts is not None:
            quad = quad * counts
        return (k.T * quad) @ k.conj()

    def ustat(self, m: int, counts: np.ndarray | None = None) -> np.ndarray:
        """Closed-form order-m estimate, optionally with multiplicity weights."""
        n = self.n if counts is None else int(counts.sum())
        if not 1 <= m <= 3:
            raise ContractError(f"U-statistics order {m} not in {{1, 2, 3}}")
        if n < m:
            raise EstimateError(f"order {m} needs at least {m} snapshots, got {n}")
        d = 1 << self.num_qubits
        eye = np.eye(d)
        gm = self.gram(counts) / n  # mean projector
        s1 = (d + 1) * gm - eye  # S1 / n
        if m == 1:
            e = s1
        elif m == 2:
            s2 = (d * d - 1) * gm + eye
            e = (s1 @ s1 - s2 / n) * (n / (n - 1.0))
        else:
            s2 = (d * d - 1) * gm + eye
            s3 = (d**3 + 1) * gm - eye
            w = self.sandwich(s1, counts) / n
            t = (d + 1) ** 2 * w - (d + 1) * (gm @ s1 + s1 @ gm) + s1
            e = (
                s1 @ s1 @ s1
                - (s2 @ s1 + s1 @ s2 + t) / n
                + 2.0 * s3 / (n * n)
            ) * (n * n / ((n - 1.0) * (n - 2.0)))
        return (e + e.conj().T) / 2


def u_estimate(ds: ShadowDataset, m: int) -> ShadowEstimate:
    """Order-m U-statistics estimate of the dataset's density matrix."""
    mat = ShadowMoments(ds).ustat(m)
    return ShadowEstimate(mat, m, len(ds), complex(np.trace(mat)))


def _obs_matrix(obs, num_qubits: int) -> np.ndarray:
    if isinstance(obs, PauliSum):
        if obs.num_qubits != num_qubits:
            raise ContractError(
                f"observable acts on {obs.num_qubits} qubits, state on {num_qubits}"
            )
        return obs.materialize()
    mat = np.asarray(obs, dtype=complex)
    d = 1 << num_qubits
    if mat.shape != (d, d):
        raise ContractError(f"observable shape {mat.shape} does not match {d}x{d}")
    return mat


def estimate_linear(ds: ShadowDataset, obs, m: int) -> complex:
    """Tr(O rho_hat) from one dataset."""
    est = u_estimate(ds, m)
    return complex(np.trace(_obs_matrix(obs, ds.num_qubits) @ est.matrix))


def _check_independent(ds_a: ShadowDataset, ds_b: ShadowDataset) -> None:
    if ds_a.num_qubits != ds_b.num_qubits:
        raise ContractError("datasets have different qubit counts")
    if ds_a is ds_b or ds_a == ds_b:
        raise ContractError(
            "bilinear estimation needs two independent datasets, got the same one"
        )


def estimate_bilinear(
    ds_a: ShadowDataset,
    ds_b: ShadowDataset,
    obs,
    m: int,
    symmetrize: bool = False,
) -> complex:
    """Tr(O rho_hat_a rho_hat_b) from two independent datasets.

    With symmetrize, returns Tr(O rho_a rho_b) + Tr(O rho_b rho_a), which is
    real for Hermitian O and states.
    """
    _check_independent(ds_a, ds_b)
    ea = u_estimate(ds_a, m).matrix
    eb = u_estimate(ds_b, m).matrix
    o = _obs_matrix(obs, ds_a.num_qubits)
    val = complex(np.trace(o @ ea @ eb))
    if symmetrize:
        val = val + complex(np.trace(o @ eb @ ea))
    return val


def distill(est: ShadowEstimate) -> ShadowEstimate:
    """Trace-normalize an estimate, turning functionals into ratio estimators.

    For an estimate contaminated by a component orthogonal to the dominant
    eigenstate, the normalized power Tr(O rho^m)/Tr(rho^m) suppresses the
    contamination like (eps/(1-eps))^m.
    """
    if abs(est.trace) < 1e-6:
        raise EstimateError(
            f"cannot normalize an estimate with near-zero trace {est.trace:.2e}"
        )
    mat = est.matrix / est.trace.real if est.trace.imag == 0 else est.matrix / est.trace
    mat = (mat + mat.conj().T) / 2
    return ShadowEstimate(mat, est.m, est.n, complex(np.trace(mat)))


@dataclass(frozen=True)
class OverlapEstimate:
    """Reconstructed complex overlap with its consistency diagnostics."""

    value: complex
    magnitude2: float
    residual: float


def overlap_from_estimates(
    est_i: ShadowEstimate,
    estr_i: ShadowEstimate,
    esti_i: ShadowEstimate,
    est_j: ShadowEstimate,
    estr_j: ShadowEstimate,
) -> OverlapEstimate:
    """Overlap reconstruction from already-computed state estimates."""
    ei, eri, eii, ej, erj = (
        e.matrix for e in (est_i, estr_i, esti_i, est_j, estr_j)
    )
    s_abs2 = float(np.real(np.trace(ei @ ej)))
    base = 0.5 * (1.0 + s_abs2)
    re = 2.0 * float(np.real(np.trace(eri @ erj))) - base
    im = 2.0 * float(np.real(np.trace(eii @ erj))) - base
    value = complex(re, im)
    return OverlapEstimate(value, s_abs2, abs(abs(value) ** 2 - s_abs2))


def reconstruct_overlap(
    ds_i: ShadowDataset,
    dsr_i: ShadowDataset,
    dsi_i: ShadowDataset,
    ds_j: ShadowDataset,
    dsr_j: ShadowDataset,
    m: int,
    distill_flag: bool = False,
) -> OverlapEstimate:
    """Complex overlap <psi_i|psi_j> from reference and auxiliary datasets.

    |S|^2 comes from the reference pair; the real and imaginary parts come
    from the auxiliary superposition states:

        Re S = 2 Tr(rho_i^R rho_j^R) - (1 + |S|^2)/2
        Im S = 2 Tr(rho_i^I rho_j^R) - (1 + |S|^2)/2
    """
    for a, b in ((ds_i, ds_j), (dsr_i, dsr_j), (dsi_i, dsr_j)):
        _check_independent(a, b)
    ests = [u_estimate(ds, m) for ds in (ds_i, dsr_i, dsi_i, ds_j, dsr_j)]
    if distill_flag:
        ests = [distill(e) for e in ests]
    return overlap_from_estimates(*ests)


def reconstruct_hamiltonian_element(
    ds_i: ShadowDataset,
    ds_j: ShadowDataset,
    ham: PauliSum,
    s_ij: complex,
    m: int,
    distill_flag: bool = False,
) -> complex:
    """H_ij = <psi_i|H|psi_j> recovered from Tr(H rho_i rho_j) and S_ij.

    For pure states Tr(H rho_i rho_j) = S_ij <psi_j|H|psi_i>, so the element
    is the conjugate of the quotient (the conjugation is invisible for
    real-valued chemistry Hamiltonians but pinned by the oracle tests).
    """
    _check_independent(ds_i, ds_j)
    ea = u_estimate(ds_i, m)
    eb = u_estimate(ds_j, m)
    if distill_flag:
        ea, eb = distill(ea), distill(eb)
    o = _obs_matrix(ham, ds_i.num_qubits)
    num = complex(np.trace(o @ ea.matrix @ eb.matrix))
    if abs(s_ij) < OVERLAP_FLOOR:
        raise UnreliableDivisionError(
            f"overlap magnitude {abs(s_ij):.3g} below the safe-division floor "
            f"{OVERLAP_FLOOR}",
            num,
            complex(s_ij),
        )
    return complex(np.conj(num / s_ij))


def element_from_estimates(
    est_i: ShadowEstimate, est_j: ShadowEstimate, ham_mat: np.ndarray, s_ij: complex
) -> complex:
    """Same quotient as reconstruct_hamiltonian_element, from cached estimates."""
    num = complex(np.trace(ham_mat @ est_i.matrix @ est_j.matrix))
    if abs(s_ij) < OVERLAP_FLOOR:
        raise UnreliableDivisionError(
            f"overlap magnitude {abs(s_ij):.3g} below the safe-division floor "
            f"{OVERLAP_FLOOR}",
            num,
            complex(s_ij),
        )
    return complex(np.conj(num / s_ij))


def bootstrap(fn, moments: list[ShadowMoments], resamples: int = 200, seed: int = 0):
    """Nonparametric bootstrap over snapshots.

    fn maps one multiplicity-count vector per dataset to a scalar (or small
    vector); returns (point value at unit counts, per-component standard
    error over the resamples).
    """
    if resamples < 2:
        raise ContractError("bootstrap needs at least 2 resamples")
    rng = np.random.default_rng(seed)
    point = np.asarray(fn(*(None for _ in moments)))
    vals = np.empty((resamples,) + point.shape, dtype=point.dtype)
    for r in range(resamples):
        counts = [
            rng.multinomial(mo.n, np.full(mo.n, 1.0 / mo.n)).astype(float)
            for mo in moments
        ]
        vals[r] = np.asarray(fn(*counts))
    return point, vals.std(axis=0, ddof=1)


def bootstrap_linear(
    ds: ShadowDataset, obs, m: int, resamples: int = 200, seed: int = 0
):
    """(value, SE) for Tr(O rho_hat) by resampling the dataset."""
    mo = ShadowMoments(ds)
    o = _obs_matrix(obs, ds.num_qubits)

    def fn(counts):
        return np.real(np.trace(o @ mo.ustat(m, counts)))

    value, se = bootstrap(fn, [mo], resamples, seed)
    return complex(value), float(se)
