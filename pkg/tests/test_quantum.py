"""Tests for quantum states, measurements, and the Born-rule evaluator."""

from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest

from qnetlocal import (
    Distribution,
    HilbertWiring,
    NetworkConfig,
    OutcomeIndexer,
    PartySpec,
    Povm,
    StateVector,
    bell_state,
    born_distribution,
    coarse_grain,
    computational_povm,
    parse_config,
    rgb4_povm,
    rotated_state,
    tetra_joint_measurement,
    werner,
)
from qnetlocal.quantum import TETRAHEDRON_VECTORS, DensityMatrix, bloch_ket

from oracles import born_probabilities_bruteforce, permutation_matrix

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)

TRIANGLE_DOC = json.dumps(
    {
        "parties": {
            "a1": {"sources": ["lambda1", "lambda3"], "outcomes": 4},
            "a2": {"sources": ["lambda2", "lambda1"], "outcomes": 4},
            "a3": {"sources": ["lambda3", "lambda2"], "outcomes": 4},
        }
    }
)

TRIANGLE_WIRING = HilbertWiring((5, 0, 1, 2, 3, 4))


def triangle() -> NetworkConfig:
    return parse_config(TRIANGLE_DOC)


def reduced_bloch_first_qubit(effect: np.ndarray) -> np.ndarray:
    t = effect.reshape(2, 2, 2, 2)
    red = np.einsum("ijkj->ik", t)
    return np.array([np.trace(red @ s).real for s in PAULI])


class TestBellStates:
    def test_psi_plus_amplitudes(self):
        s = bell_state("psi_plus")
        r = 1 / math.sqrt(2)
        np.testing.assert_allclose(s.amplitudes, [0, r, r, 0], atol=1e-15)

    def test_all_four_orthonormal(self):
        kinds = ["phi_plus", "phi_minus", "psi_plus", "psi_minus"]
        mat = np.array([bell_state(k).amplitudes for k in kinds])
        np.testing.assert_allclose(mat @ mat.conj().T, np.eye(4), atol=1e-15)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown Bell state"):
            bell_state("sigma_plus")


class TestRotatedState:
    def test_theta_zero_is_phi_plus_family_1(self):
        np.testing.assert_allclose(
            rotated_state(0.0, family=1).amplitudes,
            bell_state("phi_plus").amplitudes,
            atol=1e-15,
        )

    def test_theta_pi_is_i_psi_plus(self):
        np.testing.assert_allclose(
            rotated_state(math.pi, family=1).amplitudes,
            1j * bell_state("psi_plus").amplitudes,
            atol=1e-15,
        )

    def test_family_2_endpoints(self):
        np.testing.assert_allclose(
            rotated_state(0.0, family=2).amplitudes,
            bell_state("phi_minus").amplitudes,
            atol=1e-15,
        )
        np.testing.assert_allclose(
            rotated_state(math.pi, family=2).amplitudes,
            1j * bell_state("psi_minus").amplitudes,
            atol=1e-15,
        )

    def test_normalized_and_maximally_entangled_for_random_theta(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            theta = rng.uniform(0, math.pi)
            family = int(rng.integers(1, 3))
            s = rotated_state(theta, family=family)
            assert abs(np.linalg.norm(s.amplitudes) - 1.0) < 1e-12
            psi = s.amplitudes.reshape(2, 2)
            red = psi @ psi.conj().T
            np.testing.assert_allclose(red, np.eye(2) / 2, atol=1e-12)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="theta"):
            rotated_state(-0.1)
        with pytest.raises(ValueError, match="family"):
            rotated_state(0.5, family=3)


class TestWerner:
    def test_v1_is_pure_projector(self):
        s = bell_state("psi_plus")
        rho = werner(s, 1.0)
        np.testing.assert_allclose(
            rho.matrix, np.outer(s.amplitudes, s.amplitudes.conj()), atol=1e-15
        )

    def test_v0_is_maximally_mixed(self):
        rho = werner(bell_state("psi_plus"), 0.0)
        np.testing.assert_allclose(rho.matrix, np.eye(4) / 4, atol=1e-15)

    def test_frozen_eigenvalues_at_half(self):
        rho = werner(bell_state("psi_plus"), 0.5)
        eigs = np.sort(np.linalg.eigvalsh(rho.matrix))
        np.testing.assert_allclose(eigs, [0.125, 0.125, 0.125, 0.625], atol=1e-12)

    def test_rejects_bad_visibility(self):
        with pytest.raises(ValueError, match="visibility"):
            werner(bell_state("psi_plus"), 1.2)


class TestRgb4Povm:
    def test_u1_is_computational_basis(self):
        povm = rgb4_povm(1.0)
        expect = computational_povm(4)
        for a, b in zip(povm.effects, expect.effects):
            np.testing.assert_allclose(a, b, atol=1e-15)

    def test_outcome_1_ket_structure(self):
        u = 0.6
        povm = rgb4_povm(u)
        v = math.sqrt(1 - u * u)
        ket = np.array([0, u, v, 0])
        np.testing.assert_allclose(povm.effects[1], np.outer(ket, ket), atol=1e-14)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="u must be"):
            rgb4_povm(1.0001)

    def test_invariants_random_draws(self):
        # Constructor re-validates completeness/PSD/Hermiticity on every draw.
        rng = np.random.default_rng(5)
        for _ in range(100):
            povm = rgb4_povm(rng.uniform(0, 1))
            total = sum(povm.effects)
            np.testing.assert_allclose(total, np.eye(4), atol=1e-10)


class TestTetraJointMeasurement:
    def test_tetrahedron_geometry(self):
        v = TETRAHEDRON_VECTORS
        np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-15)
        gram = v @ v.T
        off = gram[~np.eye(4, dtype=bool)]
        np.testing.assert_allclose(off, -1 / 3, atol=1e-15)

    def test_bloch_ket_convention(self):
        # <0|v> real and nonnegative; Bloch vector reproduced.
        rng = np.random.default_rng(3)
        for _ in range(50):
            raw = rng.normal(size=3)
            v = raw / np.linalg.norm(raw)
            ket = bloch_ket(v)
            assert abs(ket[0].imag) < 1e-15 and ket[0].real >= 0
            rho = np.outer(ket, ket.conj())
            bloch = np.array([np.trace(rho @ s).real for s in PAULI])
            np.testing.assert_allclose(bloch, v, atol=1e-12)

    def test_reduced_bloch_vectors_scale_with_cos_mu(self):
        # First-qubit Bloch vector of eigenvector b is (sqrt3/2) cos(mu) m_b.
        for mu in (0.0, 0.3, math.pi / 4, math.pi / 2):
            povm = tetra_joint_measurement(mu)
            scale = math.sqrt(3) / 2 * math.cos(mu)
            for b, e in enumerate(povm.effects):
                np.testing.assert_allclose(
                    reduced_bloch_first_qubit(e),
                    scale * TETRAHEDRON_VECTORS[b],
                    atol=1e-12,
                )

    def test_mu_half_pi_maximally_entangled(self):
        povm = tetra_joint_measurement(math.pi / 2)
        for e in povm.effects:
            t = e.reshape(2, 2, 2, 2)
            red = np.einsum("ijkj->ik", t)
            np.testing.assert_allclose(red, np.eye(2) / 2, atol=1e-12)

    def test_invariants_random_draws(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            povm = tetra_joint_measurement(rng.uniform(0, math.pi / 2))
            total = sum(povm.effects)
            np.testing.assert_allclose(total, np.eye(4), atol=1e-10)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="mu must be"):
            tetra_joint_measurement(2.0)


class TestValidationTypes:
    def test_state_vector_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="not normalized"):
            StateVector(np.array([1.0, 1.0]), (2,))

    def test_density_matrix_rejects_non_psd(self):
        mat = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ValueError, match="not PSD"):
            DensityMatrix(mat, (2,))

    def test_density_matrix_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(np.eye(2, dtype=complex), (2,))

    def test_povm_rejects_incomplete(self):
        half = np.eye(2, dtype=complex) / 2
        with pytest.raises(ValueError, match="sum to the identity"):
            Povm((half, half / 2), 2, 2)

    def test_wiring_rejects_non_permutation(self):
        with pytest.raises(ValueError, match="not a permutation"):
            HilbertWiring((0, 0, 1))

    def test_wiring_inverse_composes_to_identity(self):
        w = HilbertWiring((5, 0, 1, 2, 3, 4))
        inv = w.inverse()
        composed = tuple(w.order[inv.order[i]] for i in range(6))
        assert composed == tuple(range(6))
        assert HilbertWiring.identity(6).order == tuple(range(6))


class TestPermutationOracle:
    def test_permutation_matrix_is_unitary_and_acts_on_kets(self):
        order = (2, 0, 1)
        dims = (2, 3, 2)
        perm = permutation_matrix(order, dims)
        np.testing.assert_allclose(perm @ perm.T, np.eye(12), atol=1e-15)
        # |i0 i1 i2> -> slot reading (i2, i0, i1)
        for idx in itertools.product(range(2), range(3), range(2)):
            ket = np.zeros(12)
            ket[np.ravel_multi_index(idx, dims)] = 1.0
            out = perm @ ket
            slot_idx = tuple(idx[p] for p in order)
            slot_dims = tuple(dims[p] for p in order)
            assert out[np.ravel_multi_index(slot_idx, slot_dims)] == 1.0


class TestBornDistribution:
    def test_single_party_phi_plus_computational(self):
        net = NetworkConfig((PartySpec("a1", ("s",), 4),))
        d = born_distribution(
            net,
            [bell_state("phi_plus")],
            [computational_povm(4)],
            HilbertWiring((0, 1)),
        )
        np.testing.assert_allclose(d.probs, [0.5, 0, 0, 0.5], atol=1e-15)

    def test_rgb4_u1_support_structure(self):
        net = triangle()
        d = born_distribution(
            net,
            [bell_state("psi_plus")] * 3,
            [rgb4_povm(1.0)] * 3,
            TRIANGLE_WIRING,
        )
        support = {t for t in d.indexer.all_tuples() if d[t] > 1e-12}
        assert len(support) == 8
        for t in support:
            assert d[t] == pytest.approx(0.125, abs=1e-12)
        assert d[(0, 0, 0)] == 0.0
        # Anti-correlated qubit pairs: a1 = 2(1-c)+a, a2 = 2(1-a)+b, a3 = 2(1-b)+c.
        expect = {
            (2 * (1 - c) + a, 2 * (1 - a) + b, 2 * (1 - b) + c)
            for a in (0, 1)
            for b in (0, 1)
            for c in (0, 1)
        }
        assert support == expect

    def test_elegant_distribution_frozen_class_values(self):
        net = triangle()
        d = born_distribution(
            net,
            [bell_state("psi_minus")] * 3,
            [tetra_joint_measurement(0.0)] * 3,
            TRIANGLE_WIRING,
        )
        for t in d.indexer.all_tuples():
            distinct = len(set(t))
            expect = {1: 25 / 256, 2: 1 / 256, 3: 5 / 256}[distinct]
            assert d[t] == pytest.approx(expect, abs=1e-12)

    def test_matches_bruteforce_on_random_triangle_draws(self):
        rng = np.random.default_rng(17)
        net = triangle()
        for _ in range(10):
            theta = rng.uniform(0, math.pi)
            mu = rng.uniform(0, math.pi / 2)
            u = rng.uniform(0, 1)
            states = [
                rotated_state(theta, family=int(rng.integers(1, 3))) for _ in range(3)
            ]
            povms = [
                tetra_joint_measurement(mu) if rng.random() < 0.5 else rgb4_povm(u)
                for _ in range(3)
            ]
            d = born_distribution(net, states, povms, TRIANGLE_WIRING)
            oracle = born_probabilities_bruteforce(
                net, states, povms, TRIANGLE_WIRING.order
            )
            np.testing.assert_allclose(d.probs, oracle, atol=1e-10)

    def test_mixed_and_pure_paths_agree(self):
        net = triangle()
        povms = [tetra_joint_measurement(0.7)] * 3
        pure = born_distribution(
            net, [bell_state("psi_minus")] * 3, povms, TRIANGLE_WIRING
        )
        mixed = born_distribution(
            net, [werner(bell_state("psi_minus"), 1.0)] * 3, povms, TRIANGLE_WIRING
        )
        np.testing.assert_allclose(pure.probs, mixed.probs, atol=1e-12)

    def test_mixed_path_matches_bruteforce(self):
        rng = np.random.default_rng(23)
        net = triangle()
        for _ in range(5):
            v = rng.uniform(0, 1)
            states = [werner(rotated_state(rng.uniform(0, math.pi)), v)] * 3
            povms = [rgb4_povm(rng.uniform(0, 1))] * 3
            d = born_distribution(net, states, povms, TRIANGLE_WIRING)
            oracle = born_probabilities_bruteforce(
                net, states, povms, TRIANGLE_WIRING.order
            )
            np.testing.assert_allclose(d.probs, oracle, atol=1e-10)

    def test_wiring_choice_changes_nothing_for_symmetric_ring(self):
        # With identical swap-symmetric sources, any consistent ring wiring
        # produces the same distribution.
        net = triangle()
        states = [bell_state("psi_plus")] * 3
        povms = [rgb4_povm(0.8)] * 3
        d1 = born_distribution(net, states, povms, TRIANGLE_WIRING)
        d2 = born_distribution(net, states, povms, HilbertWiring((3, 0, 1, 4, 5, 2)))
        np.testing.assert_allclose(d1.probs, d2.probs, atol=1e-12)

    def test_normalization_and_nonnegativity_random(self):
        rng = np.random.default_rng(31)
        net = triangle()
        for _ in range(10):
            states = [rotated_state(rng.uniform(0, math.pi))] * 3
            povms = [tetra_joint_measurement(rng.uniform(0, math.pi / 2))] * 3
            d = born_distribution(net, states, povms, TRIANGLE_WIRING)
            assert d.probs.min() >= 0.0
            assert d.probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_wrong_counts_raise(self):
        net = triangle()
        states = [bell_state("psi_plus")] * 3
        povms = [rgb4_povm(1.0)] * 3
        with pytest.raises(ValueError, match="expected 3 states"):
            born_distribution(net, states[:2], povms, TRIANGLE_WIRING)
        with pytest.raises(ValueError, match="expected 3 povms"):
            born_distribution(net, states, povms[:2], TRIANGLE_WIRING)
        with pytest.raises(ValueError, match="wiring length"):
            born_distribution(net, states, povms, HilbertWiring((0, 1, 2, 3)))

    def test_outcome_count_mismatch_raises(self):
        net = triangle()
        bad = [computational_povm(2), rgb4_povm(1.0), rgb4_povm(1.0)]
        with pytest.raises(ValueError, match="outcomes"):
            born_distribution(net, [bell_state("psi_plus")] * 3, bad, TRIANGLE_WIRING)

    def test_dimension_mismatch_raises(self):
        net = NetworkConfig((PartySpec("a1", ("s",), 4),))
        # Two-outcome qubit measurement cannot absorb a two-qubit state.
        with pytest.raises(ValueError, match="outcomes|dimension"):
            born_distribution(
                net, [bell_state("phi_plus")], [computational_povm(2)], HilbertWiring((0, 1))
            )


class TestCoarseGrain:
    def test_identity_merge(self):
        d = Distribution.from_array([0.1, 0.2, 0.3, 0.4], (2, 2))
        out = coarse_grain(d, [[0, 1], [0, 1]])
        np.testing.assert_allclose(out.probs, d.probs, atol=1e-15)

    def test_merge_sums_probabilities(self):
        d = Distribution.from_array([0.1, 0.2, 0.3, 0.4], (4,))
        out = coarse_grain(d, [{0: 0, 1: 0, 2: 1, 3: 2}])
        np.testing.assert_allclose(out.probs, [0.3, 0.3, 0.4], atol=1e-15)
        assert out.indexer.shape == (3,)

    def test_pentagon_style_merge_shape(self):
        shape = (4,) * 5
        n = int(np.prod(shape))
        d = Distribution.from_array(np.full(n, 1.0 / n), shape)
        merge = {0: 0, 1: 0, 2: 1, 3: 2}
        out = coarse_grain(d, [merge] * 5)
        assert out.indexer.shape == (3,) * 5
        assert out.probs.sum() == pytest.approx(1.0, abs=1e-12)
        # Merged cell of two old outcomes doubles the uniform weight per axis.
        assert out[(0,) * 5] == pytest.approx(2**5 / n, abs=1e-15)

    def test_rejects_non_surjective(self):
        d = Distribution.from_array([0.25] * 4, (4,))
        with pytest.raises(ValueError, match="not onto"):
            coarse_grain(d, [{0: 0, 1: 0, 2: 2, 3: 2}])

    def test_rejects_missing_entries(self):
        d = Distribution.from_array([0.25] * 4, (4,))
        with pytest.raises(ValueError, match="missing"):
            coarse_grain(d, [{0: 0, 1: 0, 2: 1}])

    def test_rejects_wrong_map_count(self):
        d = Distribution.from_array([0.25] * 4, (2, 2))
        with pytest.raises(ValueError, match="expected 2 merge maps"):
            coarse_grain(d, [[0, 1]])
