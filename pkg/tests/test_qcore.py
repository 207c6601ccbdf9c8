import math

import numpy as np
import pytest

from entb92.qcore import (
    DensityMatrix,
    Operator,
    Povm,
    StateVector,
    apply_channel,
    born_probabilities,
    identity,
    partial_trace,
    tensor,
)

RNG = np.random.default_rng(20260816)


def random_ket(rng, n=2):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_density(rng, n=2):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


class TestStateVector:
    def test_accepts_normalized(self):
        sv = StateVector(np.array([1.0, 1.0]) / math.sqrt(2))
        assert sv.dim == 2
        assert sv.amplitudes.shape == (2,)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            StateVector(np.array([1.0, 1.0]))

    def test_rejects_bad_dim(self):
        with pytest.raises(ValueError):
            StateVector(np.ones(3) / math.sqrt(3))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            StateVector(np.array([np.nan, 0.0]))

    def test_amplitudes_read_only(self):
        sv = StateVector(np.array([1.0, 0.0], dtype=complex))
        with pytest.raises(ValueError):
            sv.amplitudes[0] = 0.5

    def test_overlap(self):
        a = StateVector(np.array([1.0, 0.0], dtype=complex))
        b = StateVector(np.array([1.0, 1.0]) / math.sqrt(2))
        assert b.overlap(a) == pytest.approx(1 / math.sqrt(2))

    def test_to_density_is_projector(self):
        for _ in range(20):
            sv = StateVector(random_ket(RNG))
            m = sv.to_density().matrix
            np.testing.assert_allclose(m @ m, m, atol=1e-12)
            assert np.trace(m).real == pytest.approx(1.0)


class TestDensityMatrix:
    def test_accepts_mixed_state(self):
        dm = DensityMatrix(np.eye(2) / 2)
        assert dm.trace == pytest.approx(1.0)
        assert not dm.subnormalized

    def test_rejects_nonhermitian(self):
        m = np.array([[0.5, 0.3], [0.1, 0.5]], dtype=complex)
        with pytest.raises(ValueError):
            DensityMatrix(m)

    def test_rejects_wrong_trace(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        m = np.array([[1.2, 0.0], [0.0, -0.2]], dtype=complex)
        with pytest.raises(ValueError):
            DensityMatrix(m)

    def test_subnormalized_flag(self):
        dm = DensityMatrix(0.3 * np.eye(2) / 2, subnormalized=True)
        assert dm.trace == pytest.approx(0.3)
        # trace above one is out of range even when subnormalized
        with pytest.raises(ValueError):
            DensityMatrix(1.5 * np.eye(2) / 2, subnormalized=True)

    def test_matrix_read_only(self):
        dm = DensityMatrix(np.eye(2) / 2)
        with pytest.raises(ValueError):
            dm.matrix[0, 0] = 1.0


class TestPovm:
    def test_complete_projective_pair(self):
        p0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        povm = Povm([p0, np.eye(2) - p0], labels=("up", "down"))
        assert len(povm) == 2
        assert povm.labels == ("up", "down")

    def test_rejects_incomplete(self):
        p0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        with pytest.raises(ValueError):
            Povm([p0, 0.5 * (np.eye(2) - p0)], labels=("a", "b"))

    def test_rejects_nonpositive_element(self):
        p0 = np.array([[1.5, 0.0], [0.0, 0.0]], dtype=complex)
        with pytest.raises(ValueError):
            Povm([p0, np.eye(2) - p0], labels=("a", "b"))

    def test_rejects_label_mismatch(self):
        p0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        with pytest.raises(ValueError):
            Povm([p0, np.eye(2) - p0], labels=("only",))


class TestTensor:
    def test_state_kron_order(self):
        a = StateVector(np.array([1.0, 0.0], dtype=complex))
        b = StateVector(np.array([0.0, 1.0], dtype=complex))
        joint = tensor(a, b)
        # first factor indexes the high bit
        np.testing.assert_allclose(joint.amplitudes, [0, 1, 0, 0], atol=0)

    def test_operator_tensor_matches_kron(self):
        for _ in range(10):
            ma = random_density(RNG)
            mb = random_density(RNG)
            got = tensor(Operator(ma), Operator(mb)).matrix
            np.testing.assert_allclose(got, np.kron(ma, mb), atol=1e-14)

    def test_mixed_types_rejected(self):
        a = StateVector(np.array([1.0, 0.0], dtype=complex))
        with pytest.raises(ValueError):
            tensor(a, Operator(np.eye(2, dtype=complex)))


class TestBornProbabilities:
    def test_uniform_for_conjugate_basis(self):
        plus = StateVector(np.array([1.0, 1.0]) / math.sqrt(2)).to_density()
        p0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        povm = Povm([p0, np.eye(2) - p0], labels=("0", "1"))
        np.testing.assert_allclose(born_probabilities(plus, povm), [0.5, 0.5],
                                   atol=1e-12)

    def test_sums_to_trace(self):
        p0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        povm = Povm([p0, np.eye(2) - p0], labels=("0", "1"))
        for _ in range(25):
            dm = DensityMatrix(random_density(RNG))
            probs = born_probabilities(dm, povm)
            assert probs.sum() == pytest.approx(1.0, abs=1e-12)
            assert (probs >= 0).all()

    def test_dim_mismatch(self):
        p0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        povm = Povm([p0, np.eye(2) - p0], labels=("0", "1"))
        with pytest.raises(ValueError):
            born_probabilities(DensityMatrix(np.eye(4) / 4), povm)


class TestApplyChannel:
    def test_identity_channel(self):
        dm = DensityMatrix(random_density(RNG))
        out = apply_channel(dm, [identity(2)])
        np.testing.assert_allclose(out.matrix, dm.matrix, atol=1e-14)

    def test_rejects_nonpreserving(self):
        dm = DensityMatrix(np.eye(2) / 2)
        with pytest.raises(ValueError):
            apply_channel(dm, [0.5 * identity(2)])

    def test_subnormalized_branch_allowed(self):
        dm = DensityMatrix(np.eye(2) / 2)
        out = apply_channel(dm, [0.5 * identity(2)], subnormalized=True)
        assert out.subnormalized
        assert out.trace == pytest.approx(0.25)

    def test_bit_flip(self):
        dm = StateVector(np.array([1.0, 0.0], dtype=complex)).to_density()
        flip = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        out = apply_channel(dm, [flip])
        np.testing.assert_allclose(out.matrix, [[0, 0], [0, 1]], atol=1e-14)


class TestPartialTrace:
    def test_product_state_factors(self):
        for _ in range(10):
            ma = random_density(RNG)
            mb = random_density(RNG)
            joint = DensityMatrix(np.kron(ma, mb))
            np.testing.assert_allclose(partial_trace(joint, keep="A").matrix,
                                       ma, atol=1e-12)
            np.testing.assert_allclose(partial_trace(joint, keep="B").matrix,
                                       mb, atol=1e-12)

    def test_maximally_entangled_reduces_to_mixed(self):
        v = np.zeros(4, dtype=complex)
        v[0] = v[3] = 1 / math.sqrt(2)
        joint = StateVector(v).to_density()
        for side in ("A", "B"):
            np.testing.assert_allclose(partial_trace(joint, keep=side).matrix,
                                       np.eye(2) / 2, atol=1e-12)

    def test_keep_label_validated(self):
        joint = DensityMatrix(np.eye(4) / 4)
        with pytest.raises(ValueError):
            partial_trace(joint, keep="C")
