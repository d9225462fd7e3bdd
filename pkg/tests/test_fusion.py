import numpy as np
import pytest

from sgnnib.autodiff import ParamStore, ShapeError, Tensor, backward
import sgnnib.autodiff as ad
from sgnnib.fusion import (
    affinity,
    fuse_frequencies,
    prototype,
    relation_fusion,
    residual_concat,
)

from helpers import finite_difference_grads, grad_rel_error


def scalar_fusion_oracle(h_high: np.ndarray, h_low: np.ndarray):
    """Loop recomputation of prototype fusion with the clamped weighting."""
    eps = 1e-12

    def proto(h):
        return h.mean(axis=0)

    def aff(h, c):
        vals = []
        for row in h:
            na = np.sqrt((row ** 2).sum()) + eps
            nc = np.sqrt((c ** 2).sum()) + eps
            vals.append(row @ c / (na * nc))
        return float(np.mean(vals))

    s_high = aff(h_high, proto(h_high))
    s_low = aff(h_low, proto(h_low))
    a_high, a_low = max(s_high, 0.0), max(s_low, 0.0)
    if a_high + a_low > eps:
        w_high = a_high / (a_high + a_low)
        w_low = a_low / (a_high + a_low)
    else:
        w_high = w_low = 0.5
    return w_high * h_high + w_low * h_low, (s_high, s_low, w_high, w_low)


class TestPrototype:
    def test_single_row(self):
        h = Tensor([[3.0, -1.0, 2.0]])
        np.testing.assert_allclose(prototype(h).data, [[3.0, -1.0, 2.0]])

    def test_two_rows(self):
        h = Tensor([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(prototype(h).data, [[0.5, 0.5]])

    def test_matches_scalar_mean(self):
        rng = np.random.default_rng(0)
        h = rng.normal(size=(17, 5))
        want = np.array([h[:, j].sum() / len(h) for j in range(5)])
        np.testing.assert_allclose(prototype(Tensor(h)).data[0], want, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            prototype(Tensor(np.zeros((0, 3))))


class TestAffinity:
    def test_rows_equal_to_prototype(self):
        c = np.array([[1.0, 2.0, 3.0]])
        h = Tensor(np.repeat(c, 4, axis=0))
        assert affinity(h, Tensor(c)).item() == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_rows(self):
        c = Tensor([[1.0, 0.0]])
        h = Tensor([[0.0, 1.0], [0.0, -2.0]])
        assert affinity(h, c).item() == pytest.approx(0.0, abs=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(1)
        h = rng.normal(size=(9, 4))
        c = rng.normal(size=(1, 4))
        got = affinity(Tensor(h), Tensor(c)).item()
        vals = []
        for row in h:
            na = np.sqrt((row ** 2).sum()) + 1e-12
            nc = np.sqrt((c[0] ** 2).sum()) + 1e-12
            vals.append(row @ c[0] / (na * nc))
        assert got == pytest.approx(np.mean(vals), abs=1e-10)

    def test_euclidean_variant(self):
        rng = np.random.default_rng(2)
        h = rng.normal(size=(6, 3))
        c = rng.normal(size=(1, 3))
        got = affinity(Tensor(h), Tensor(c), metric="euclidean").item()
        want = np.mean([np.exp(-np.sqrt(((row - c[0]) ** 2).sum() + 1e-24))
                        for row in h])
        assert got == pytest.approx(want, abs=1e-10)


class TestFuseFrequencies:
    def test_identical_inputs_pass_through(self):
        rng = np.random.default_rng(3)
        h = rng.normal(size=(7, 4)) + 1.0
        fused, state = fuse_frequencies(Tensor(h), Tensor(h))
        np.testing.assert_allclose(fused.data, h, atol=1e-12)
        assert state.weight_high + state.weight_low == pytest.approx(1.0)

    def test_row_permutation_gives_equal_weights(self):
        rng = np.random.default_rng(4)
        h = rng.normal(size=(8, 3)) + 0.5
        perm = rng.permutation(8)
        fused, state = fuse_frequencies(Tensor(h), Tensor(h[perm]))
        assert state.weight_high == pytest.approx(0.5, abs=1e-12)
        assert state.weight_low == pytest.approx(0.5, abs=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            h_high = rng.normal(size=(6, 4)) + rng.normal() * 0.5
            h_low = rng.normal(size=(6, 4)) + rng.normal() * 0.5
            fused, state = fuse_frequencies(Tensor(h_high), Tensor(h_low))
            want, (s_h, s_l, w_h, w_l) = scalar_fusion_oracle(h_high, h_low)
            np.testing.assert_allclose(fused.data, want, atol=1e-10)
            assert state.weight_high == pytest.approx(w_h, abs=1e-12)
            assert state.affinity_high == pytest.approx(s_h, abs=1e-10)
            assert state.affinity_low == pytest.approx(s_l, abs=1e-10)

    def test_weights_nonnegative_and_sum_to_one(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            h_high = rng.normal(size=(5, 3)) * rng.uniform(0.1, 3)
            h_low = rng.normal(size=(5, 3)) * rng.uniform(0.1, 3)
            _, state = fuse_frequencies(Tensor(h_high), Tensor(h_low))
            assert state.weight_high >= 0.0
            assert state.weight_low >= 0.0
            assert state.weight_high + state.weight_low == pytest.approx(1.0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        h_high = rng.normal(size=(9, 4)) + 0.3
        h_low = rng.normal(size=(9, 4)) + 0.3
        fused, _ = fuse_frequencies(Tensor(h_high), Tensor(h_low))
        perm = rng.permutation(9)
        fused_p, _ = fuse_frequencies(Tensor(h_high[perm]), Tensor(h_low[perm]))
        np.testing.assert_allclose(fused_p.data, fused.data[perm], atol=1e-12)

    def test_higher_affinity_pulls_output_toward_band(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            # aligned rows -> high affinity; scattered rows -> lower
            direction = rng.normal(size=(1, 4))
            h_high = np.repeat(direction, 6, axis=0) + 0.05 * rng.normal(size=(6, 4))
            h_low = rng.normal(size=(6, 4))
            fused, state = fuse_frequencies(Tensor(h_high), Tensor(h_low))
            if state.affinity_high <= state.affinity_low:
                continue
            equal = 0.5 * h_high + 0.5 * h_low
            d_fused = np.linalg.norm(fused.data - h_high)
            d_equal = np.linalg.norm(equal - h_high)
            assert d_fused <= d_equal + 1e-12

    def test_zero_affinity_fallback(self):
        # antisymmetric rows make every prototype exactly zero
        h = np.array([[1.0, -1.0], [-1.0, 1.0]])
        fused, state = fuse_frequencies(Tensor(h), Tensor(2 * h))
        assert state.weight_high == 0.5
        assert state.weight_low == 0.5
        np.testing.assert_allclose(fused.data, 0.5 * h + 0.5 * 2 * h)

    def test_gradients_flow_through_weights_and_operands(self):
        store = ParamStore(seed=9)
        h_high = store.add("h_high", (5, 3))
        h_low = store.add("h_low", (5, 3))
        h_high.data += 0.5
        h_low.data += 0.5
        weights = Tensor(np.random.default_rng(10).normal(size=(5, 3)))

        def forward():
            fused, _ = fuse_frequencies(h_high, h_low)
            return ad.sum_all(ad.mul(fused, weights))

        loss = forward()
        backward(loss, store)
        numeric = finite_difference_grads(store, lambda: forward().item())
        for name, t in store.items():
            assert grad_rel_error(t.grad, numeric[name]) <= 1e-4


class TestResidualConcat:
    def test_zero_weight_zero_output(self):
        h = Tensor(np.ones((4, 3)))
        w = Tensor(np.zeros((6, 3)))
        np.testing.assert_array_equal(residual_concat(h, h, w).data,
                                      np.zeros((4, 3)))

    def test_block_identity_selects_first_operand(self):
        rng = np.random.default_rng(11)
        a = Tensor(rng.normal(size=(5, 3)))
        b = Tensor(rng.normal(size=(5, 3)))
        w = Tensor(np.vstack([np.eye(3), np.zeros((3, 3))]))
        np.testing.assert_allclose(residual_concat(a, b, w).data,
                                   np.maximum(a.data, 0.0), atol=1e-12)

    def test_matches_dense_recomputation(self):
        rng = np.random.default_rng(12)
        a, b = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
        w = rng.normal(size=(8, 4))
        got = residual_concat(Tensor(a), Tensor(b), Tensor(w)).data
        want = np.maximum(np.concatenate([a, b], axis=1) @ w, 0.0)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_row_mismatch(self):
        with pytest.raises(ShapeError):
            residual_concat(Tensor(np.zeros((3, 2))), Tensor(np.zeros((4, 2))),
                            Tensor(np.zeros((4, 2))))


class TestRelationFusion:
    def test_single_relation_identity(self):
        rng = np.random.default_rng(13)
        h = rng.normal(size=(5, 4))
        out = relation_fusion([Tensor(h)], Tensor(np.eye(4)))
        np.testing.assert_allclose(out.data, h, atol=1e-12)

    def test_duplicate_relations_with_averaging_weight(self):
        rng = np.random.default_rng(14)
        h = rng.normal(size=(5, 3))
        w = np.vstack([0.5 * np.eye(3), 0.5 * np.eye(3)])
        out = relation_fusion([Tensor(h), Tensor(h)], Tensor(w))
        np.testing.assert_allclose(out.data, h, atol=1e-12)

    def test_matches_dense_recomputation(self):
        rng = np.random.default_rng(15)
        hs = [rng.normal(size=(4, 3)) for _ in range(3)]
        w = rng.normal(size=(9, 5))
        got = relation_fusion([Tensor(h) for h in hs], Tensor(w)).data
        np.testing.assert_allclose(got, np.concatenate(hs, axis=1) @ w,
                                   atol=1e-10)

    def test_relation_count_mismatch(self):
        with pytest.raises(ShapeError, match="relation count"):
            relation_fusion([Tensor(np.zeros((4, 3)))], Tensor(np.zeros((6, 2))))
