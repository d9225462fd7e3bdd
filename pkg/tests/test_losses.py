import numpy as np
import pytest

import sgnnib.autodiff as ad
from sgnnib.autodiff import ParamStore, ShapeError, Tensor, backward
from sgnnib.losses import (
    LossConfig,
    LossError,
    classification_loss,
    ib_loss,
    joint_loss,
    mutual_info_surrogate,
    sample_balanced_nodes,
)

from helpers import finite_difference_grads, grad_rel_error


def scalar_similarity_oracle(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    """Row-loop recomputation of each similarity metric."""
    n = len(a)
    if metric == "cosine":
        vals = []
        for i in range(n):
            na = np.sqrt((a[i] ** 2).sum()) + 1e-12
            nb = np.sqrt((b[i] ** 2).sum()) + 1e-12
            vals.append(a[i] @ b[i] / (na * nb))
        return float(np.mean(vals))
    if metric == "mse":
        return float(-np.mean([(a[i] - b[i]) ** 2 for i in range(n)]))

    def softmax(row):
        e = np.exp(row - row.max())
        return np.clip(e / e.sum(), 1e-7, 1.0)

    if metric == "kl":
        vals = [np.sum(softmax(a[i]) * (np.log(softmax(a[i])) - np.log(softmax(b[i]))))
                for i in range(n)]
        return float(-np.mean(vals))
    if metric == "js":
        vals = []
        for i in range(n):
            p, q = softmax(a[i]), softmax(b[i])
            m = 0.5 * (p + q)
            vals.append(0.5 * np.sum(p * (np.log(p) - np.log(m)))
                        + 0.5 * np.sum(q * (np.log(q) - np.log(m))))
        return float(-np.mean(vals))
    raise ValueError(metric)


def scalar_ib_oracle(h_high, h_low, h_high_o, h_low_o, h, mu, metric="cosine",
                     cross=False) -> float:
    sim = lambda x, y: scalar_similarity_oracle(x, y, metric)
    keep = sim(h_high, h_high_o) + sim(h_low, h_low_o)
    compress = sim(h_high, h) + sim(h_low, h)
    val = 0.5 * (-keep + mu * compress)
    if cross:
        val += mu * sim(h_high, h_low)
    return val


class TestMutualInfoSurrogate:
    def test_cosine_identical_is_one(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(6, 4)) + 0.3)
        assert mutual_info_surrogate(a, a).item() == pytest.approx(1.0, abs=1e-9)

    def test_cosine_orthogonal_rows_is_zero(self):
        a = Tensor([[1.0, 0.0], [0.0, 2.0]])
        b = Tensor([[0.0, 3.0], [-1.0, 0.0]])
        assert mutual_info_surrogate(a, b).item() == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("metric", ["cosine", "mse", "kl", "js"])
    def test_matches_scalar_oracle(self, metric):
        rng = np.random.default_rng(1)
        for _ in range(5):
            a = rng.normal(size=(7, 5))
            b = rng.normal(size=(7, 5))
            got = mutual_info_surrogate(Tensor(a), Tensor(b), metric).item()
            want = scalar_similarity_oracle(a, b, metric)
            assert got == pytest.approx(want, abs=1e-10)

    @pytest.mark.parametrize("metric", ["cosine", "mse", "kl", "js"])
    def test_gradients_pass_finite_differences(self, metric):
        store = ParamStore(seed=2)
        a = store.add("a", (5, 4))
        b = store.add("b", (5, 4))
        forward = lambda: mutual_info_surrogate(a, b, metric)
        loss = forward()
        backward(loss, store)
        numeric = finite_difference_grads(store, lambda: forward().item())
        for name, t in store.items():
            assert grad_rel_error(t.grad, numeric[name]) <= 1e-4, (metric, name)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mutual_info_surrogate(Tensor(np.zeros((2, 2))),
                                  Tensor(np.zeros((3, 2))))


class TestIbLoss:
    def test_identical_tensors_mu_zero(self):
        rng = np.random.default_rng(3)
        h = Tensor(rng.normal(size=(6, 4)) + 0.2)
        cfg = LossConfig(mu=0.0)
        out = ib_loss(h, h, h, h, h, cfg)
        assert out.item() == pytest.approx(-1.0, abs=1e-9)

    def test_orthogonal_subgraph_embeddings_mu_zero(self):
        a = np.array([[1.0, 0.0]] * 4)
        b = np.array([[0.0, 1.0]] * 4)
        cfg = LossConfig(mu=0.0)
        out = ib_loss(Tensor(a), Tensor(a), Tensor(b), Tensor(b), Tensor(a), cfg)
        assert out.item() == pytest.approx(0.0, abs=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(4)
        cfg = LossConfig(mu=1e-6)
        for _ in range(5):
            ts = [rng.normal(size=(5, 3)) for _ in range(5)]
            got = ib_loss(*[Tensor(t) for t in ts], cfg).item()
            want = scalar_ib_oracle(*ts, mu=1e-6)
            assert got == pytest.approx(want, abs=1e-10)

    def test_cross_frequency_term(self):
        rng = np.random.default_rng(5)
        ts = [rng.normal(size=(5, 3)) for _ in range(5)]
        cfg = LossConfig(mu=0.5, include_cross_frequency_term=True)
        got = ib_loss(*[Tensor(t) for t in ts], cfg).item()
        want = scalar_ib_oracle(*ts, mu=0.5, cross=True)
        assert got == pytest.approx(want, abs=1e-10)

    def test_relation_averaging(self):
        rng = np.random.default_rng(6)
        cfg = LossConfig(mu=1e-3)
        rels = [[rng.normal(size=(4, 3)) for _ in range(5)] for _ in range(3)]
        lists = [[Tensor(rel[k]) for rel in rels] for k in range(5)]
        got = ib_loss(*lists, cfg).item()
        want = np.mean([scalar_ib_oracle(*rel, mu=1e-3) for rel in rels])
        assert got == pytest.approx(want, abs=1e-10)

    def test_bounded_with_cosine(self):
        rng = np.random.default_rng(7)
        cfg = LossConfig(mu=0.3)
        bound = 0.5 * (2 + cfg.mu * 2)
        for _ in range(10):
            ts = [rng.normal(size=(6, 4)) for _ in range(5)]
            val = ib_loss(*[Tensor(t) for t in ts], cfg).item()
            assert abs(val) <= bound + 1e-9


class TestSampleBalancedNodes:
    def test_already_balanced(self):
        labels = np.array([0] * 50 + [1] * 50, dtype=np.int8)
        nodes = np.arange(100)
        out = sample_balanced_nodes(nodes, labels, np.random.default_rng(0))
        assert len(out) == 100

    def test_downsamples_benign(self):
        labels = np.array([1] * 10 + [0] * 990, dtype=np.int8)
        nodes = np.arange(1000)
        out = sample_balanced_nodes(nodes, labels, np.random.default_rng(0))
        assert len(out) == 20
        assert (labels[out] == 1).sum() == 10

    def test_counts_equal_for_random_imbalance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(10, 500))
            labels = (rng.random(n) < rng.uniform(0.05, 0.95)).astype(np.int8)
            if labels.sum() in (0, n):
                continue
            out = sample_balanced_nodes(np.arange(n), labels, rng)
            assert (labels[out] == 0).sum() == (labels[out] == 1).sum()

    def test_never_drops_minority_fraud(self):
        rng = np.random.default_rng(2)
        labels = (rng.random(200) < 0.1).astype(np.int8)
        fraud = np.flatnonzero(labels == 1)
        out = sample_balanced_nodes(np.arange(200), labels, rng)
        assert set(fraud).issubset(set(out))

    def test_single_class_raises(self):
        labels = np.zeros(10, dtype=np.int8)
        with pytest.raises(LossError, match="both classes"):
            sample_balanced_nodes(np.arange(10), labels, np.random.default_rng(0))


class TestClassificationLoss:
    def test_uniform_logits_give_ln2_per_node(self):
        n = 6
        h = Tensor(np.zeros((n, 4)))
        w = Tensor(np.zeros((4, 2)))
        labels = np.array([0, 1] * 3, dtype=np.int8)
        loss, probs = classification_loss(h, w, np.arange(n), labels)
        assert loss.item() == pytest.approx(n * np.log(2.0), rel=1e-12)
        np.testing.assert_allclose(probs, 0.5)

    def test_aligned_logits_drive_loss_to_zero(self):
        labels = np.array([0, 1, 0, 1], dtype=np.int8)
        h = Tensor(np.array([[1.0, 0], [0, 1], [1, 0], [0, 1]]) * 50)
        w = Tensor(np.eye(2))
        loss, _ = classification_loss(h, w, np.arange(4), labels)
        assert loss.item() < 1e-5

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(8)
        h = rng.normal(size=(7, 3))
        w = rng.normal(size=(3, 2))
        labels = rng.integers(0, 2, size=7).astype(np.int8)
        sampled = np.array([0, 2, 5, 6])
        loss, probs = classification_loss(Tensor(h), Tensor(w), sampled, labels)
        want = 0.0
        for v in sampled:
            z = h[v] @ w
            e = np.exp(z - z.max())
            p = e / e.sum()
            p = np.clip(p, 1e-7, 1 - 1e-7)
            want -= (labels[v] * np.log(p[1]) + (1 - labels[v]) * np.log(p[0]))
        assert loss.item() == pytest.approx(want, abs=1e-10)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_invariant_to_sample_ordering(self):
        rng = np.random.default_rng(9)
        h = Tensor(rng.normal(size=(8, 3)))
        w = Tensor(rng.normal(size=(3, 2)))
        labels = rng.integers(0, 2, size=8).astype(np.int8)
        sampled = np.arange(8)
        l1, _ = classification_loss(h, w, sampled, labels)
        l2, _ = classification_loss(h, w, sampled[::-1].copy(), labels)
        assert l1.item() == pytest.approx(l2.item(), abs=1e-12)


class TestJointLoss:
    def test_zero_weights_reduce_to_classification(self):
        cfg = LossConfig(edge_weight=0.0, ib_weight=0.0)
        total, report = joint_loss(Tensor(1.7), Tensor(3.0), Tensor(-2.0), cfg)
        assert total.item() == pytest.approx(1.7)
        assert report.total == pytest.approx(1.7)

    def test_paper_optimum_weights_arithmetic(self):
        cfg = LossConfig(edge_weight=1.0, ib_weight=0.6, mu=1e-6)
        total, report = joint_loss(Tensor(1.0), Tensor(1.0), Tensor(1.0), cfg)
        assert total.item() == pytest.approx(2.6)

    def test_report_invariant_random_inputs(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            cfg = LossConfig(edge_weight=rng.uniform(0, 2),
                             ib_weight=rng.uniform(0, 2))
            l_c, l_h, l_ib = rng.normal(size=3)
            total, report = joint_loss(Tensor(l_c), Tensor(l_h), Tensor(l_ib), cfg)
            want = l_c + cfg.edge_weight * l_h + cfg.ib_weight * l_ib
            assert abs(report.total - want) <= 1e-10
            assert report.total == pytest.approx(total.item(), abs=1e-12)

    def test_missing_terms_count_as_zero(self):
        cfg = LossConfig()
        total, report = joint_loss(Tensor(2.0), None, None, cfg)
        assert total.item() == pytest.approx(2.0)
        assert report.edge == 0.0
        assert report.denoising == 0.0


class TestLossConfig:
    def test_rejects_negative_weights(self):
        with pytest.raises(LossError):
            LossConfig(mu=-1.0)

    def test_rejects_unknown_metric(self):
        with pytest.raises(LossError, match="mi_metric"):
            LossConfig(mi_metric="mine")
