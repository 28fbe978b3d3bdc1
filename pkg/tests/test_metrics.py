import numpy as np
import pytest

from emoface.metrics import (
    MetricsReport,
    ch_index,
    delta_ch,
    fdd,
    lve,
    mouth_opening_deviation,
    sequence_expression_means,
    ve,
)

# Direct formula evaluation recorded before the build:
# points {0, 0.1, 10, 10.1}, labels {0,0,1,1}: B=100, W=0.01 -> CH = 20000.
CH_ORACLE_POINTS = np.array([0.0, 0.1, 10.0, 10.1])
CH_ORACLE_LABELS = np.array([0, 0, 1, 1])
CH_ORACLE_VALUE = 20000.0


def rand_pair(rng, t=5, v=7):
    return rng.standard_normal((t, v, 3)), rng.standard_normal((t, v, 3))


# -- naive reference implementations (independent loop oracles) -----------------


def naive_ve(pred, gt):
    total, count = 0.0, 0
    for t in range(pred.shape[0]):
        for v in range(pred.shape[1]):
            d = pred[t, v] - gt[t, v]
            total += (d[0] ** 2 + d[1] ** 2 + d[2] ** 2) ** 0.5
            count += 1
    return total / count


def naive_lve(pred, gt, lips):
    total = 0.0
    for t in range(pred.shape[0]):
        best = 0.0
        for v in lips:
            d = pred[t, v] - gt[t, v]
            best = max(best, (d[0] ** 2 + d[1] ** 2 + d[2] ** 2) ** 0.5)
        total += best
    return total / pred.shape[0]


def naive_mod(pred, gt, up, lo):
    total = 0.0
    for t in range(pred.shape[0]):
        o_p = np.linalg.norm(pred[t, up] - pred[t, lo])
        o_g = np.linalg.norm(gt[t, up] - gt[t, lo])
        total += abs(o_p - o_g)
    return total / pred.shape[0]


def naive_dyn(seq, vertex):
    t = seq.shape[0]
    mu = seq[:, vertex].mean(axis=0)
    acc = 0.0
    for ti in range(t):
        acc += float(np.sum((seq[ti, vertex] - mu) ** 2))
    return (acc / t) ** 0.5


def naive_fdd(pred, gt, subset):
    vals = [abs(naive_dyn(pred, v) - naive_dyn(gt, v)) for v in subset]
    return float(np.mean(vals))


def naive_ch(points, labels):
    points = np.atleast_2d(points.T).T if points.ndim == 1 else points
    n = points.shape[0]
    classes = sorted(set(labels.tolist()))
    k = len(classes)
    mu = points.mean(axis=0)
    b = 0.0
    w = 0.0
    for c in classes:
        members = points[labels == c]
        mu_c = members.mean(axis=0)
        b += len(members) * float(np.sum((mu_c - mu) ** 2))
        for row in members:
            w += float(np.sum((row - mu_c) ** 2))
    return (b / (k - 1)) / (w / (n - k))


class TestVe:
    def test_identical(self):
        s, _ = rand_pair(np.random.default_rng(0))
        assert ve(s, s) == 0.0

    def test_uniform_offset(self):
        s, _ = rand_pair(np.random.default_rng(1))
        shifted = s.copy()
        shifted[:, :, 0] += 1.0
        assert abs(ve(shifted, s) - 1.0) <= 1e-12

    def test_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            p, g = rand_pair(rng)
            assert abs(ve(p, g) - naive_ve(p, g)) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ve(np.zeros((2, 3, 3)), np.zeros((2, 4, 3)))


class TestLve:
    def test_identical(self):
        s, _ = rand_pair(np.random.default_rng(0))
        assert lve(s, s, np.array([0, 1])) == 0.0

    def test_single_displaced_vertex(self):
        t = 8
        s = np.zeros((t, 5, 3))
        s[:, 0, 0] = np.arange(t)  # motion shared by both
        pred = s.copy()
        pred[3, 2, 1] += 2.0
        assert abs(lve(pred, s, np.array([1, 2, 3])) - 2.0 / t) <= 1e-12

    def test_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            p, g = rand_pair(rng)
            lips = rng.choice(7, size=4, replace=False)
            assert abs(lve(p, g, lips) - naive_lve(p, g, lips)) <= 1e-12

    def test_mean_variant(self):
        rng = np.random.default_rng(4)
        p, g = rand_pair(rng)
        lips = np.array([0, 2, 5])
        dist = np.linalg.norm(p[:, lips] - g[:, lips], axis=2)
        assert abs(lve(p, g, lips, per_frame_mean=True) - dist.mean(axis=1).mean()) <= 1e-12

    def test_empty_subset(self):
        s, _ = rand_pair(np.random.default_rng(5))
        with pytest.raises(ValueError, match="empty lip subset"):
            lve(s, s, np.array([], dtype=int))


def test_ve_lve_rigid_translation_invariance():
    rng = np.random.default_rng(8)
    pred, gt = rand_pair(rng)
    shift = rng.standard_normal(3) * 40.0
    lips = np.array([0, 3, 5])
    assert abs(ve(pred + shift, gt + shift) - ve(pred, gt)) <= 1e-9
    assert abs(lve(pred + shift, gt + shift, lips) - lve(pred, gt, lips)) <= 1e-9


class TestMod:
    def test_identical(self):
        s, _ = rand_pair(np.random.default_rng(0))
        assert mouth_opening_deviation(s, s, 0, 1) == 0.0

    def test_analytic_constant_openings(self):
        pred = np.zeros((4, 3, 3))
        gt = np.zeros((4, 3, 3))
        pred[:, 1, 2] = 3.0  # opening 3mm
        gt[:, 1, 2] = 5.0  # opening 5mm
        assert abs(mouth_opening_deviation(pred, gt, 0, 1) - 2.0) <= 1e-12

    def test_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            p, g = rand_pair(rng)
            assert abs(mouth_opening_deviation(p, g, 2, 5) - naive_mod(p, g, 2, 5)) <= 1e-12

    def test_bad_index(self):
        s, _ = rand_pair(np.random.default_rng(2))
        with pytest.raises(IndexError):
            mouth_opening_deviation(s, s, 0, 99)


class TestFdd:
    def test_static(self):
        frame = np.random.default_rng(0).standard_normal((1, 6, 3))
        static = np.repeat(frame, 5, axis=0)
        assert fdd(static, static + 1.0, np.arange(6)) == 0.0

    def test_oscillating_vertex(self):
        t, a = 6, 1.5
        gt = np.zeros((t, 4, 3))
        gt[:, 2, 0] = a * np.array([1, -1, 1, -1, 1, -1])  # equal time at +/- a
        pred = np.zeros((t, 4, 3))
        assert abs(fdd(pred, gt, np.array([2])) - a) <= 1e-12
        # subset mean over more vertices dilutes the single contribution
        assert abs(fdd(pred, gt, np.array([1, 2, 3])) - a / 3.0) <= 1e-12

    def test_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            p, g = rand_pair(rng)
            subset = rng.choice(7, size=3, replace=False)
            assert abs(fdd(p, g, subset) - naive_fdd(p, g, subset)) <= 1e-12

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            fdd(np.zeros((1, 3, 3)), np.zeros((1, 3, 3)), np.array([0]))


class TestChIndex:
    def test_oracle_constant(self):
        assert abs(ch_index(CH_ORACLE_POINTS, CH_ORACLE_LABELS) - CH_ORACLE_VALUE) <= 1e-9

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((30, 4)) + 3.0 * rng.integers(0, 3, size=(30, 1))
        labels = rng.integers(0, 3, size=30)
        while len(set(labels.tolist())) < 3:
            labels = rng.integers(0, 3, size=30)
        perm = np.array([2, 0, 1])
        assert ch_index(pts, labels) == ch_index(pts, perm[labels])

    def test_translation_invariance(self):
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((24, 5))
        labels = np.repeat(np.arange(3), 8)
        base = ch_index(pts, labels)
        moved = ch_index(pts + rng.standard_normal(5) * 13.0, labels)
        assert abs(base - moved) <= 1e-9 * max(1.0, abs(base))

    def test_scale_invariance(self):
        rng = np.random.default_rng(2)
        pts = rng.standard_normal((24, 5))
        labels = np.repeat(np.arange(3), 8)
        base = ch_index(pts, labels)
        scaled = ch_index(pts * 7.5, labels)
        assert abs(base - scaled) <= 1e-9 * max(1.0, abs(base))

    def test_naive_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            pts = rng.standard_normal((20, 3)) + 2.0 * rng.integers(0, 2, size=(20, 1))
            labels = np.repeat(np.arange(2), 10)
            assert abs(ch_index(pts, labels) - naive_ch(pts, labels)) <= 1e-12 * naive_ch(pts, labels)

    def test_degenerate_cases(self):
        with pytest.raises(ValueError, match="at least two"):
            ch_index(np.zeros((4, 2)), np.zeros(4, dtype=int))
        with pytest.raises(ValueError, match="degenerate clustering"):
            ch_index(np.zeros((2, 2)), np.array([0, 1]))
        with pytest.raises(ValueError, match="zero within-cluster dispersion"):
            ch_index(np.array([[0.0], [0.0], [1.0], [1.0]]), np.array([0, 0, 1, 1]))

    def test_monotone_cluster_degradation(self):
        # adding growing isotropic noise to well-separated clusters lowers CH
        rng = np.random.default_rng(4)
        centers = np.array([[0.0, 0], [10.0, 0], [0, 10.0]])
        labels = np.repeat(np.arange(3), 15)
        base_pts = centers[labels]
        means = []
        for level in (0.5, 1.5, 3.0):
            vals = [
                ch_index(base_pts + level * rng.standard_normal(base_pts.shape), labels)
                for _ in range(20)
            ]
            means.append(np.mean(vals))
        assert means[0] > means[1] > means[2]


class TestDeltaCh:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.labels = np.repeat(np.arange(3), 10)
        self.pts = rng.standard_normal((30, 6)) + 4.0 * np.eye(3)[self.labels][:, :3].repeat(2, axis=1)

    def test_identical_zero(self):
        assert delta_ch(self.pts, self.labels, self.pts, self.labels) == 0.0

    def test_scaling_about_mean_zero(self):
        mu = self.pts.mean(axis=0)
        scaled = mu + 2.0 * (self.pts - mu)
        assert delta_ch(scaled, self.labels, self.pts, self.labels) <= 1e-12

    def test_permuted_labels_match_naive(self):
        rng = np.random.default_rng(6)
        shuffled = rng.permutation(self.labels)
        got = delta_ch(self.pts, shuffled, self.pts, self.labels)
        expected = abs(naive_ch(self.pts, shuffled) - naive_ch(self.pts, self.labels)) / naive_ch(
            self.pts, self.labels
        )
        assert abs(got - expected) <= 1e-12

    def test_label_set_mismatch(self):
        with pytest.raises(ValueError, match="label sets differ"):
            delta_ch(self.pts, self.labels, self.pts, np.where(self.labels == 2, 1, self.labels))


def test_sequence_expression_means():
    seqs = [np.arange(24, dtype=float).reshape(4, 6), np.ones((4, 6))]
    out = sequence_expression_means(seqs, n_id=1, n_exp=3)
    assert out.shape == (2, 3)
    assert np.array_equal(out[0], np.arange(24).reshape(4, 6)[:, 1:4].mean(axis=0))


def test_report_serialization():
    report = MetricsReport(ve_mm=1.0, lve_mm=2.0, mod_mm=0.5, fdd=0.1, delta_ch=0.01,
                           frames=32, vertices=64, sequences=24)
    obj = report.to_json_obj()
    for key in ("ve_mm", "lve_mm", "mod_mm", "fdd", "delta_ch"):
        assert key in obj
    assert obj["counts"] == {"frames": 32, "vertices": 64, "sequences": 24}
