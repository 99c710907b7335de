import math

import numpy as np
import pytest

from mfcp import conformal, mfae, nn

from helpers import sinusoid_pair_benchmark


def test_modulation_constant_columns_hit_floor():
    res = np.tile([1.0, -2.0, 0.5], (6, 1))
    s = conformal.modulation(res)
    assert np.array_equal(s, np.full(3, conformal.S_FLOOR))


def test_modulation_plus_minus_one():
    s = conformal.modulation(np.array([[-1.0], [1.0]]))
    assert s[0] == 1.0


def test_modulation_matches_two_pass_oracle():
    rng = np.random.default_rng(0)
    res = rng.normal(size=(20, 5))
    s = conformal.modulation(res)
    for j in range(5):
        mean = sum(res[i, j] for i in range(20)) / 20
        var = sum((res[i, j] - mean) ** 2 for i in range(20)) / 20
        assert abs(s[j] - math.sqrt(var)) <= 1e-12 * s[j]
    with pytest.raises(ValueError):
        conformal.modulation(res[:1])


def test_scores_normalized_to_one():
    s = np.array([0.5, 2.0, 1.0])
    res = s[None, :].copy()
    assert conformal.scores(res, s, "linf")[0] == 1.0
    assert abs(conformal.scores(res, s, "normalized_l2")[0] - 1.0) <= 1e-15


def test_scores_single_spike():
    d = 4
    s = np.ones(d)
    res = np.zeros((1, d))
    res[0, 0] = 2.0
    assert conformal.scores(res, s, "linf")[0] == 2.0
    assert abs(conformal.scores(res, s, "normalized_l2")[0] - 2.0 / math.sqrt(d)) <= 1e-15


def test_scores_match_naive_loop():
    rng = np.random.default_rng(1)
    res = rng.normal(size=(8, 6))
    s = rng.uniform(0.5, 2.0, size=6)
    linf = conformal.scores(res, s, "linf")
    nl2 = conformal.scores(res, s, "normalized_l2")
    for i in range(8):
        r = [abs(res[i, j]) / s[j] for j in range(6)]
        assert abs(linf[i] - max(r)) <= 1e-12
        assert abs(nl2[i] - math.sqrt(sum(v * v for v in r) / 6)) <= 1e-12
    with pytest.raises(ValueError):
        conformal.scores(res, s, "l2")


def test_critical_quantile_forced_arithmetic():
    assert conformal.critical_quantile(np.arange(1.0, 10.0), 0.1) == 9.0
    assert conformal.critical_quantile(np.full(7, 3.25), 0.5) == 3.25
    with pytest.raises(ValueError, match="infeasible"):
        conformal.critical_quantile(np.arange(1.0, 10.0), 0.05)


def test_critical_quantile_monotone_in_confidence():
    rng = np.random.default_rng(2)
    scores = rng.exponential(size=40)
    deltas = [0.5, 0.4, 0.3, 0.2, 0.1, 0.05]
    ks = [conformal.critical_quantile(scores, d) for d in deltas]
    assert all(b >= a for a, b in zip(ks, ks[1:]))


def test_band_examples():
    lo, hi = conformal.band(np.zeros(2), np.array([1.0, 2.0]))
    assert np.array_equal(lo, [-1.0, -2.0])
    assert np.array_equal(hi, [1.0, 2.0])
    pred = np.random.default_rng(3).normal(size=5)
    r = np.zeros(5)
    lo, hi = conformal.band(pred, r)
    assert np.array_equal(lo, pred) and np.array_equal(hi, pred)
    r = np.random.default_rng(4).uniform(size=5)
    lo, hi = conformal.band(pred, r)
    assert np.allclose(hi - lo, 2.0 * r, atol=0)


def test_radius_law_exact():
    rng = np.random.default_rng(5)
    cal = conformal.calibrate(rng.normal(size=(15, 8)), delta=0.2, kind="linf")
    assert np.array_equal(cal.radius, cal.critical_quantile * cal.s)


def test_scale_equivariance_power_of_two():
    rng = np.random.default_rng(6)
    res = rng.normal(size=(10, 4))
    s = rng.uniform(0.5, 2.0, size=4)
    for kind in conformal.SCORE_KINDS:
        base = conformal.scores(res, s, kind)
        # res and s scaled together: scores unchanged (c = power of two)
        assert np.array_equal(conformal.scores(4.0 * res, 4.0 * s, kind), base)
        # res alone scaled: every score scales by exactly c
        assert np.array_equal(conformal.scores(2.0 * res, s, kind), 2.0 * base)
        assert np.array_equal(conformal.scores(0.25 * res, s, kind), 0.25 * base)


def test_coverage_examples():
    pred = np.zeros((4, 3))
    lo, hi = pred - 1.0, pred + 1.0
    stats = conformal.coverage(lo, hi, pred)
    assert stats.nominal == 1.0 and stats.pointwise == 1.0
    assert stats.width_mean == 2.0 and stats.width_std == 0.0

    # 22 snapshots, exactly one fully covered
    truths = np.full((22, 2), 5.0)
    truths[0] = 0.0
    stats = conformal.coverage(np.full(2, -1.0), np.full(2, 1.0), truths)
    assert abs(stats.nominal - 1.0 / 22.0) <= 1e-15

    # half the components inside per snapshot
    truths = np.tile([0.0, 9.0], (6, 1))
    stats = conformal.coverage(np.full(2, -1.0), np.full(2, 1.0), truths)
    assert stats.nominal == 0.0 and stats.pointwise == 0.5


def test_coverage_boundary_counts_as_covered():
    stats = conformal.coverage(np.zeros(2), np.ones(2), np.array([[0.0, 1.0]]))
    assert stats.nominal == 1.0


@pytest.fixture(scope="module")
def tiny_pretrained():
    lf, hf, _ = sinusoid_pair_benchmark(70, 16, 24, seed=20)
    cfg = mfae.MfaeConfig(
        d_lf=16, d_hf=24, encoder_widths=[12], latent_dim=2, decoder_widths=[12],
        seed=9, pretrain_epochs=400, adam=nn.AdamConfig(lr=3e-3),
    )
    model = mfae.pretrain(cfg, lf)
    return model, lf, hf


def test_multi_split_single_split_is_its_own_median(tiny_pretrained):
    model, lf, hf = tiny_pretrained
    res = conformal.multi_split_calibrate(
        lf[:, :50], hf[:, :50], model, n_splits=1, cal_fraction=0.3,
        delta=0.1, kind="linf", patience=20, seed=1, max_epochs=150,
    )
    assert np.array_equal(res.radius, res.radii[0])
    assert res.epoch == res.epochs[0]
    assert len(res.splits) == 1
    rec = res.splits[0]
    assert not set(rec.train_idx) & set(rec.cal_idx)
    assert sorted(rec.train_idx + rec.cal_idx) == list(range(50))


def test_multi_split_median_aggregation(tiny_pretrained):
    model, lf, hf = tiny_pretrained
    res = conformal.multi_split_calibrate(
        lf[:, :50], hf[:, :50], model, n_splits=4, cal_fraction=0.3,
        delta=0.1, kind="normalized_l2", patience=20, seed=2, max_epochs=150,
    )
    # component-wise sort-and-average-middle-two oracle for even B
    for j in range(res.radii.shape[1]):
        col = sorted(res.radii[:, j])
        assert abs(res.radius[j] - 0.5 * (col[1] + col[2])) <= 1e-15
    assert res.epoch == math.ceil(float(np.median(res.epochs)))
    # trivially: odd-count median of {1,2,3} picks the middle value
    assert np.median(np.array([[1.0], [2.0], [3.0]]), axis=0)[0] == 2.0


def test_multi_split_deterministic_and_parallel_equal(tiny_pretrained):
    model, lf, hf = tiny_pretrained
    kwargs = dict(n_splits=3, cal_fraction=0.3, delta=0.1, kind="linf",
                  patience=15, seed=3, max_epochs=100)
    a = conformal.multi_split_calibrate(lf[:, :50], hf[:, :50], model, **kwargs)
    b = conformal.multi_split_calibrate(lf[:, :50], hf[:, :50], model, **kwargs)
    c = conformal.multi_split_calibrate(lf[:, :50], hf[:, :50], model, workers=3, **kwargs)
    assert np.array_equal(a.radius, b.radius)
    assert a.epochs == b.epochs == c.epochs
    assert np.array_equal(a.radius, c.radius)


def test_multi_split_rejects_infeasible_delta(tiny_pretrained):
    model, lf, hf = tiny_pretrained
    with pytest.raises(ValueError, match="too few"):
        conformal.multi_split_calibrate(
            lf[:, :20], hf[:, :20], model, n_splits=2, cal_fraction=0.3,
            delta=0.05, kind="linf", patience=10, seed=4, max_epochs=50,
        )
