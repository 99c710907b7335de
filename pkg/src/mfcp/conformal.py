"""Modulated conformal prediction bands and multi-split calibration.

The band around a field prediction is a hyperrectangle: per-node radius =
(global critical quantile of the calibration scores) x (per-node residual
standard deviation). The multi-split protocol repeats the fit/calibrate
cycle over B random partitions of the high-fidelity training pairs and
aggregates radii and stopping epochs by component-wise medians, so the
final model can be trained on every available pair.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mfae, nn

SCORE_KINDS = ("linf", "normalized_l2")

S_FLOOR = 1e-8


def modulation(residuals, s_floor=S_FLOOR):
    """Per-component population standard deviation of an (n, D) residual
    matrix, clamped below by `s_floor`."""
    r = np.asarray(residuals, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] < 2:
        raise ValueError("need at least 2 residual rows")
    return np.maximum(r.std(axis=0), s_floor)


def scores(residuals, s, kind):
    """One nonconformity score per residual row.

    Rows are first normalized component-wise by `s`; 'linf' takes the max,
    'normalized_l2' the root mean square.
    """
    if kind not in SCORE_KINDS:
        raise ValueError(f"unknown score kind {kind!r}")
    r = np.abs(np.asarray(residuals, dtype=np.float64)) / np.asarray(s, dtype=np.float64)
    if r.ndim != 2:
        raise ValueError("residuals must be (n, D)")
    if kind == "linf":
        return r.max(axis=1)
    return np.sqrt((r * r).mean(axis=1))


def critical_quantile(score_values, delta):
    """The k-th smallest score with k = ceil((n + 1) (1 - delta)).

    Raises ValueError when k exceeds n (too few calibration samples for
    the requested significance; add samples or raise delta).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    sv = np.sort(np.asarray(score_values, dtype=np.float64))
    n = sv.size
    if n < 1:
        raise ValueError("need at least one score")
    k = math.ceil((n + 1) * (1.0 - delta))
    if k > n:
        raise ValueError(
            f"infeasible significance: rank {k} > {n} calibration scores; "
            f"add samples or raise delta"
        )
    return float(sv[k - 1])


def band(prediction, radius):
    """Hyperrectangle (lower, upper) centered at the prediction."""
    p = np.asarray(prediction, dtype=np.float64)
    r = np.asarray(radius, dtype=np.float64)
    if p.shape[-1] != r.shape[-1]:
        raise ValueError("prediction/radius length mismatch")
    return p - r, p + r


@dataclass
class ConformalCalibration:
    """Single-split calibration artifact: radius = critical_quantile * s."""

    s: np.ndarray
    delta: float
    kind: str
    critical_quantile: float
    radius: np.ndarray


def calibrate(residuals, delta, kind, s_floor=S_FLOOR) -> ConformalCalibration:
    """Textbook single-split calibration from an (n, D) residual matrix."""
    s = modulation(residuals, s_floor)
    k_s = critical_quantile(scores(residuals, s, kind), delta)
    return ConformalCalibration(s=s, delta=delta, kind=kind,
                                critical_quantile=k_s, radius=k_s * s)


@dataclass
class SplitRecord:
    train_idx: list
    cal_idx: list
    critical_quantile: float
    epoch: int
    radius: np.ndarray


@dataclass
class MultiSplitCalibration:
    radii: np.ndarray  # (B, D)
    epochs: list  # B best epochs
    radius: np.ndarray  # component-wise median of the split radii
    epoch: int  # median of the split epochs, rounded up
    delta: float
    kind: str
    splits: list = field(default_factory=list)  # SplitRecord diagnostics
    seed: int = 0


def _median_epoch(epochs):
    # even count: average the two middle values, then round up
    return int(math.ceil(float(np.median(epochs))))


def multi_split_calibrate(x_lf, y_hf, pretrained, n_splits, cal_fraction, delta,
                          kind, patience=100, seed=0, max_epochs=2000,
                          adam=None, workers=1) -> MultiSplitCalibration:
    """Calibrate radii and the stopping epoch over B random re-splits.

    For each split b the high-fidelity pairs are partitioned into a
    temporary training and calibration subset; a clone of the pretrained
    model is fine-tuned on the training part with early stopping monitored
    on the calibration part; the modulation and critical quantile both come
    from the calibration residuals. Medians aggregate the B radius vectors
    component-wise and the B best epochs.

    Each split owns a private RNG stream derived from (seed, b), so the
    sampled partitions never depend on `workers`. Bitwise reproducibility
    holds for a fixed seed and a fixed execution configuration; threaded
    BLAS kernels may order reductions differently under `workers > 1`.
    """
    x = np.asarray(x_lf, dtype=np.float64)
    y = np.asarray(y_hf, dtype=np.float64)
    n = x.shape[1]
    if y.shape[1] != n:
        raise ValueError("x_lf / y_hf pair count mismatch")
    if n_splits < 1:
        raise ValueError("need at least one split")
    if not 0.0 < cal_fraction < 1.0:
        raise ValueError("cal_fraction must be in (0, 1)")
    n_cal = min(max(int(math.floor(cal_fraction * n + 0.5)), 1), n - 1)
    # fail before any training if the calibration size cannot support delta
    if math.ceil((n_cal + 1) * (1.0 - delta)) > n_cal:
        raise ValueError(
            f"cal_fraction gives {n_cal} calibration samples, too few for delta={delta}"
        )

    def run_split(b):
        rng = np.random.default_rng([seed, b])
        perm = rng.permutation(n)
        cal_idx = np.sort(perm[:n_cal])
        train_idx = np.sort(perm[n_cal:])
        model = mfae.clone(pretrained)
        try:
            result = mfae.fine_tune(
                model, x[:, train_idx], y[:, train_idx],
                epochs=max_epochs, monitor=(x[:, cal_idx], y[:, cal_idx]),
                patience=patience, adam=adam, seed=[seed, b, 1],
            )
        except nn.TrainingDiverged as exc:
            raise nn.TrainingDiverged(exc.epoch, f"split {b} diverged") from exc
        residuals = (y[:, cal_idx] - mfae.predict(model, x[:, cal_idx])).T
        s = modulation(residuals)
        k_s = critical_quantile(scores(residuals, s, kind), delta)
        return SplitRecord(
            train_idx=[int(i) for i in train_idx],
            cal_idx=[int(i) for i in cal_idx],
            critical_quantile=k_s,
            epoch=int(result.best_epoch),
            radius=k_s * s,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_split, range(n_splits)))
    else:
        records = [run_split(b) for b in range(n_splits)]

    radii = np.stack([rec.radius for rec in records])
    epochs = [rec.epoch for rec in records]
    return MultiSplitCalibration(
        radii=radii,
        epochs=epochs,
        radius=np.median(radii, axis=0),
        epoch=_median_epoch(epochs),
        delta=delta,
        kind=kind,
        splits=records,
        seed=seed,
    )


@dataclass
class CoverageStats:
    nominal: float  # fraction of snapshots entirely inside their band
    pointwise: float  # fraction of individual components inside
    width_mean: float
    width_std: float


def coverage(lower, upper, truths) -> CoverageStats:
    """Band containment statistics; boundary contact counts as covered."""
    lo = np.atleast_2d(np.asarray(lower, dtype=np.float64))
    hi = np.atleast_2d(np.asarray(upper, dtype=np.float64))
    t = np.atleast_2d(np.asarray(truths, dtype=np.float64))
    lo, hi = np.broadcast_to(lo, t.shape), np.broadcast_to(hi, t.shape)
    inside = (t >= lo) & (t <= hi)
    widths = hi - lo
    return CoverageStats(
        nominal=float(inside.all(axis=1).mean()),
        pointwise=float(inside.mean()),
        width_mean=float(widths.mean()),
        width_std=float(widths.std()),
    )
