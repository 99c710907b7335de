"""Synthetic low-fidelity data generators.

Two degradation families: precision reduction (modal truncation of the
snapshot matrix, quantization, noise/bias) and resolution reduction
(farthest-point subsampling, k-nearest averaging, voxel binning). Stages
compose into a declarative recipe that replays bit-identically for fixed
seeds.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .data import SnapshotSet


def _truncate_by_energy(x, energy):
    if not 0.0 < energy <= 1.0:
        raise ValueError("energy must be in (0, 1]")
    svd = linalg.thin_svd(x)
    cum = np.cumsum(svd.sigma**2)
    ratios = cum / cum[-1]
    r_star = int(np.argmax(ratios >= energy)) + 1
    return svd.reconstruct(r_star), r_star, float(ratios[r_star - 1])


def pod_truncate(x, energy):
    """Rank-truncate a D x N snapshot matrix by cumulative modal energy.

    Keeps the smallest leading mode count whose cumulative squared singular
    values reach `energy` (fraction of the total); returns the truncated
    reconstruction and that mode count.
    """
    x_r, r_star, _ = _truncate_by_energy(x, energy)
    return x_r, r_star


def fps(points, m, seed, start=None):
    """Greedy max-min farthest-point subsample of an n x c cloud (c <= 3).

    The first point is seed-random (or `start` when given); each following
    pick maximizes the minimum squared distance to the already-selected
    set, ties broken by lowest index. Returns indices in selection order.
    """
    p = linalg.check_matrix(points, "points", max_cols=3)
    n = p.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must be in 1..{n}")
    if start is None:
        start = int(np.random.default_rng(seed).integers(n))
    selected = [start]
    min_sq = ((p - p[start]) ** 2).sum(axis=1)
    while len(selected) < m:
        nxt = int(np.argmax(min_sq))
        selected.append(nxt)
        min_sq = np.minimum(min_sq, ((p - p[nxt]) ** 2).sum(axis=1))
    return selected


def knn_average(points, values, centers, k):
    """Mean of the k nearest points' values at each center index.

    Distances are Euclidean in the coordinates; ties take the lowest index;
    a center is its own zero-distance neighbor.
    """
    p = linalg.check_matrix(points, "points", max_cols=3)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if not 1 <= k <= p.shape[0]:
        raise ValueError("k must be in 1..n")
    out = np.empty((len(centers), v.shape[1]))
    for row, c in enumerate(centers):
        sq = ((p - p[c]) ** 2).sum(axis=1)
        nearest = np.argsort(sq, kind="stable")[:k]
        out[row] = v[nearest].mean(axis=0)
    return out


def voxelize(points, values, size, pca_align=False):
    """Bin a point cloud onto a regular grid of cell width `size`.

    Cells are the lattice floor(coord / size) in the (optionally
    PCA-rotated) frame; each occupied cell emits its geometric center
    (mapped back through the inverse rotation when aligned) and the mean
    of the member values. Output is sorted by integer cell coordinates.
    """
    if size <= 0:
        raise ValueError("voxel size must be positive")
    p = linalg.check_matrix(points, "points", max_cols=3)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if pca_align:
        centroid, rotation = linalg.pca_axes(p)
        frame = (p - centroid) @ rotation
    else:
        frame = p
    cells = np.floor(frame / size).astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    m = uniq.shape[0]
    counts = np.bincount(inverse, minlength=m).astype(np.float64)
    means = np.empty((m, v.shape[1]))
    for j in range(v.shape[1]):
        means[:, j] = np.bincount(inverse, weights=v[:, j], minlength=m) / counts
    centers = (uniq + 0.5) * size
    if pca_align:
        centers = centers @ rotation.T + centroid
    return centers, means


def quantize(x, levels):
    """Snap every entry to the nearest of `levels` uniform levels spanning
    the global [min, max]; exact midpoints round toward the lower level.
    Constant input is returned unchanged."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    a = np.asarray(x, dtype=np.float64)
    vmin, vmax = float(a.min()), float(a.max())
    if vmin == vmax:
        return a.copy()
    grid = np.linspace(vmin, vmax, levels)
    pos = np.searchsorted(grid, a)
    pos = np.clip(pos, 1, levels - 1)
    low, high = grid[pos - 1], grid[pos]
    return np.where(a - low <= high - a, low, high)


def perturb(x, sigma, bias, seed):
    """Add i.i.d. Gaussian noise of the given sigma plus a constant bias."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    a = np.asarray(x, dtype=np.float64)
    out = a.copy()
    if sigma > 0:
        out += np.random.default_rng(seed).normal(0.0, sigma, size=a.shape)
    if bias != 0.0:
        out += bias
    return out


# --- declarative recipes ---------------------------------------------------


@dataclass
class PodTruncate:
    energy: float
    kind = "pod_truncate"


@dataclass
class Fps:
    m: int
    seed: int = None
    kind = "fps"


@dataclass
class KnnAverage:
    m: int
    k: int
    seed: int = None
    kind = "knn_average"


@dataclass
class Voxelize:
    size: float
    pca_align: bool = False
    kind = "voxelize"


@dataclass
class Quantize:
    levels: int
    kind = "quantize"


@dataclass
class Noise:
    sigma: float
    seed: int = None
    kind = "noise"


@dataclass
class Bias:
    offset: float
    kind = "bias"


STAGE_TYPES = {c.kind: c for c in (PodTruncate, Fps, KnnAverage, Voxelize, Quantize, Noise, Bias)}


@dataclass
class DegradationRecipe:
    stages: list

    def to_json(self):
        stages = []
        for stage in self.stages:
            doc = {"kind": stage.kind}
            doc.update({k: v for k, v in stage.__dict__.items()})
            stages.append(doc)
        return json.dumps({"stages": stages}, indent=2)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        stages = []
        for sdoc in doc["stages"]:
            sdoc = dict(sdoc)
            kind = sdoc.pop("kind")
            if kind not in STAGE_TYPES:
                raise ValueError(f"unknown recipe stage {kind!r}")
            stages.append(STAGE_TYPES[kind](**sdoc))
        return cls(stages)


def _stage_seed(stage, master_seed, position):
    if getattr(stage, "seed", None) is not None:
        return stage.seed
    # named stream per (master seed, stage position); explicit stage seeds
    # keep streams stable when stages are inserted
    return int(np.random.default_rng([master_seed, position]).integers(2**31))


def apply_recipe(s, recipe, master_seed=0):
    """Run a degradation recipe over a snapshot set.

    Geometry masks (FPS, KNN centers, voxel cells) are computed once from
    the shared node coordinates and applied to every snapshot. Returns the
    degraded set and a provenance dict (kept mode count, retained energy,
    mask indices).
    """
    fields = s.fields.copy()
    coords = s.coords.copy()
    provenance = {"stages": []}
    for pos, stage in enumerate(recipe.stages):
        entry = {"kind": stage.kind}
        if isinstance(stage, PodTruncate):
            fields, r_star, retained = _truncate_by_energy(fields, stage.energy)
            entry["r_star"] = r_star
            entry["retained_energy"] = retained
        elif isinstance(stage, Fps):
            mask = fps(coords, stage.m, _stage_seed(stage, master_seed, pos))
            fields = fields[mask]
            coords = coords[mask]
            entry["mask"] = list(mask)
        elif isinstance(stage, KnnAverage):
            centers = fps(coords, stage.m, _stage_seed(stage, master_seed, pos))
            fields = knn_average(coords, fields, centers, stage.k)
            coords = coords[centers]
            entry["mask"] = list(centers)
        elif isinstance(stage, Voxelize):
            coords, fields = voxelize(coords, fields, stage.size, stage.pca_align)
            entry["n_cells"] = coords.shape[0]
        elif isinstance(stage, Quantize):
            fields = quantize(fields, stage.levels)
            entry["levels"] = stage.levels
        elif isinstance(stage, Noise):
            fields = perturb(fields, stage.sigma, 0.0, _stage_seed(stage, master_seed, pos))
            entry["sigma"] = stage.sigma
        elif isinstance(stage, Bias):
            fields = perturb(fields, 0.0, stage.offset, 0)
            entry["offset"] = stage.offset
        else:
            raise ValueError(f"unknown stage {stage!r}")
        provenance["stages"].append(entry)
    out = SnapshotSet(
        fields=fields,
        coords=coords,
        params=s.params.copy(),
        param_names=list(s.param_names),
        names=list(s.names),
    )
    return out, provenance
