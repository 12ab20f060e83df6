"""k-means segmentation of the DAB rendering with Davies-Bouldin model selection."""
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, TooFewPoints, UndefinedForKOne

STD_FLOOR = 1e-6
MAX_ITER = 300
TOL = 1e-6


@dataclass
class FeatureSet:
    """Standardized per-pixel features of the masked region.

    ``values`` is ``(n, d)``; ``raw`` holds the same rows before
    standardization and ``pixel_index`` the flat raster index of each row.
    ``weights`` counts how many pixels each row stands for (all ones unless
    the set was compressed).
    """

    values: np.ndarray
    raw: np.ndarray
    pixel_index: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.ones(len(self.values))

    @property
    def n(self):
        return len(self.values)

    @property
    def d(self):
        return self.values.shape[1]

    def unique(self):
        """Collapse identical rows; returns ``(compressed, inverse)``."""
        raw, first, inverse, counts = np.unique(self.raw, axis=0, return_index=True,
                                                return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        # weight each distinct row by the pixels it stands for
        weights = np.bincount(inverse, weights=self.weights, minlength=len(raw))
        compressed = FeatureSet(self.values[first], raw, self.pixel_index[first], weights)
        return compressed, inverse


@dataclass
class Clustering:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    mean_display_intensity: np.ndarray = None
    db_index: float = float("nan")


def standardize(x, eps=STD_FLOOR):
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=0)
    sd = np.maximum(x.std(axis=0), eps)
    return (x - mu) / sd


def extract_features(dab_rgb, mask, eps=STD_FLOOR):
    """Masked pixels of the DAB rendering as z-scored rows (one column per channel)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("no tissue pixel to segment")
    pixels = np.asarray(dab_rgb).reshape(-1, np.asarray(dab_rgb).shape[-1])
    index = np.flatnonzero(mask.ravel())
    raw = pixels[index].astype(np.float64)
    return FeatureSet(standardize(raw, eps), raw, index)


def _sq_dists(x, centroids):
    return ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _plus_plus(x, w, k, rng):
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.choice(len(x), p=w / w.sum())]
    closest = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        p = w * closest
        total = p.sum()
        if total <= 0:
            idx = int(np.argmax(closest))
        else:
            idx = rng.choice(len(x), p=p / total)
        centroids[i] = x[idx]
        closest = np.minimum(closest, ((x - centroids[i]) ** 2).sum(axis=1))
    return centroids


def sse(x, labels, centroids, w=None):
    w = np.ones(len(x)) if w is None else w
    return float(np.sum(w * ((x - centroids[labels]) ** 2).sum(axis=1)))


def kmeans(f, k, seed=0, max_iter=MAX_ITER, tol=TOL, history=None):
    """Lloyd's algorithm with k-means++ seeding.

    Parameters
    ----------
    f : FeatureSet or ndarray
        Points to cluster; a FeatureSet's ``weights`` are honoured.
    k : int
        Number of clusters.
    seed : int
        Seed for the k-means++ draws.
    history : list, optional
        If given, the weighted SSE after each assignment step is appended.
    """
    if isinstance(f, FeatureSet):
        x, w = f.values, f.weights
    else:
        x = np.asarray(f, dtype=np.float64)
        w = np.ones(len(x))
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(x):
        raise TooFewPoints(f"k={k} but only {len(x)} points")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus(x, w, k, rng)
    labels = np.zeros(len(x), dtype=np.int64)
    for _ in range(max_iter):
        d2 = _sq_dists(x, centroids)
        labels = np.argmin(d2, axis=1)
        if history is not None:
            history.append(sse(x, labels, centroids, w))
        mass = np.bincount(labels, weights=w, minlength=k)
        sums = np.stack([np.bincount(labels, weights=w * x[:, col], minlength=k)
                         for col in range(x.shape[1])], axis=1)
        new = sums / np.maximum(mass, 1e-300)[:, None]
        own = d2[np.arange(len(x)), labels]
        for j in np.flatnonzero(mass <= 0):
            # empty cluster: move it onto the point farthest from its centroid
            far = int(np.argmax(own))
            new[j] = x[far]
            labels[far] = j
            own[far] = -1.0
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        if shift < tol:
            break
    labels = np.argmin(_sq_dists(x, centroids), axis=1)
    return Clustering(k=k, labels=labels, centroids=centroids)


def davies_bouldin(f, c):
    """Mean over clusters of the worst ``(s_i + s_j) / d_ij`` ratio."""
    if isinstance(f, FeatureSet):
        x, w = f.values, f.weights
    else:
        x = np.asarray(f, dtype=np.float64)
        w = np.ones(len(x))
    if c.k < 2:
        raise UndefinedForKOne("Davies-Bouldin needs at least two clusters")
    mass = np.bincount(c.labels, weights=w, minlength=c.k)
    if np.any(mass <= 0):
        raise ValueError("empty cluster")
    dist = np.sqrt(((x - c.centroids[c.labels]) ** 2).sum(axis=1))
    spread = np.bincount(c.labels, weights=w * dist, minlength=c.k) / mass
    sep = np.sqrt(_sq_dists(c.centroids, c.centroids))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (spread[:, None] + spread[None, :]) / sep
    ratio[np.isnan(ratio)] = np.inf
    np.fill_diagonal(ratio, -np.inf)
    return float(ratio.max(axis=1).mean())


def _weighted_std(raw, w):
    mu = np.average(raw, axis=0, weights=w)
    return np.sqrt(np.average((raw - mu) ** 2, axis=0, weights=w))


def choose_k(f, seed=0, uniformity_tau=2.0):
    """Pick k in {1, 2, 3}.

    k=1 is returned for a near-uniform region (every raw channel std below
    ``uniformity_tau``); otherwise the k in {2, 3} with the lower
    Davies-Bouldin index wins, ties going to 2.
    """
    if f.n < 1:
        raise TooFewPoints("no points")
    distinct = len(np.unique(f.values, axis=0))
    if np.all(_weighted_std(f.raw, f.weights) < uniformity_tau) or distinct < 2:
        centroid = np.average(f.values, axis=0, weights=f.weights)[None, :]
        return Clustering(k=1, labels=np.zeros(f.n, dtype=np.int64), centroids=centroid)
    best = None
    for k in (2, 3):
        if k > distinct:
            continue
        c = kmeans(f, k, seed)
        try:
            c.db_index = davies_bouldin(f, c)
        except ValueError:
            continue
        if best is None or c.db_index < best.db_index:
            best = c
    return best


def order_by_intensity(c, display_values, weights=None):
    """Relabel so cluster 0 has the lowest mean display level (darkest)."""
    weights = np.ones(len(c.labels)) if weights is None else weights
    mass = np.bincount(c.labels, weights=weights, minlength=c.k)
    sums = np.bincount(c.labels, weights=weights * display_values, minlength=c.k)
    means = sums / np.maximum(mass, 1e-300)
    order = np.argsort(means, kind="stable")
    rank = np.empty(c.k, dtype=np.int64)
    rank[order] = np.arange(c.k)
    return Clustering(k=c.k, labels=rank[c.labels], centroids=c.centroids[order],
                      mean_display_intensity=means[order], db_index=c.db_index)


def select_dab_region(dab_rgb, dab_gray, mask, seed=0, uniformity_tau=2.0, dark_tau=192.0):
    """Darkest k-means cluster of the masked DAB rendering.

    Returns
    -------
    dab_mask : ndarray of bool
        Same shape as ``mask``.
    clustering : Clustering
        Per-pixel labels (masked pixels only, raster order), ordered darkest
        first.
    """
    mask = np.asarray(mask, dtype=bool)
    f = extract_features(dab_rgb, mask)
    compact, inverse = f.unique()
    c = choose_k(compact, seed, uniformity_tau)
    gray = np.asarray(dab_gray, dtype=np.float64).ravel()[f.pixel_index]
    pixel_c = Clustering(k=c.k, labels=c.labels[inverse], centroids=c.centroids,
                         db_index=c.db_index)
    pixel_c = order_by_intensity(pixel_c, gray)
    dab_mask = np.zeros(mask.size, dtype=bool)
    if c.k == 1:
        if pixel_c.mean_display_intensity[0] < dark_tau:
            dab_mask[f.pixel_index] = True
    else:
        dab_mask[f.pixel_index[pixel_c.labels == 0]] = True
    return dab_mask.reshape(mask.shape), pixel_c
