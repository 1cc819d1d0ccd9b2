"""Industry classifications: fundamental code files and k-means statistical clusters."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class ClassificationError(ValueError):
    pass


@dataclass(frozen=True)
class Classification:
    levels: tuple[dict, ...]  # most granular first; ticker -> cluster id
    kind: str  # "fundamental" | "statistical"

    def __post_init__(self):
        if self.kind not in ("fundamental", "statistical"):
            raise ClassificationError(f"unknown classification kind {self.kind!r}")
        if not self.levels:
            raise ClassificationError("classification has no levels")

    def n_clusters(self, level: int = 0) -> int:
        return len(set(self.levels[level].values()))

    def is_nested(self) -> bool:
        """Every level-k cluster maps into exactly one level-(k+1) cluster."""
        for fine, coarse in zip(self.levels, self.levels[1:]):
            parent = {}
            for t, c in fine.items():
                if parent.setdefault(c, coarse[t]) != coarse[t]:
                    return False
        return True


@dataclass(frozen=True)
class DummyMatrix:
    tickers: tuple[str, ...]
    clusters: tuple
    labels: np.ndarray  # column index of each row's cluster

    @property
    def matrix(self) -> np.ndarray:
        m = np.zeros((len(self.tickers), len(self.clusters)))
        m[np.arange(len(self.tickers)), self.labels] = 1.0
        return m

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.clusters))

    def take(self, rows: np.ndarray) -> "DummyMatrix":
        """Restrict to ``rows`` (positions), dropping clusters left empty."""
        labels = self.labels[rows]
        used, new = np.unique(labels, return_inverse=True)
        return DummyMatrix(
            tickers=tuple(self.tickers[i] for i in rows),
            clusters=tuple(self.clusters[k] for k in used),
            labels=new.astype(int),
        )


def load_fundamental_classification(source, universe=None) -> Classification:
    """Read a ``ticker,code`` CSV (header optional) into a one-level classification.

    If ``universe`` (a Universe or a ticker sequence) is given, every member
    must be mapped.
    """
    mapping: dict[str, int] = {}
    path = Path(source)
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and row[0].strip().lower() == "ticker":
                continue
            if len(row) < 2:
                raise ClassificationError(f"{path}:{lineno}: expected ticker,code")
            try:
                mapping[row[0].strip()] = int(row[1])
            except ValueError:
                raise ClassificationError(f"{path}:{lineno}: code {row[1]!r} is not an integer") from None
    cls = Classification(levels=(mapping,), kind="fundamental") if mapping else None
    if universe is not None:
        members = getattr(universe, "members", universe)
        missing = [t for t in members if t not in mapping]
        if missing:
            shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
            raise ClassificationError(f"{len(missing)} universe tickers missing from {path}: {shown}")
    if cls is None:
        raise ClassificationError(f"{path} contains no ticker codes")
    return cls


def write_classification(cls: Classification, path) -> Path:
    """CSV ``ticker,level1[,level2,...]``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["ticker"] + [f"level{k + 1}" for k in range(len(cls.levels))]
    if cls.kind == "fundamental" and len(cls.levels) == 1:
        header = ["ticker", "code"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in sorted(cls.levels[0]):
            w.writerow([t] + [lvl[t] for lvl in cls.levels])
    return path


def read_classification(path) -> Classification:
    """Inverse of :func:`write_classification`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r]
    nlev = len(header) - 1
    levels = tuple({r[0]: int(r[k + 1]) for r in body} for k in range(nlev))
    kind = "fundamental" if header[1] == "code" else "statistical"
    return Classification(levels=levels, kind=kind)


def _sqdist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _farthest_point_init(x: np.ndarray, k: int, first: int) -> np.ndarray:
    centers = [first]
    mind = _sqdist(x, x[[first]])[:, 0]
    for _ in range(1, k):
        nxt = int(np.argmax(mind))
        centers.append(nxt)
        mind = np.minimum(mind, _sqdist(x, x[[nxt]])[:, 0])
    return x[centers].copy()


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int):
    labels = None
    for _ in range(max_iter):
        new = np.argmin(_sqdist(x, centers), axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(centers.shape[0]):
            pts = x[labels == j]
            if len(pts):
                centers[j] = pts.mean(0)
    d = _sqdist(x, centers)
    labels = np.argmin(d, axis=1)
    inertia = float(d[np.arange(len(x)), labels].sum())
    return labels, centers, inertia


def kmeans(x: np.ndarray, k: int, seed: int = 0, n_restarts: int = 10, max_iter: int = 100):
    """Lloyd k-means with farthest-point seeding; best of ``n_restarts`` by inertia.

    Each restart draws its first center from ``seed``; the rest are chosen
    greedily as the point farthest from the centers picked so far.
    Returns ``(labels, centers, inertia)`` with labels relabelled in order of
    first appearance so results compare across runs.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if k > n:
        logger.warning("k=%d exceeds %d points; clamping", k, n)
        k = n
    if k < 1:
        raise ClassificationError("k must be at least 1")
    rng = np.random.default_rng(seed)
    firsts = rng.integers(0, n, size=n_restarts)
    best = None
    for first in firsts:
        res = _lloyd(x, _farthest_point_init(x, k, int(first)), max_iter)
        if best is None or res[2] < best[2]:
            best = res
    labels, centers, inertia = best
    _, first_pos = np.unique(labels, return_index=True)
    order = np.unique(labels)[np.argsort(first_pos)]
    remap = np.empty(k, dtype=int)
    remap[order] = np.arange(order.size)
    # centers not owning any point go to the end
    rest = np.setdiff1d(np.arange(k), order)
    remap[rest] = np.arange(order.size, k)
    out_centers = np.empty_like(centers)
    out_centers[remap] = centers
    return remap[labels], out_centers, inertia


def normalize_returns(returns: np.ndarray) -> np.ndarray:
    """Divide each row (ticker) by its sample standard deviation; flat rows stay zero."""
    r = np.asarray(returns, dtype=float)
    sd = r.std(axis=1, ddof=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sd > 0, r / np.where(sd > 0, sd, 1.0), 0.0)
    return out


def build_statistical_classification(
    returns: np.ndarray,
    tickers: Sequence[str],
    levels: Sequence[int] = (100, 30, 10),
    seed: int = 0,
    n_restarts: int = 10,
    max_iter: int = 100,
) -> Classification:
    """Nested multi-level k-means classification.

    ``returns`` is tickers x days. Level 1 clusters the volatility-normalized
    return vectors; each coarser level clusters the previous level's centroids
    and inherits membership through them, so nesting holds by construction.
    """
    x = normalize_returns(returns)
    if x.shape[0] != len(tickers):
        raise ClassificationError("returns rows must match tickers")
    if np.isnan(x).any():
        raise ClassificationError("returns must be complete over the clustering window")
    maps = []
    points = x
    lift = np.arange(x.shape[0])  # ticker -> row in `points`
    for lvl, k in enumerate(levels):
        labels, centers, _ = kmeans(points, k, seed=seed + lvl, n_restarts=n_restarts, max_iter=max_iter)
        ticker_labels = labels[lift]
        maps.append({t: int(c) for t, c in zip(tickers, ticker_labels)})
        used = np.unique(labels)
        # keep only centroids that own points, reindexed
        pos = np.full(centers.shape[0], -1)
        pos[used] = np.arange(used.size)
        points = centers[used]
        lift = pos[ticker_labels]
    return Classification(levels=tuple(maps), kind="statistical")


def dummy_matrix(classification: Classification, level: int, universe) -> DummyMatrix:
    """Binary membership matrix with rows in universe order; empty columns dropped."""
    members = list(getattr(universe, "members", universe))
    mapping: Mapping = classification.levels[level]
    missing = [t for t in members if t not in mapping]
    if missing:
        raise ClassificationError(f"classification does not cover {len(missing)} tickers: {missing[:20]}")
    codes = [mapping[t] for t in members]
    clusters = sorted(set(codes))
    col = {c: j for j, c in enumerate(clusters)}
    return DummyMatrix(
        tickers=tuple(members),
        clusters=tuple(clusters),
        labels=np.array([col[c] for c in codes], dtype=int),
    )
