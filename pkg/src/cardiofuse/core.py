"""Geometric primitives: point clouds, affine transforms, nearest-neighbor queries.

World coordinates are millimetres throughout.  Transforms use the
column-vector convention p' = A @ p + t.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInput, SingularTransform

_DET_EPS = 1e-12


class TransformKind(Enum):
    RIGID = "rigid"
    SIMILARITY = "similarity"
    ANISOTROPIC_SIMILARITY = "anisotropic-similarity"
    AFFINE = "affine"


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite components")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """Ordered 3D points, optionally carrying one scalar value per point."""

    points: np.ndarray
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = _as_points(self.points)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != (len(pts),):
                raise ValueError(
                    f"values shape {vals.shape} does not match {len(pts)} points"
                )
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class AffineTransform3:
    """3x3 linear part plus translation; acts as p' = linear @ p + translation."""

    linear: np.ndarray
    translation: np.ndarray
    kind: TransformKind = TransformKind.AFFINE

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=float)
        tr = np.asarray(self.translation, dtype=float).reshape(3)
        if lin.shape != (3, 3):
            raise ValueError(f"linear part must be 3x3, got {lin.shape}")
        if not (np.all(np.isfinite(lin)) and np.all(np.isfinite(tr))):
            raise ValueError("transform contains non-finite entries")
        lin.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "translation", tr)

    @staticmethod
    def identity() -> "AffineTransform3":
        return AffineTransform3(np.eye(3), np.zeros(3), TransformKind.RIGID)

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points."""
        return points @ self.linear.T + self.translation

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix, row-major, last row (0, 0, 0, 1)."""
        m = np.eye(4)
        m[:3, :3] = self.linear
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray, kind: TransformKind = TransformKind.AFFINE) -> "AffineTransform3":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {m.shape}")
        return AffineTransform3(m[:3, :3], m[:3, 3], kind)


@dataclass(frozen=True)
class Pairing:
    """A matched source/target index pair with its Euclidean distance."""

    src_index: int
    dst_index: int
    distance: float


def apply_transform(cloud: PointCloud, t: AffineTransform3) -> PointCloud:
    """Transform every point of a cloud; values and order are preserved."""
    if len(cloud) == 0:
        raise EmptyInput("cannot transform an empty cloud")
    return PointCloud(t.apply_points(cloud.points), cloud.values)


def _combine_kinds(a: TransformKind, b: TransformKind) -> TransformKind:
    K = TransformKind
    if a == K.AFFINE or b == K.AFFINE:
        return K.AFFINE
    if a == K.RIGID and b == K.RIGID:
        return K.RIGID
    if K.ANISOTROPIC_SIMILARITY in (a, b):
        # diag(s) R composed with a similarity stays diag-scaled rotation;
        # two anisotropic factors generally do not.
        if a == K.ANISOTROPIC_SIMILARITY and b == K.ANISOTROPIC_SIMILARITY:
            return K.AFFINE
        if a == K.ANISOTROPIC_SIMILARITY:
            return K.ANISOTROPIC_SIMILARITY
        return K.AFFINE
    return K.SIMILARITY


def compose(outer: AffineTransform3, inner: AffineTransform3) -> AffineTransform3:
    """Transform applying `inner` first, then `outer`."""
    lin = outer.linear @ inner.linear
    tr = outer.linear @ inner.translation + outer.translation
    return AffineTransform3(lin, tr, _combine_kinds(outer.kind, inner.kind))


def invert(t: AffineTransform3) -> AffineTransform3:
    """Inverse transform; raises SingularTransform when the linear part is singular."""
    det = np.linalg.det(t.linear)
    if not np.isfinite(det) or abs(det) < _DET_EPS:
        raise SingularTransform(f"linear part has determinant {det}")
    inv = np.linalg.inv(t.linear)
    return AffineTransform3(inv, -inv @ t.translation, t.kind)


def nearest_neighbor_indices(query: np.ndarray, target: np.ndarray):
    """Exact nearest neighbor of each query point in `target`.

    Returns (distances, indices).  Ties in distance resolve to the smallest
    target index, so results are deterministic and match a brute-force scan.
    """
    if len(target) == 0:
        raise EmptyInput("target cloud is empty")
    tree = cKDTree(target)
    k = min(2, len(target))
    dist, idx = tree.query(query, k=k)
    if k == 1:
        return dist.reshape(-1), np.zeros(len(query), dtype=int)
    best_d = dist[:, 0].copy()
    best_i = idx[:, 0].copy()
    tied = np.nonzero(dist[:, 0] == dist[:, 1])[0]
    for qi in tied:
        cands = tree.query_ball_point(query[qi], best_d[qi])
        d = np.linalg.norm(target[cands] - query[qi], axis=1)
        dmin = d.min()
        best_d[qi] = dmin
        best_i[qi] = min(c for c, dc in zip(cands, d) if dc == dmin)
    return best_d, best_i


def nearest_neighbors(query: PointCloud, target: PointCloud) -> list[Pairing]:
    """One Pairing per query point against its exact nearest target point."""
    dist, idx = nearest_neighbor_indices(query.points, target.points)
    return [Pairing(i, int(j), float(d)) for i, (j, d) in enumerate(zip(idx, dist))]
