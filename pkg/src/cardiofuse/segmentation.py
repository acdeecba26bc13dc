"""Seeded region growing and conversion of masks to meshes and point clouds."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from skimage.measure import marching_cubes

from .core import PointCloud
from .errors import EmptyInput, IndexOutOfBounds, InvalidParameter
from .volume import SpatialReference, Volume

# fixed neighbor order keeps the running-mean growth deterministic
_NEIGHBOR_OFFSETS_6 = (
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
)


@dataclass(frozen=True)
class Mask:
    """Boolean 3D grid sharing a volume's spatial reference."""

    data: np.ndarray
    ref: SpatialReference

    def __post_init__(self):
        data = np.asarray(self.data, dtype=bool)
        if data.shape != self.ref.image_size:
            raise InvalidParameter(
                f"mask shape {data.shape} does not match reference size "
                f"{self.ref.image_size}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh in world coordinates, optionally valued per vertex."""

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_values: Optional[np.ndarray] = None

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        tris = np.asarray(self.triangles, dtype=int).reshape(-1, 3)
        if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
            raise InvalidParameter("triangle indices out of range")
        if len(tris) and np.any(
            (tris[:, 0] == tris[:, 1])
            | (tris[:, 1] == tris[:, 2])
            | (tris[:, 0] == tris[:, 2])
        ):
            raise InvalidParameter("degenerate triangle with repeated index")
        verts.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        if self.vertex_values is not None:
            vals = np.asarray(self.vertex_values, dtype=float)
            if vals.shape != (len(verts),):
                raise InvalidParameter("vertex_values length mismatch")
            vals.setflags(write=False)
            object.__setattr__(self, "vertex_values", vals)


def region_grow(
    vol: Volume,
    seeds: Sequence[Tuple[int, int, int]],
    threshold: float,
    connectivity: int = 6,
) -> Mask:
    """Grow a region from seed voxels by the running-mean gray-level criterion.

    A FIFO queue visits voxels in a fixed 6-neighbor order; an unmarked
    neighbor with |v - M| <= threshold joins the region and updates the
    running mean M = (n M + v) / (n + 1).  Growth ends when the queue
    empties, so identical inputs give bit-identical masks.
    """
    if len(seeds) == 0:
        raise EmptyInput("at least one seed is required")
    if threshold < 0:
        raise InvalidParameter("threshold must be >= 0")
    if connectivity == 6:
        offsets = _NEIGHBOR_OFFSETS_6
    elif connectivity == 26:
        offsets = tuple(
            (di, dj, dk)
            for di in (1, -1, 0)
            for dj in (1, -1, 0)
            for dk in (1, -1, 0)
            if (di, dj, dk) != (0, 0, 0)
        )
    else:
        raise InvalidParameter("connectivity must be 6 or 26")

    data = vol.data
    size = vol.ref.image_size
    mask = np.zeros(size, dtype=bool)
    queue: deque = deque()
    mean = 0.0
    for seed in seeds:
        i, j, k = (int(c) for c in seed)
        if not (0 <= i < size[0] and 0 <= j < size[1] and 0 <= k < size[2]):
            raise IndexOutOfBounds(f"seed {(i, j, k)} outside size {size}")
        mean += data[i, j, k]
        mask[i, j, k] = True
        queue.append((i, j, k))
    n = len(seeds)
    mean /= n

    while queue:
        i, j, k = queue.popleft()
        for di, dj, dk in offsets:
            ni, nj, nk = i + di, j + dj, k + dk
            if not (0 <= ni < size[0] and 0 <= nj < size[1] and 0 <= nk < size[2]):
                continue
            if mask[ni, nj, nk]:
                continue
            v = data[ni, nj, nk]
            if abs(v - mean) <= threshold:
                mask[ni, nj, nk] = True
                queue.append((ni, nj, nk))
                mean = (n * mean + v) / (n + 1)
                n += 1
    return Mask(mask, vol.ref)


def _signed_volume(vertices: np.ndarray, triangles: np.ndarray) -> float:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def extract_isosurface(mask: Mask) -> TriMesh:
    """Closed marching-cubes surface of the mask at iso-level 0.5.

    The indicator field is padded by one background layer so surfaces at
    the volume border close; vertices come out in world coordinates with a
    consistent outward orientation.
    """
    if not mask.data.any():
        raise EmptyInput("mask has no set voxels")
    field = np.pad(mask.data.astype(np.float32), 1)
    verts, faces, _, _ = marching_cubes(field, level=0.5)
    # padded index -> original voxel center world position
    world = np.asarray(mask.ref.origin) + (verts - 0.5) * np.asarray(
        mask.ref.pixel_extent
    )
    if _signed_volume(world, faces) < 0:
        faces = faces[:, ::-1]
    return TriMesh(world, faces)


def boundary_voxels(mask: Mask) -> np.ndarray:
    """(N, 3) indices of set voxels with at least one unset/outside 6-neighbor."""
    padded = np.pad(mask.data, 1)
    interior = (
        padded[2:, 1:-1, 1:-1]
        & padded[:-2, 1:-1, 1:-1]
        & padded[1:-1, 2:, 1:-1]
        & padded[1:-1, :-2, 1:-1]
        & padded[1:-1, 1:-1, 2:]
        & padded[1:-1, 1:-1, :-2]
    )
    boundary = mask.data & ~interior
    # ascending (k, j, i) scan order: k slowest, i fastest
    kk, jj, ii = np.nonzero(boundary.transpose(2, 1, 0))
    return np.stack([ii, jj, kk], axis=1)


def mask_to_point_cloud(mask: Mask) -> PointCloud:
    """World-coordinate centers of the mask's boundary voxels."""
    if not mask.data.any():
        raise EmptyInput("mask has no set voxels")
    idx = boundary_voxels(mask)
    centers = np.asarray(mask.ref.origin) + (idx + 0.5) * np.asarray(
        mask.ref.pixel_extent
    )
    return PointCloud(centers)
