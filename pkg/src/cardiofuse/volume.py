"""Volumetric grids with world-coordinate placement, sampling and warping.

The spatial reference places voxel (0, 0, 0) so that the given origin is
the lower corner of the first voxel; voxel centers sit half a voxel inside.
World limits along each axis are [origin, origin + size * voxel].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import AffineTransform3, invert
from .errors import IndexOutOfBounds, InvalidParameter


@dataclass(frozen=True)
class SpatialReference:
    """Maps voxel indices (i, j, k) to world millimetre coordinates."""

    image_size: Tuple[int, int, int]
    pixel_extent: Tuple[float, float, float]
    origin: Tuple[float, float, float]

    def __post_init__(self):
        size = tuple(int(s) for s in self.image_size)
        voxel = tuple(float(v) for v in self.pixel_extent)
        origin = tuple(float(o) for o in self.origin)
        if any(s < 1 for s in size):
            raise InvalidParameter(f"image_size must be >= 1 per axis, got {size}")
        if any(v <= 0 for v in voxel):
            raise InvalidParameter(f"pixel_extent must be positive, got {voxel}")
        object.__setattr__(self, "image_size", size)
        object.__setattr__(self, "pixel_extent", voxel)
        object.__setattr__(self, "origin", origin)

    @property
    def image_extent(self) -> Tuple[float, float, float]:
        return tuple(s * v for s, v in zip(self.image_size, self.pixel_extent))

    @property
    def world_limits(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(
            (o, o + e) for o, e in zip(self.origin, self.image_extent)
        )


def build_spatial_reference(size, voxel, origin) -> SpatialReference:
    """Spatial reference from voxel counts, voxel size (mm) and first-voxel corner."""
    return SpatialReference(tuple(size), tuple(voxel), tuple(origin))


@dataclass(frozen=True)
class Volume:
    """3D scalar grid indexed (i, j, k) plus its spatial reference."""

    data: np.ndarray
    ref: SpatialReference

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != self.ref.image_size:
            raise InvalidParameter(
                f"data shape {data.shape} does not match reference size "
                f"{self.ref.image_size}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidParameter("volume contains non-finite samples")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


def voxel_to_world(ref: SpatialReference, index) -> np.ndarray:
    """World coordinates of a voxel center (voxel-center convention)."""
    idx = np.asarray(index)
    if np.any(idx < 0) or np.any(idx >= np.asarray(ref.image_size)):
        raise IndexOutOfBounds(f"index {tuple(idx)} outside size {ref.image_size}")
    return np.asarray(ref.origin) + (idx + 0.5) * np.asarray(ref.pixel_extent)


def world_to_continuous_index(ref: SpatialReference, points: np.ndarray) -> np.ndarray:
    """Fractional voxel indices where integers land on voxel centers."""
    return (np.asarray(points, dtype=float) - np.asarray(ref.origin)) / np.asarray(
        ref.pixel_extent
    ) - 0.5


def sample_trilinear_many(
    vol: Volume, points: np.ndarray, fill: float = 0.0
) -> Tuple[np.ndarray, np.ndarray]:
    """Trilinear samples at (N, 3) world points.

    Returns (values, inside); points outside the convex hull of voxel
    centers get the fill value and inside=False.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    f = world_to_continuous_index(vol.ref, pts)
    size = np.asarray(vol.ref.image_size)

    # tolerate rounding from the world <-> index round trip at the borders
    eps = 1e-9
    inside = np.all((f >= -eps) & (f <= size - 1 + eps), axis=1)
    # snap near-integer indices so sampling exactly at voxel centers (for
    # example an identity warp) returns the stored values bit-for-bit
    snapped = np.round(f)
    f = np.where(np.abs(f - snapped) < eps, snapped, f)
    fc = np.clip(f, 0.0, size - 1.0)
    base = np.minimum(np.floor(fc).astype(int), size - 2)
    base = np.maximum(base, 0)
    frac = fc - base

    d = vol.data
    i, j, k = base[:, 0], base[:, 1], base[:, 2]
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    c000 = d[i, j, k]
    c100 = d[np.minimum(i + 1, size[0] - 1), j, k]
    c010 = d[i, np.minimum(j + 1, size[1] - 1), k]
    c110 = d[np.minimum(i + 1, size[0] - 1), np.minimum(j + 1, size[1] - 1), k]
    kk = np.minimum(k + 1, size[2] - 1)
    c001 = d[i, j, kk]
    c101 = d[np.minimum(i + 1, size[0] - 1), j, kk]
    c011 = d[i, np.minimum(j + 1, size[1] - 1), kk]
    c111 = d[np.minimum(i + 1, size[0] - 1), np.minimum(j + 1, size[1] - 1), kk]

    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    values = c0 * (1 - fz) + c1 * fz
    values = np.where(inside, values, fill)
    return values, inside


def sample_trilinear(vol: Volume, p) -> Optional[float]:
    """Trilinear sample at one world point; None when outside the center hull."""
    values, inside = sample_trilinear_many(vol, np.asarray(p, dtype=float).reshape(1, 3))
    return float(values[0]) if inside[0] else None


def warp_volume(
    moving: Volume,
    t: AffineTransform3,
    out_ref: SpatialReference,
    fill: float = 0.0,
) -> Volume:
    """Resample `moving` into the output view under moving-world -> fixed-world t.

    Pull warping: each output voxel center is mapped back through the
    inverse transform and sampled trilinearly; out-of-field samples take
    the fill value.
    """
    t_inv = invert(t)
    nx, ny, nz = out_ref.image_size
    ii, jj, kk = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    idx = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    centers = np.asarray(out_ref.origin) + (idx + 0.5) * np.asarray(
        out_ref.pixel_extent
    )
    src_pts = t_inv.apply_points(centers)
    values, _ = sample_trilinear_many(moving, src_pts, fill=fill)
    return Volume(values.reshape(nx, ny, nz), out_ref)
