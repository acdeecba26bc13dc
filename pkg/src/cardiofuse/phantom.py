"""Synthetic ground-truth phantoms: LV-like shells, landmark grooves,
heart-like volumes and controlled perturbations.

Every generator is a pure function of its parameters including the RNG
seed, so reruns are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .coarse import LandmarkSet
from .core import AffineTransform3, PointCloud
from .errors import InvalidParameter
from .volume import SpatialReference, Volume

LANDMARKS_PER_GROOVE = 12


@dataclass(frozen=True)
class ShellParams:
    """Truncated-ellipsoid shell: semi-axes in mm, open base along +z."""

    semi_axes: Tuple[float, float, float] = (30.0, 22.0, 50.0)
    truncation_fraction: float = 0.85
    point_count: int = 2000
    rng_seed: int = 0

    def __post_init__(self):
        if any(a <= 0 for a in self.semi_axes):
            raise InvalidParameter("semi_axes must be positive")
        if not 0 < self.truncation_fraction <= 1:
            raise InvalidParameter("truncation_fraction must be in (0, 1]")
        if self.point_count < 10:
            raise InvalidParameter("point_count must be >= 10")


@dataclass(frozen=True)
class PerturbSpec:
    """Ground-truth transform plus optional noise and outlier contamination."""

    transform: AffineTransform3
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidParameter("noise_sigma must be >= 0")
        if not 0 <= self.outlier_fraction < 1:
            raise InvalidParameter("outlier_fraction must be in [0, 1)")


def generate_lv_shell(p: ShellParams) -> Tuple[PointCloud, LandmarkSet]:
    """Seeded quasi-uniform sampling of a truncated ellipsoid surface.

    The apex sits at z = -c; the base is open at z = c (2 f - 1) where f is
    the truncation fraction.  Landmark grooves are two opposing meridian
    polylines (azimuth 0 and pi), each ordered base to apex so both groups
    honor the common storage-order contract.
    """
    a, b, c = p.semi_axes
    z_cut = c * (2.0 * p.truncation_fraction - 1.0)
    rng = np.random.default_rng(p.rng_seed)

    kept = []
    total = 0
    while total < p.point_count:
        u = rng.normal(size=(4 * p.point_count, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        pts = u * np.array([a, b, c])
        pts = pts[pts[:, 2] <= z_cut]
        kept.append(pts)
        total += len(pts)
    points = np.vstack(kept)[: p.point_count]

    # meridians: theta measured from +z, so increasing theta runs base -> apex
    theta_base = max(np.arccos(min(z_cut / c, 1.0)), 0.15)
    theta = np.linspace(theta_base, np.pi - 0.05, LANDMARKS_PER_GROOVE)
    anterior = np.stack(
        [a * np.sin(theta), np.zeros_like(theta), c * np.cos(theta)], axis=1
    )
    posterior = np.stack(
        [-a * np.sin(theta), np.zeros_like(theta), c * np.cos(theta)], axis=1
    )
    return PointCloud(points), LandmarkSet(anterior, posterior)


def perturb_cloud(
    cloud: PointCloud, landmarks: LandmarkSet, spec: PerturbSpec
) -> Tuple[PointCloud, LandmarkSet]:
    """Transform, then contaminate, a shell and its landmarks.

    The ground-truth transform applies to everything; Gaussian noise of the
    given per-axis sigma applies to cloud points and landmarks; an outlier
    fraction of cloud points (never landmarks) is replaced by uniform
    samples in the transformed bounding box inflated by 20 %.
    """
    rng = np.random.default_rng(spec.rng_seed)
    t = spec.transform
    pts = t.apply_points(cloud.points)
    ant = t.apply_points(landmarks.anterior)
    post = t.apply_points(landmarks.posterior)

    if spec.noise_sigma > 0:
        pts = pts + rng.normal(scale=spec.noise_sigma, size=pts.shape)
        ant = ant + rng.normal(scale=spec.noise_sigma, size=ant.shape)
        post = post + rng.normal(scale=spec.noise_sigma, size=post.shape)

    if spec.outlier_fraction > 0:
        n = len(pts)
        k = int(round(spec.outlier_fraction * n))
        if k > 0:
            lo = pts.min(axis=0)
            hi = pts.max(axis=0)
            center = (lo + hi) / 2.0
            half = (hi - lo) / 2.0 * 1.2
            idx = rng.choice(n, size=k, replace=False)
            pts = pts.copy()
            pts[idx] = rng.uniform(center - half, center + half, size=(k, 3))

    return PointCloud(pts, cloud.values), LandmarkSet(ant, post)


@dataclass(frozen=True)
class ShellDescriptor:
    """An ellipsoidal region assigning an interior intensity."""

    center: Tuple[float, float, float]
    semi_axes: Tuple[float, float, float]
    intensity: float

    def __post_init__(self):
        if any(a <= 0 for a in self.semi_axes):
            raise InvalidParameter("semi_axes must be positive")


def generate_phantom_volume(
    ref: SpatialReference, shells: Sequence[ShellDescriptor]
) -> Volume:
    """Voxel intensities from nested ellipsoids, listed outermost first.

    Shells are painted in list order, later (inner) shells overwriting
    earlier ones, so each voxel center ends up with the intensity of the
    innermost shell containing it; background is 0.
    """
    nx, ny, nz = ref.image_size
    ii, jj, kk = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    centers = np.stack([ii, jj, kk], axis=-1) + 0.5
    world = np.asarray(ref.origin) + centers * np.asarray(ref.pixel_extent)

    data = np.zeros(ref.image_size)
    for shell in shells:
        rel = (world - np.asarray(shell.center)) / np.asarray(shell.semi_axes)
        inside = (rel ** 2).sum(axis=-1) <= 1.0
        data[inside] = shell.intensity
    return Volume(data, ref)
