"""Landmark-based coarse registration of interventricular groove annotations.

The two groove groups (anterior/posterior) are stored base-to-apex in the
same traversal direction in both modalities, so index-to-index pairing of
the downsampled groups is a valid correspondence.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AffineTransform3, TransformKind, _as_points
from .errors import DegenerateConfiguration, EmptyInput, ShapeMismatch

_RANK_EPS = 1e-9


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered groove annotations: anterior and posterior groups, base to apex."""

    anterior: np.ndarray
    posterior: np.ndarray

    def __post_init__(self):
        ant = _as_points(self.anterior)
        post = _as_points(self.posterior)
        ant.setflags(write=False)
        post.setflags(write=False)
        object.__setattr__(self, "anterior", ant)
        object.__setattr__(self, "posterior", post)


@dataclass(frozen=True)
class CoarseParams:
    with_scaling: bool = True
    target_count: Optional[int] = None

    def __post_init__(self):
        if self.target_count is not None and self.target_count < 1:
            raise ValueError("target_count must be >= 1")


def _downsample_indices(n: int, m: int) -> np.ndarray:
    m = min(m, n)
    if m == 1:
        return np.array([0])
    k = np.arange(m)
    return np.rint(k * (n - 1) / (m - 1)).astype(int)


def downsample_landmarks(landmarks: LandmarkSet, m: int) -> LandmarkSet:
    """Reduce each groove group to min(m, count) points by uniform index spacing."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(landmarks.anterior) == 0 or len(landmarks.posterior) == 0:
        raise EmptyInput("landmark group is empty")
    ant = landmarks.anterior[_downsample_indices(len(landmarks.anterior), m)]
    post = landmarks.posterior[_downsample_indices(len(landmarks.posterior), m)]
    return LandmarkSet(ant, post)


def estimate_umeyama(src, dst, with_scaling: bool = True) -> AffineTransform3:
    """Least-squares similarity (or rigid) transform mapping src onto dst.

    Minimizes sum_i ||dst_i - (s R src_i + t)||^2 over rotation R, scale s
    (s = 1 when with_scaling is False) and translation t, via SVD of the
    cross-covariance with a reflection guard so det(R) = +1 always.
    """
    src = _as_points(src)
    dst = _as_points(dst)
    if len(src) != len(dst):
        raise ShapeMismatch(f"{len(src)} source vs {len(dst)} destination points")
    n = len(src)
    if n < 3:
        raise DegenerateConfiguration(f"need at least 3 pairs, got {n}")

    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    src_c = src - mu_s
    dst_c = dst - mu_d
    cov = dst_c.T @ src_c / n
    U, D, Vt = np.linalg.svd(cov)
    if D[1] <= _RANK_EPS * max(D[0], 1.0):
        raise DegenerateConfiguration("points are collinear or coincident")

    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = (U * S) @ Vt

    if with_scaling:
        var_s = (src_c ** 2).sum() / n
        s = float((D * S).sum() / var_s)
        kind = TransformKind.SIMILARITY
    else:
        s = 1.0
        kind = TransformKind.RIGID
    t = mu_d - s * (R @ mu_s)
    return AffineTransform3(s * R, t, kind)


def coarse_register(
    moving: LandmarkSet, fixed: LandmarkSet, params: CoarseParams = CoarseParams()
) -> AffineTransform3:
    """Similarity (or rigid) transform aligning moving grooves onto fixed grooves.

    Each group is downsampled to a common count per group (default: the
    per-group minimum across the two sets), concatenated anterior-then-
    posterior, paired index to index and fed to estimate_umeyama.
    """
    for group in ("anterior", "posterior"):
        if len(getattr(moving, group)) == 0 or len(getattr(fixed, group)) == 0:
            raise EmptyInput(f"{group} landmark group is empty")

    if params.target_count is not None:
        m_ant = m_post = params.target_count
    else:
        m_ant = min(len(moving.anterior), len(fixed.anterior))
        m_post = min(len(moving.posterior), len(fixed.posterior))

    mov_ant = moving.anterior[_downsample_indices(len(moving.anterior), m_ant)]
    fix_ant = fixed.anterior[_downsample_indices(len(fixed.anterior), m_ant)]
    mov_post = moving.posterior[_downsample_indices(len(moving.posterior), m_post)]
    fix_post = fixed.posterior[_downsample_indices(len(fixed.posterior), m_post)]

    if len(mov_ant) != len(fix_ant) or len(mov_post) != len(fix_post):
        raise ShapeMismatch("downsampled groups have unequal counts")

    src = np.vstack([mov_ant, mov_post])
    dst = np.vstack([fix_ant, fix_post])
    return estimate_umeyama(src, dst, with_scaling=params.with_scaling)
