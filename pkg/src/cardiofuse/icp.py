"""Fine registration by iterative closest point, rigid and anisotropic-scale.

Both solvers run in the space of the coarse initialization: the init
transform is applied to the moving cloud up front and folded back into the
reported transform, which therefore maps original moving coordinates to
fixed coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .coarse import estimate_umeyama
from .core import (
    AffineTransform3,
    PointCloud,
    TransformKind,
    compose,
    nearest_neighbor_indices,
)
from .errors import EmptyInput

SCALE_AT_BOUND = "ScaleAtBound"


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 100
    rel_tolerance: float = 1e-8
    abs_tolerance: float = 1e-12
    scale_bounds: Tuple[float, float] = (0.2, 5.0)
    isotropic_scale: bool = False  # tie the three SICP scales to a single factor

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.rel_tolerance <= 0 or self.abs_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        lo, hi = self.scale_bounds
        if not (0 < lo <= hi):
            raise ValueError("scale_bounds must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class RegistrationResult:
    """Outcome of a fine registration run."""

    transform: AffineTransform3
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    mde: float
    flags: Tuple[str, ...] = ()
    sigma2: Optional[float] = None


def solve_rigid_svd(src, dst) -> AffineTransform3:
    """Rigid least-squares fit of matched pairs (Umeyama without scaling)."""
    return estimate_umeyama(src, dst, with_scaling=False)


def _mean_nn_distance(src: np.ndarray, dst: np.ndarray) -> float:
    if len(src) > len(dst):
        src, dst = dst, src
    d, _ = nearest_neighbor_indices(src, dst)
    return float(d.mean())


def _check_clouds(moving: PointCloud, fixed: PointCloud):
    if len(moving) < 3 or len(fixed) < 3:
        raise EmptyInput("both clouds must have at least 3 points")


def _stop(trace: list, abs_tol: float, rel_tol: float) -> bool:
    obj = trace[-1]
    if obj < abs_tol:
        return True
    if len(trace) >= 2:
        prev = trace[-2]
        return abs(prev - obj) <= rel_tol * max(abs(prev), 1e-300)
    return False


def icp(
    moving: PointCloud,
    fixed: PointCloud,
    init: Optional[AffineTransform3] = None,
    params: IcpParams = IcpParams(),
) -> RegistrationResult:
    """Rigid ICP: alternate exact nearest-neighbor matching and an SVD solve.

    The per-iteration objective is the summed squared distance between the
    updated moving points and their current correspondences, so the trace is
    non-increasing by construction.
    """
    _check_clouds(moving, fixed)
    if init is None:
        init = AffineTransform3.identity()
    y0 = init.apply_points(moving.points)
    x = fixed.points

    current = AffineTransform3.identity()
    trace: list = []
    converged = False
    for _ in range(params.max_iterations):
        moved = current.apply_points(y0)
        _, idx = nearest_neighbor_indices(moved, x)
        matched = x[idx]
        # Full re-solve against the original (init-applied) points absorbs
        # the cumulative mapping into a single rigid step.
        current = solve_rigid_svd(y0, matched)
        resid = current.apply_points(y0) - matched
        trace.append(float((resid ** 2).sum()))
        if _stop(trace, params.abs_tolerance, params.rel_tolerance):
            converged = True
            break

    final = compose(current, init)
    mde = _mean_nn_distance(final.apply_points(moving.points), x)
    return RegistrationResult(
        transform=final,
        objective_trace=np.asarray(trace),
        iterations=len(trace),
        converged=converged,
        mde=mde,
    )


def _solve_scales(r: np.ndarray, q: np.ndarray, params: IcpParams):
    """Per-axis least-squares scale for q ~ diag(s) r, clamped to bounds."""
    lo, hi = params.scale_bounds
    if params.isotropic_scale:
        denom = float((r * r).sum())
        s_all = float((q * r).sum() / denom) if denom > 0 else 1.0
        s = np.full(3, s_all)
    else:
        denom = (r * r).sum(axis=0)
        num = (q * r).sum(axis=0)
        s = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 1.0)
    clamped = np.clip(s, lo, hi)
    return clamped, bool(np.any(clamped != s))


def sicp(
    moving: PointCloud,
    fixed: PointCloud,
    init: Optional[AffineTransform3] = None,
    params: IcpParams = IcpParams(),
) -> RegistrationResult:
    """Anisotropic-scale ICP minimizing sum ||diag(s) R p + t - q||^2.

    Each outer iteration re-matches correspondences, then sweeps once through
    (i) a rigid SVD solve on scale-compensated targets, (ii) the closed-form
    per-axis scale given R and t, (iii) the translation re-solve.  If the
    compensated rigid step would raise the objective on the current
    correspondences, the rotation is kept and only scale and translation
    (both exact descent steps) are updated, keeping the trace monotone.
    """
    _check_clouds(moving, fixed)
    if init is None:
        init = AffineTransform3.identity()
    y0 = init.apply_points(moving.points)
    x = fixed.points

    R = np.eye(3)
    s = np.ones(3)
    t = np.zeros(3)
    trace: list = []
    converged = False
    hit_bound = False
    for _ in range(params.max_iterations):
        moved = (y0 @ R.T) * s + t
        _, idx = nearest_neighbor_indices(moved, x)
        q = x[idx]
        obj_before = float(((moved - q) ** 2).sum())

        # (i) rigid step on scale-compensated targets
        rigid = solve_rigid_svd(y0, (q - t) / s)
        R_new = rigid.linear
        # (ii) per-axis scale given R, t
        r_new = y0 @ R_new.T
        s_new, bound_new = _solve_scales(r_new, q - t, params)
        # (iii) translation re-solve
        t_new = q.mean(axis=0) - s_new * r_new.mean(axis=0)

        obj_new = float((((r_new * s_new) + t_new - q) ** 2).sum())
        if obj_new > obj_before:
            # keep previous rotation; scale and translation alone are
            # coordinate-descent steps and cannot increase the objective
            r_old = y0 @ R.T
            s_new, bound_new = _solve_scales(r_old, q - t, params)
            t_new = q.mean(axis=0) - s_new * r_old.mean(axis=0)
            obj_new = float((((r_old * s_new) + t_new - q) ** 2).sum())
            R_new = R
        R, s, t = R_new, s_new, t_new
        hit_bound = hit_bound or bound_new
        trace.append(obj_new)
        if _stop(trace, params.abs_tolerance, params.rel_tolerance):
            converged = True
            break

    flags: Tuple[str, ...] = ()
    if hit_bound:
        flags = (SCALE_AT_BOUND,)
        converged = False
    fine = AffineTransform3(s[:, None] * R, t, TransformKind.ANISOTROPIC_SIMILARITY)
    final = compose(fine, init)
    mde = _mean_nn_distance(final.apply_points(moving.points), x)
    return RegistrationResult(
        transform=final,
        objective_trace=np.asarray(trace),
        iterations=len(trace),
        converged=converged,
        mde=mde,
        flags=flags,
    )
