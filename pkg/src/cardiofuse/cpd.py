"""Coherent point drift registration, rigid and affine, via EM on a GMM.

The moving cloud provides the GMM centroids, the fixed cloud the data
points; correspondence is the posterior probability matrix P with a uniform
outlier component of weight w.  As in the ICP solvers, the coarse init is
applied up front and folded into the reported transform.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import AffineTransform3, PointCloud, TransformKind, compose
from .errors import (
    DegenerateConfiguration,
    EmptyInput,
    InvalidParameter,
    NumericalCollapse,
)
from .icp import RegistrationResult, _check_clouds, _mean_nn_distance

_TINY = 1e-300


@dataclass(frozen=True)
class CpdParams:
    outlier_weight: float = 0.1
    max_iterations: int = 150
    tolerance: float = 1e-8
    sigma2_floor: float = 1e-10
    mode: str = "rigid"  # for the cpd() dispatcher: "rigid" or "affine"

    def __post_init__(self):
        if not 0 <= self.outlier_weight < 1:
            raise ValueError("outlier_weight must lie in [0, 1)")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.mode not in ("rigid", "affine"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class GmmState:
    """Sufficient statistics of the posterior correspondence matrix P.

    With M source centroids and N target points: pt1 are the column sums
    (one per target point), p1 the row sums (one per centroid), npoints the
    total mass, px the moment matrix P @ X, and nll the negative
    log-likelihood of the targets under the current mixture.
    """

    sigma2: float
    pt1: np.ndarray
    p1: np.ndarray
    npoints: float
    px: np.ndarray
    nll: float


def cpd_estep(
    transformed_src: np.ndarray, dst: np.ndarray, sigma2: float, w: float
) -> GmmState:
    """Posterior correspondence statistics for the current transform and variance."""
    if sigma2 <= 0:
        raise InvalidParameter(f"sigma2 must be positive, got {sigma2}")
    ty = np.asarray(transformed_src, dtype=float)
    x = np.asarray(dst, dtype=float)
    if len(ty) == 0 or len(x) == 0:
        raise EmptyInput("clouds must be non-empty")
    m, n = len(ty), len(x)

    kernel = cdist(ty, x, "sqeuclidean")
    kernel *= -1.0 / (2.0 * sigma2)
    np.exp(kernel, out=kernel)
    c = (2.0 * np.pi * sigma2) ** 1.5 * (w / (1.0 - w)) * (m / n) if w > 0 else 0.0
    col = kernel.sum(axis=0)
    denom = col + c
    safe = np.where(denom > 0, denom, 1.0)

    norm = (2.0 * np.pi * sigma2) ** 1.5
    density = (1.0 - w) / (m * norm) * col + (w / n if w > 0 else 0.0)
    nll = float(-np.log(np.maximum(density, _TINY)).sum())

    kernel *= 1.0 / safe  # kernel now holds P
    pt1 = kernel.sum(axis=0)
    p1 = kernel.sum(axis=1)
    return GmmState(
        sigma2=sigma2,
        pt1=pt1,
        p1=p1,
        npoints=float(p1.sum()),
        px=kernel @ x,
        nll=nll,
    )


def _init_sigma2(x: np.ndarray, y: np.ndarray) -> float:
    # (1 / 3NM) * sum over all pairs of squared distance, without the MxN matrix
    n, m = len(x), len(y)
    sq = (x ** 2).sum() * m + (y ** 2).sum() * n - 2.0 * x.sum(axis=0) @ y.sum(axis=0)
    return float(sq / (3.0 * n * m))


def _run_cpd(moving, fixed, init, params, affine: bool) -> RegistrationResult:
    _check_clouds(moving, fixed)
    if init is None:
        init = AffineTransform3.identity()
    y0 = init.apply_points(moving.points)
    x = fixed.points
    n = len(x)

    sigma2 = max(_init_sigma2(x, y0), params.sigma2_floor)
    lin = np.eye(3)
    t = np.zeros(3)
    trace: list = []
    converged = False
    for _ in range(params.max_iterations):
        ty = y0 @ lin.T + t
        st = cpd_estep(ty, x, sigma2, params.outlier_weight)
        trace.append(st.nll)
        if st.npoints < 1e-12:
            raise NumericalCollapse("all correspondence mass assigned to outliers")
        if len(trace) >= 2 and abs(trace[-2] - trace[-1]) <= params.tolerance * max(
            abs(trace[-2]), 1e-300
        ):
            converged = True
            break

        np_mass = st.npoints
        mu_x = st.pt1 @ x / np_mass
        mu_y = st.p1 @ y0 / np_mass
        xh = x - mu_x
        yh = y0 - mu_y
        # A = Xhat^T P^T Yhat, from the stored moments
        a = (st.px - np.outer(st.p1, mu_x)).T @ yh
        xhat_sq = float(st.pt1 @ (xh ** 2).sum(axis=1))

        if affine:
            g = yh.T @ (st.p1[:, None] * yh)
            det = np.linalg.det(g)
            if not np.isfinite(det) or abs(det) < 1e-12:
                raise DegenerateConfiguration("singular weighted scatter matrix")
            b = a @ np.linalg.inv(g)
            t = mu_x - b @ mu_y
            sigma2 = (xhat_sq - float(np.trace(a @ b.T))) / (3.0 * np_mass)
            lin = b
        else:
            u, d, vt = np.linalg.svd(a)
            cdiag = np.array([1.0, 1.0, 1.0 if np.linalg.det(u @ vt) >= 0 else -1.0])
            rot = (u * cdiag) @ vt
            denom = float(st.p1 @ (yh ** 2).sum(axis=1))
            s = float((d * cdiag).sum() / denom)
            t = mu_x - s * (rot @ mu_y)
            sigma2 = (xhat_sq - s * float((d * cdiag).sum())) / (3.0 * np_mass)
            lin = s * rot
        sigma2 = max(sigma2, params.sigma2_floor)

    kind = TransformKind.AFFINE if affine else TransformKind.SIMILARITY
    final = compose(AffineTransform3(lin, t, kind), init)
    mde = _mean_nn_distance(final.apply_points(moving.points), x)
    return RegistrationResult(
        transform=final,
        objective_trace=np.asarray(trace),
        iterations=len(trace),
        converged=converged,
        mde=mde,
        sigma2=sigma2,
    )


def cpd_rigid(
    moving: PointCloud,
    fixed: PointCloud,
    init: Optional[AffineTransform3] = None,
    params: CpdParams = CpdParams(),
) -> RegistrationResult:
    """CPD with a similarity transform s R p + t (uniform scale, proper rotation)."""
    return _run_cpd(moving, fixed, init, params, affine=False)


def cpd_affine(
    moving: PointCloud,
    fixed: PointCloud,
    init: Optional[AffineTransform3] = None,
    params: CpdParams = CpdParams(),
) -> RegistrationResult:
    """CPD with a general affine transform B p + t."""
    return _run_cpd(moving, fixed, init, params, affine=True)


def cpd(
    moving: PointCloud,
    fixed: PointCloud,
    init: Optional[AffineTransform3] = None,
    params: CpdParams = CpdParams(),
) -> RegistrationResult:
    """Dispatch on params.mode to the rigid or affine solver."""
    if params.mode == "affine":
        return cpd_affine(moving, fixed, init, params)
    return cpd_rigid(moving, fixed, init, params)
