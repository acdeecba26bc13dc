"""Perfusion-to-mesh mapping and quantitative evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AffineTransform3, PointCloud, invert, nearest_neighbor_indices
from .errors import EmptyInput, InvalidParameter, ShapeMismatch
from .segmentation import Mask, TriMesh
from .volume import Volume, sample_trilinear_many


@dataclass(frozen=True)
class FusionInput:
    """A structural mesh plus a perfusion source.

    The source is either a registered, valued point cloud, or a functional
    volume together with the moving-world -> fixed-world registration
    transform.
    """

    mesh: TriMesh
    cloud: Optional[PointCloud] = None
    volume: Optional[Volume] = None
    transform: Optional[AffineTransform3] = None


def map_mpi_to_mesh(fusion: FusionInput) -> TriMesh:
    """Attach a perfusion value to every mesh vertex; geometry is unchanged.

    Cloud path: each vertex takes the value of its exact nearest source
    point (lowest-index ties).  Volume path: each vertex is mapped back
    through the inverse transform and sampled trilinearly, 0 outside.
    """
    mesh = fusion.mesh
    if len(mesh.vertices) == 0:
        raise EmptyInput("mesh has no vertices")
    if fusion.cloud is not None:
        if fusion.cloud.values is None:
            raise InvalidParameter("source cloud carries no values")
        _, idx = nearest_neighbor_indices(mesh.vertices, fusion.cloud.points)
        values = fusion.cloud.values[idx]
    elif fusion.volume is not None:
        if fusion.transform is None:
            raise InvalidParameter("volume path requires the registration transform")
        src_pts = invert(fusion.transform).apply_points(mesh.vertices)
        values, _ = sample_trilinear_many(fusion.volume, src_pts, fill=0.0)
    else:
        raise InvalidParameter("fusion input needs a cloud or a volume")
    return TriMesh(mesh.vertices, mesh.triangles, values)


def dice(a: Mask, b: Mask) -> float:
    """Dice similarity coefficient 2|A & B| / (|A| + |B|); 1.0 for two empty masks."""
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"mask shapes {a.data.shape} vs {b.data.shape}")
    na = int(a.data.sum())
    nb = int(b.data.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((a.data & b.data).sum()) / (na + nb)


def mean_distance_error(src: PointCloud, dst: PointCloud) -> float:
    """Mean nearest-neighbor distance over matched pairs of two clouds.

    Each point of the smaller cloud is matched to its exact nearest
    neighbor in the larger cloud; with equal sizes, src drives the pairing.
    """
    if len(src) == 0 or len(dst) == 0:
        raise EmptyInput("clouds must be non-empty")
    a, b = src.points, dst.points
    if len(a) > len(b):
        a, b = b, a
    d, _ = nearest_neighbor_indices(a, b)
    return float(d.mean())
