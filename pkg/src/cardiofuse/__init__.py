"""cardiofuse: coarse-to-fine point-cloud registration and volume fusion
between a low-resolution functional volume and a high-resolution structural
volume, verifiable end to end on synthetic phantoms."""

from .coarse import (
    CoarseParams,
    LandmarkSet,
    coarse_register,
    downsample_landmarks,
    estimate_umeyama,
)
from .core import (
    AffineTransform3,
    Pairing,
    PointCloud,
    TransformKind,
    apply_transform,
    compose,
    invert,
    nearest_neighbors,
)
from .cpd import CpdParams, GmmState, cpd, cpd_affine, cpd_estep, cpd_rigid
from .errors import (
    CardiofuseError,
    DegenerateConfiguration,
    EmptyInput,
    IndexOutOfBounds,
    InvalidData,
    InvalidParameter,
    NumericalCollapse,
    ParseError,
    ShapeMismatch,
    SingularTransform,
)
from .fusion import FusionInput, dice, map_mpi_to_mesh, mean_distance_error
from .icp import IcpParams, RegistrationResult, icp, sicp, solve_rigid_svd
from .phantom import (
    PerturbSpec,
    ShellDescriptor,
    ShellParams,
    generate_lv_shell,
    generate_phantom_volume,
    perturb_cloud,
)
from .segmentation import (
    Mask,
    TriMesh,
    extract_isosurface,
    mask_to_point_cloud,
    region_grow,
)
from .volume import (
    SpatialReference,
    Volume,
    build_spatial_reference,
    sample_trilinear,
    sample_trilinear_many,
    voxel_to_world,
    warp_volume,
)

__version__ = "0.1.0"
