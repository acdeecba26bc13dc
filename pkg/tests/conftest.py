import numpy as np
import pytest

from cardiofuse.core import AffineTransform3, TransformKind


def rotation_matrix(axis, radians):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0, -axis[2], axis[1]],
            [axis[2], 0, -axis[0]],
            [-axis[1], axis[0], 0],
        ]
    )
    return np.eye(3) + np.sin(radians) * k + (1 - np.cos(radians)) * (k @ k)


def random_rotation(rng, max_deg=180.0):
    axis = rng.normal(size=3)
    angle = np.radians(rng.uniform(-max_deg, max_deg))
    return rotation_matrix(axis, angle)


def random_rigid(rng, max_deg=180.0, max_t=50.0):
    return AffineTransform3(
        random_rotation(rng, max_deg),
        rng.uniform(-max_t, max_t, 3),
        TransformKind.RIGID,
    )


def random_similarity(rng, scale_range=(0.5, 2.0), max_deg=180.0, max_t=50.0):
    s = rng.uniform(*scale_range)
    return AffineTransform3(
        s * random_rotation(rng, max_deg),
        rng.uniform(-max_t, max_t, 3),
        TransformKind.SIMILARITY,
    )


def random_affine(rng, max_t=50.0):
    # well-conditioned random linear part
    lin = np.eye(3) + 0.4 * rng.uniform(-1, 1, (3, 3))
    return AffineTransform3(lin, rng.uniform(-max_t, max_t, 3))


def brute_force_nn(query, target):
    """O(N*M) exhaustive nearest-neighbor scan; first index wins ties."""
    d = np.linalg.norm(query[:, None, :] - target[None, :, :], axis=2)
    idx = d.argmin(axis=1)
    return d[np.arange(len(query)), idx], idx


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
