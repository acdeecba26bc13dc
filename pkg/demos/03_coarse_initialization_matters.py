"""Why landmark coarse registration is required before fine registration.

The LV-like shell is nearly symmetric under a 180-degree rotation about
its long axis, so a fine registration started from identity can lock onto
the wrong orientation while still reporting a small nearest-neighbor
error.  Measuring error over the known point correspondence exposes the
failure; landmark (groove) coarse registration prevents it.

Run:  python3 demos/03_coarse_initialization_matters.py
"""
import numpy as np

from cardiofuse import (
    AffineTransform3,
    CoarseParams,
    CpdParams,
    PerturbSpec,
    ShellParams,
    TransformKind,
    coarse_register,
    cpd_affine,
    generate_lv_shell,
    perturb_cloud,
)


def main():
    moving, moving_lm = generate_lv_shell(ShellParams(point_count=2000, rng_seed=1))
    angle = np.radians(150.0)
    c, s = np.cos(angle), np.sin(angle)
    gt = AffineTransform3(
        np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]),
        [10.0, -5.0, 4.0],
        TransformKind.RIGID,
    )
    fixed, fixed_lm = perturb_cloud(
        moving, moving_lm, PerturbSpec(gt, noise_sigma=1.5, rng_seed=2)
    )

    def correspondence_error(result):
        moved = result.transform.apply_points(moving.points)
        return float(np.linalg.norm(moved - fixed.points, axis=1).mean())

    print("registering with CPD-affine, 150 deg initial misorientation...")
    r_identity = cpd_affine(moving, fixed, None, CpdParams())
    init = coarse_register(moving_lm, fixed_lm, CoarseParams(with_scaling=False))
    r_coarse = cpd_affine(moving, fixed, init, CpdParams())

    print()
    print(f"{'init':<10} {'NN mde (mm)':>12} {'true-pair error (mm)':>22}")
    for name, r in (("identity", r_identity), ("coarse", r_coarse)):
        print(f"{name:<10} {r.mde:>12.3f} {correspondence_error(r):>22.3f}")
    print()
    print("the identity-initialized fit looks fine by nearest-neighbor error but")
    print("is rotated to the wrong orientation; the true-pair error reveals it.")


if __name__ == "__main__":
    main()
