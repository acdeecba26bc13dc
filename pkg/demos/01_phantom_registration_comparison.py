"""Compare the four fine-registration methods on a synthetic LV shell.

A truncated-ellipsoid shell stands in for a left-ventricular surface.  We
perturb it by a known similarity transform plus noise, initialize with
landmark coarse registration, then run ICP, anisotropic-scale ICP and CPD
(rigid and affine), printing the final mean distance error of each.

Run:  python3 demos/01_phantom_registration_comparison.py
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
    cpd_rigid,
    generate_lv_shell,
    icp,
    perturb_cloud,
    sicp,
)


def rotation_z(radians):
    c, s = np.cos(radians), np.sin(radians)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def main():
    moving, moving_lm = generate_lv_shell(ShellParams(point_count=2000, rng_seed=7))

    # ground truth: 25 deg rotation, 1.15 uniform scale, 12 mm translation
    gt = AffineTransform3(
        1.15 * rotation_z(np.radians(25.0)),
        [8.0, -6.0, 5.0],
        TransformKind.SIMILARITY,
    )
    fixed, fixed_lm = perturb_cloud(
        moving, moving_lm, PerturbSpec(gt, noise_sigma=1.0, rng_seed=3)
    )

    init = coarse_register(moving_lm, fixed_lm, CoarseParams(with_scaling=False))
    print("coarse (rigid, landmark-based) initialization done")
    print()

    # the data has noise but no gross outliers, so the CPD uniform outlier
    # component is switched off; keep the default 0.1 for contaminated data
    params = CpdParams(outlier_weight=0.0)
    runs = [
        ("icp", icp(moving, fixed, init)),
        ("sicp", sicp(moving, fixed, init)),
        ("cpd-rigid", cpd_rigid(moving, fixed, init, params)),
        ("cpd-affine", cpd_affine(moving, fixed, init, params)),
    ]
    print(f"{'method':<12} {'mde (mm)':>10} {'iterations':>11} {'converged':>10}")
    for name, result in runs:
        print(
            f"{name:<12} {result.mde:>10.4f} {result.iterations:>11d} "
            f"{str(result.converged):>10}"
        )
    print()
    print("note: plain ICP cannot absorb the 1.15 scale, so its error stays high;")
    print("the scale-aware methods all reach the noise floor.")


if __name__ == "__main__":
    main()
