"""End-to-end volumetric pipeline on synthetic data.

Builds a nested-ellipsoid phantom volume (a bright inner region inside a
dimmer one), segments the inner region by seeded region growing, extracts
a watertight isosurface, resamples a functional volume through a known
transform, and finally maps its values onto the mesh vertices.

Run:  python3 demos/02_volume_to_fused_mesh_pipeline.py
"""
import numpy as np

from cardiofuse import (
    AffineTransform3,
    FusionInput,
    ShellDescriptor,
    build_spatial_reference,
    dice,
    extract_isosurface,
    generate_phantom_volume,
    map_mpi_to_mesh,
    mask_to_point_cloud,
    region_grow,
    warp_volume,
)


def main():
    # 1. structural phantom: outer shell 50, inner region 400 (arbitrary units)
    ref = build_spatial_reference((40, 40, 40), (1.0, 1.0, 1.0), (-20.0, -20.0, -20.0))
    structural = generate_phantom_volume(
        ref,
        [
            ShellDescriptor((0.0, 0.0, 0.0), (15.0, 13.0, 16.0), 50.0),
            ShellDescriptor((0.0, 0.0, 0.0), (9.0, 8.0, 11.0), 400.0),
        ],
    )

    # 2. seeded region growing from the center isolates the bright region
    mask = region_grow(structural, [(20, 20, 20)], threshold=100.0)
    truth = structural.data == 400.0
    overlap = dice(mask, type(mask)(truth, ref))
    print(f"segmented {int(mask.data.sum())} voxels, dice vs truth {overlap:.4f}")

    # 3. watertight isosurface and its boundary point cloud
    mesh = extract_isosurface(mask)
    cloud = mask_to_point_cloud(mask)
    print(f"isosurface: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
    print(f"boundary cloud: {len(cloud)} points")

    # 4. a low-resolution functional volume whose value encodes height z
    func_ref = build_spatial_reference((10, 10, 10), (4.0, 4.0, 4.0), (-20.0, -20.0, -20.0))
    ii, jj, kk = np.meshgrid(*(np.arange(10),) * 3, indexing="ij")
    func_data = (kk + 0.5) * 4.0 - 20.0  # world z at the voxel center
    from cardiofuse import Volume

    functional = Volume(func_data, func_ref)

    # 5. resample the functional volume into the structural grid (identity here)
    warped = warp_volume(functional, AffineTransform3.identity(), ref)
    print(f"warped functional volume to structural grid {warped.data.shape}")

    # 6. fuse: each mesh vertex samples the registered functional volume
    fused = map_mpi_to_mesh(
        FusionInput(mesh, volume=functional, transform=AffineTransform3.identity())
    )
    err = np.abs(fused.vertex_values - mesh.vertices[:, 2])
    print(
        f"fused values track vertex height: median |value - z| = "
        f"{np.median(err):.3f} mm (trilinear smoothing at the 4 mm grid scale)"
    )


if __name__ == "__main__":
    main()
