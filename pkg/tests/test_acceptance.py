"""Acceptance suite: ten numbered criteria, each reported with one
PASS/FAIL line on the live terminal.

The registration campaigns behind criteria 1-5 run once in module-scoped
fixtures and are shared; every objective trace they produce feeds the
monotonicity audit of criterion 5.
"""
import struct
import time

import numpy as np
import pytest

from cardiofuse import fileio
from cardiofuse.coarse import CoarseParams, LandmarkSet, coarse_register, estimate_umeyama
from cardiofuse.core import (
    AffineTransform3,
    PointCloud,
    TransformKind,
    nearest_neighbor_indices,
)
from cardiofuse.cpd import CpdParams, cpd_affine, cpd_rigid
from cardiofuse.errors import ParseError
from cardiofuse.fusion import mean_distance_error
from cardiofuse.icp import IcpParams, icp, sicp
from cardiofuse.phantom import PerturbSpec, ShellParams, generate_lv_shell, perturb_cloud
from cardiofuse.segmentation import Mask, TriMesh, region_grow
from cardiofuse.volume import Volume, build_spatial_reference, warp_volume
from conftest import brute_force_nn, rotation_matrix
from test_segmentation import oracle_region_grow
from test_volume import affine_field_volume

N_CASES = 20
METHOD_NAMES = ("icp", "sicp", "cpd-rigid", "cpd-affine")


@pytest.fixture
def report(capfd):
    def _report(number, ok, detail=""):
        with capfd.disabled():
            tail = f" ({detail})" if detail else ""
            print(f"\n[acceptance criterion {number}] {'PASS' if ok else 'FAIL'}{tail}")
        assert ok, f"criterion {number} failed: {detail}"

    return _report


def bounded_similarity(rng, anisotropic=False):
    """Random similarity: rotation <= 30 deg, scale in [0.7, 1.4] \\ {~1},
    translation <= 30 mm."""
    r = rotation_matrix(rng.normal(size=3), np.radians(rng.uniform(5.0, 30.0)))
    s = rng.uniform(0.7, 0.95) if rng.random() < 0.5 else rng.uniform(1.05, 1.4)
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    t = d * rng.uniform(5.0, 30.0)
    linear = s * r
    kind = TransformKind.SIMILARITY
    if anisotropic:
        linear = np.diag([0.9, 1.0, 1.2]) @ linear
        kind = TransformKind.AFFINE
    return AffineTransform3(linear, t, kind)


def make_case(case_index, noise_sigma=0.0, outlier_fraction=0.0, anisotropic=False):
    cloud, lm = generate_lv_shell(ShellParams(point_count=2000, rng_seed=100 + case_index))
    rng = np.random.default_rng(1000 + case_index)
    gt = bounded_similarity(rng, anisotropic=anisotropic)
    fixed, fixed_lm = perturb_cloud(
        cloud,
        lm,
        PerturbSpec(
            gt,
            noise_sigma=noise_sigma,
            outlier_fraction=outlier_fraction,
            rng_seed=2000 + case_index,
        ),
    )
    return cloud, lm, fixed, fixed_lm, gt


def run_all_methods(moving, moving_lm, fixed, fixed_lm, cpd_params):
    init = coarse_register(moving_lm, fixed_lm, CoarseParams(with_scaling=False))
    out = {}
    for name in METHOD_NAMES:
        t0 = time.perf_counter()
        if name == "icp":
            result = icp(moving, fixed, init)
        elif name == "sicp":
            result = sicp(moving, fixed, init)
        elif name == "cpd-rigid":
            result = cpd_rigid(moving, fixed, init, cpd_params)
        else:
            result = cpd_affine(moving, fixed, init, cpd_params)
        out[name] = (result, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def campaign_noiseless():
    runs = []
    for i in range(N_CASES):
        moving, lm, fixed, fixed_lm, gt = make_case(i)
        runs.append(
            run_all_methods(moving, lm, fixed, fixed_lm, CpdParams(outlier_weight=0.0))
        )
    return runs


@pytest.fixture(scope="module")
def campaign_noisy():
    runs = []
    for i in range(N_CASES):
        moving, lm, fixed, fixed_lm, gt = make_case(
            i, noise_sigma=1.5, outlier_fraction=0.05
        )
        init = coarse_register(lm, fixed_lm, CoarseParams(with_scaling=False))
        t0 = time.perf_counter()
        # w = 0: with this shell data the uniform outlier component lets the
        # affine EM shed real points as outliers and drift (see the ledger)
        result = cpd_affine(moving, fixed, init, CpdParams(outlier_weight=0.0))
        runs.append((result, time.perf_counter() - t0))
    return runs


@pytest.fixture(scope="module")
def campaign_anisotropic():
    runs = []
    for i in range(N_CASES):
        moving, lm, fixed, fixed_lm, gt = make_case(
            i, noise_sigma=1.5, outlier_fraction=0.05, anisotropic=True
        )
        runs.append(
            run_all_methods(moving, lm, fixed, fixed_lm, CpdParams(outlier_weight=0.0))
        )
    return runs


@pytest.fixture(scope="module")
def campaign_orientation():
    """150 deg long-axis rotation; identity init vs coarse init, CPD-affine.

    mde here uses the phantom's known index correspondence (no outliers are
    added, so point i of the fixed cloud is the true partner of moving
    point i): nearest-neighbor mde is blind to the shell's near 180-degree
    rotational symmetry and would report a small error even for the
    wrongly-oriented fit.
    """
    runs = []
    for i in range(N_CASES):
        cloud, lm = generate_lv_shell(ShellParams(point_count=2000, rng_seed=300 + i))
        rng = np.random.default_rng(4000 + i)
        gt = AffineTransform3(
            rotation_matrix([0.0, 0.0, 1.0], np.radians(150.0)),
            rng.uniform(-15.0, 15.0, 3),
            TransformKind.RIGID,
        )
        fixed, fixed_lm = perturb_cloud(
            cloud, lm, PerturbSpec(gt, noise_sigma=1.5, rng_seed=5000 + i)
        )

        def gt_mde(result):
            moved = result.transform.apply_points(cloud.points)
            return float(np.linalg.norm(moved - fixed.points, axis=1).mean())

        # the data here carries noise but no outliers, so w = 0 (see the
        # docstring note on measurement; the ledger records the rationale)
        params = CpdParams(outlier_weight=0.0)
        r_identity = cpd_affine(cloud, fixed, None, params)
        init = coarse_register(lm, fixed_lm, CoarseParams(with_scaling=False))
        r_coarse = cpd_affine(cloud, fixed, init, params)
        runs.append(
            {
                "identity": (r_identity, gt_mde(r_identity)),
                "coarse": (r_coarse, gt_mde(r_coarse)),
            }
        )
    return runs


class TestCriterion1:
    def test_noiseless_ground_truth_recovery(self, campaign_noiseless, report):
        icp_fail = [run["icp"][0].mde > 0.5 for run in campaign_noiseless]
        exact = {
            name: [run[name][0].mde < 1e-3 for run in campaign_noiseless]
            for name in ("sicp", "cpd-rigid", "cpd-affine")
        }
        runtimes = [dt for run in campaign_noiseless for _, dt in run.values()]
        ok = (
            all(icp_fail)
            and all(all(v) for v in exact.values())
            and max(runtimes) < 10.0
        )
        worst = {n: max(run[n][0].mde for run in campaign_noiseless) for n in METHOD_NAMES}
        report(
            1,
            ok,
            f"icp scale residual on 20/20, worst exact-method mde "
            f"{max(worst[n] for n in exact):.2e} mm, slowest run {max(runtimes):.1f} s",
        )


class TestCriterion2:
    def test_headline_three_mm_bound(self, campaign_noisy, report):
        mdes = [r.mde for r, _ in campaign_noisy]
        n_good = sum(m < 3.0 for m in mdes)
        slowest = max(dt for _, dt in campaign_noisy)
        ok = n_good >= 19 and slowest < 30.0
        report(
            2,
            ok,
            f"cpd-affine mde < 3 mm on {n_good}/20 noisy cases, "
            f"slowest run {slowest:.1f} s",
        )


class TestCriterion3:
    def test_method_ordering(self, campaign_anisotropic, report):
        means = {
            name: float(np.mean([run[name][0].mde for run in campaign_anisotropic]))
            for name in METHOD_NAMES
        }
        ok = (
            means["icp"] == max(means.values())
            and means["cpd-affine"] == min(means.values())
        )
        ordering = ", ".join(f"{n} {means[n]:.3f}" for n in METHOD_NAMES)
        report(3, ok, f"mean mde: {ordering}")


class TestCriterion4:
    def test_coarse_registration_necessity(self, campaign_orientation, report):
        identity_wrong = sum(run["identity"][1] > 5.0 for run in campaign_orientation)
        coarse_good = sum(run["coarse"][1] < 3.0 for run in campaign_orientation)
        ok = identity_wrong >= 15 and coarse_good == N_CASES
        report(
            4,
            ok,
            f"identity init wrong (> 5 mm) on {identity_wrong}/20, "
            f"coarse init < 3 mm on {coarse_good}/20",
        )


class TestCriterion5:
    def test_all_traces_monotone(
        self,
        campaign_noiseless,
        campaign_noisy,
        campaign_anisotropic,
        campaign_orientation,
        report,
    ):
        traces = []
        for run in campaign_noiseless + campaign_anisotropic:
            traces.extend(result.objective_trace for result, _ in run.values())
        traces.extend(result.objective_trace for result, _ in campaign_noisy)
        for run in campaign_orientation:
            traces.append(run["identity"][0].objective_trace)
            traces.append(run["coarse"][0].objective_trace)
        violations = 0
        for tr in traces:
            slack = 1e-9 * max(abs(tr[0]), 1e-30)
            if np.any(np.diff(tr) > slack):
                violations += 1
        ok = violations == 0
        report(5, ok, f"{len(traces)} traces audited, {violations} violations")


class TestCriterion6:
    def test_oracle_equivalence(self, report):
        rng = np.random.default_rng(60)
        grow_ok = True
        for _ in range(200):
            data = rng.uniform(0.0, 500.0, size=(8, 8, 8))
            seed = tuple(int(c) for c in rng.integers(0, 8, 3))
            threshold = float(rng.choice([0.0, 50.0, 400.0]))
            ref = build_spatial_reference((8, 8, 8), (1, 1, 1), (0, 0, 0))
            got = region_grow(Volume(data, ref), [seed], threshold).data
            if not np.array_equal(got, oracle_region_grow(data, [seed], threshold)):
                grow_ok = False
                break
        nn_ok = True
        for _ in range(100):
            q = rng.normal(size=(int(rng.integers(1, 60)), 3)) * 10
            t = rng.normal(size=(int(rng.integers(1, 80)), 3)) * 10
            d, i = nearest_neighbor_indices(q, t)
            bd, bi = brute_force_nn(q, t)
            if not (np.array_equal(i, bi) and np.max(np.abs(d - bd)) <= 1e-12):
                nn_ok = False
                break
            a, b = (q, t) if len(q) <= len(t) else (t, q)
            da, _ = brute_force_nn(a, b)
            if abs(mean_distance_error(PointCloud(q), PointCloud(t)) - da.mean()) > 1e-12:
                nn_ok = False
                break
        ok = grow_ok and nn_ok
        report(
            6,
            ok,
            "region_grow matches BFS oracle on 200 volumes, "
            "NN/mde match exhaustive scans on 100 instances",
        )


class TestCriterion7:
    def test_shape_parameter_exactness(self, report):
        ref = build_spatial_reference(
            (512, 512, 253), (0.4082, 0.4082, 0.5), (-81.1, -278.1, -234.0)
        )
        iwx = ref.image_extent[0]
        xwl = ref.world_limits[0]
        ok = iwx == 208.9984 and xwl == (-81.1, -81.1 + 208.9984)
        report(7, ok, f"IWX {iwx!r} mm, XWL {xwl!r}")


class TestCriterion8:
    def test_warp_correctness(self, report):
        rng = np.random.default_rng(80)
        # identity warp is exact
        ref = build_spatial_reference((9, 8, 7), (1.0, 1.3, 0.7), (-2.0, 1.0, -4.0))
        vol = Volume(rng.normal(size=(9, 8, 7)), ref)
        ident_ok = np.array_equal(
            warp_volume(vol, AffineTransform3.identity(), ref).data, vol.data
        )
        # analytic affine scalar field reproduced at interior centers
        src_ref = build_spatial_reference((20, 20, 20), (1.0, 1.0, 1.0), (-10.0, -10.0, -10.0))
        coeffs = np.array([0.7, -0.4, 1.1])
        field = affine_field_volume(src_ref, coeffs, offset=2.0)
        t = AffineTransform3(
            1.1 * rotation_matrix([0.2, 0.5, 1.0], 0.25), [1.5, -0.5, 1.0]
        )
        out_ref = build_spatial_reference((12, 12, 12), (1.0, 1.0, 1.0), (-6.0, -6.0, -6.0))
        out = warp_volume(field, t, out_ref, fill=np.nan)
        ii, jj, kk = np.meshgrid(*(np.arange(12),) * 3, indexing="ij")
        centers = np.asarray(out_ref.origin) + (
            np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1) + 0.5
        ) * np.asarray(out_ref.pixel_extent)
        back = (centers - t.translation) @ np.linalg.inv(t.linear).T
        expected = (back @ coeffs + 2.0).reshape(12, 12, 12)
        interior = ~np.isnan(out.data)
        rel_err = np.max(
            np.abs(out.data[interior] - expected[interior])
            / np.maximum(np.abs(expected[interior]), 1.0)
        )
        ok = ident_ok and interior.sum() > 500 and rel_err < 1e-6
        report(
            8, ok, f"identity exact, affine field max relative error {rel_err:.2e}"
        )


class TestCriterion9:
    def test_umeyama_property_suite(self, report):
        rng = np.random.default_rng(90)
        worst = 0.0
        det_ok = True
        for _ in range(500):
            n = int(rng.integers(4, 51))
            src = rng.normal(size=(n, 3)) * rng.uniform(1.0, 30.0)
            r = rotation_matrix(rng.normal(size=3), rng.uniform(0.0, np.pi))
            s = rng.uniform(0.5, 2.0)
            gt = AffineTransform3(s * r, rng.uniform(-50.0, 50.0, 3))
            est = estimate_umeyama(src, gt.apply_points(src), with_scaling=True)
            worst = max(worst, float(np.abs(est.matrix() - gt.matrix()).max()))
            scale = np.linalg.norm(est.linear, axis=1).mean()
            if np.linalg.det(est.linear / scale) < 0:
                det_ok = False
        ok = worst < 1e-8 and det_ok
        report(9, ok, f"500 problems, worst element error {worst:.2e}, det(R)=+1 always")


class TestCriterion10:
    def test_io_round_trips_and_malformed_inputs(self, report, tmp_path):
        rng = np.random.default_rng(100)
        ok = True
        # point clouds
        for i in range(100):
            cloud = PointCloud(rng.normal(size=(int(rng.integers(1, 30)), 3)) * 100)
            p = tmp_path / f"c{i}.ply"
            fileio.write_point_cloud(p, cloud)
            ok &= np.array_equal(fileio.read_point_cloud(p).points, cloud.points)
        # meshes
        for i in range(100):
            n = int(rng.integers(4, 12))
            verts = rng.normal(size=(n, 3)).astype(np.float32).astype(float)
            tris = [[v, (v + 1) % n, (v + 2) % n] for v in range(n)]
            mesh = TriMesh(verts, tris)
            p = tmp_path / f"m{i}.stl"
            fileio.write_mesh(p, mesh)
            back = fileio.read_mesh(p)
            want = sorted(tuple(sorted(map(tuple, verts[t]))) for t in np.asarray(tris))
            got = sorted(
                tuple(sorted(map(tuple, back.vertices[t]))) for t in back.triangles
            )
            ok &= got == want
        # volumes
        for i in range(100):
            size = tuple(int(s) for s in rng.integers(1, 7, 3))
            ref = build_spatial_reference(size, rng.uniform(0.1, 4, 3), rng.uniform(-20, 20, 3))
            data = rng.normal(size=size).astype(np.float32).astype(float)
            p = tmp_path / f"v{i}.vol"
            fileio.write_volume(p, Volume(data, ref))
            ok &= np.array_equal(fileio.read_volume(p).data, data)
        # transforms
        for i in range(100):
            t = AffineTransform3(
                np.eye(3) + 0.3 * rng.uniform(-1, 1, (3, 3)), rng.uniform(-10, 10, 3)
            )
            p = tmp_path / f"t{i}.txt"
            fileio.write_transform(p, t)
            ok &= np.array_equal(fileio.read_transform(p).matrix(), t.matrix())

        # malformed fixtures must raise ParseError, never crash
        malformed = 0
        fixtures = []
        bad_ply = tmp_path / "bad.ply"
        bad_ply.write_text("ply\nformat ascii 1.0\nelement vertex 5\n"
                           "property float x\nproperty float y\nproperty float z\n"
                           "end_header\n1 2 3\n")
        fixtures.append((fileio.read_point_cloud, bad_ply))
        bad_stl = tmp_path / "bad.stl"
        bad_stl.write_bytes(b"\0" * 80 + struct.pack("<I", 99) + b"\0" * 10)
        fixtures.append((fileio.read_mesh, bad_stl))
        bad_vol = tmp_path / "bad.vol"
        bad_vol.write_bytes(
            b"cardiofuse-volume 1\nsize 2 2 2\nvoxel 1 1 1\norigin 0 0 0\n"
            b"end_header\n" + b"\0" * 8
        )
        fixtures.append((fileio.read_volume, bad_vol))
        bad_t = tmp_path / "bad_t.txt"
        bad_t.write_text("cardiofuse-transform 1\nkind rigid\n1 0 0 0\n0 1 0 0\n0 0 1 0\n")
        fixtures.append((fileio.read_transform, bad_t))
        bad_lm = tmp_path / "bad_lm.txt"
        bad_lm.write_text("cardiofuse-landmarks 1\nanterior 2\n0 0 0\n")
        fixtures.append((fileio.read_landmarks, bad_lm))
        for reader, path in fixtures:
            try:
                reader(path)
            except ParseError:
                malformed += 1
            except Exception:
                pass
        ok = ok and malformed == len(fixtures)
        report(
            10,
            ok,
            f"400 round-trips exact, {malformed}/{len(fixtures)} malformed "
            "fixtures raised ParseError",
        )
