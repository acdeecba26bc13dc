"""File formats: ASCII PLY clouds, binary STL meshes (+ values sidecar),
text-header raw volumes, and text transforms/landmarks.

Readers raise ParseError with location context on malformed input; every
write/read pair is the identity within the precision of each format.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from .coarse import LandmarkSet
from .core import AffineTransform3, PointCloud, TransformKind
from .errors import EmptyInput, InvalidData, ParseError
from .segmentation import Mask, TriMesh
from .volume import SpatialReference, Volume, build_spatial_reference

_FLOAT_FMT = "{!r}"


def _fmt(x: float) -> str:
    # repr gives the shortest decimal that round-trips a double
    return repr(float(x))


# ---------------------------------------------------------------------------
# point clouds: ASCII PLY


def write_point_cloud(path, cloud: PointCloud) -> None:
    path = Path(path)
    has_values = cloud.values is not None
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if has_values:
        lines.append("property float value")
    lines.append("end_header")
    for i, p in enumerate(cloud.points):
        row = f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}"
        if has_values:
            row += f" {_fmt(cloud.values[i])}"
        lines.append(row)
    path.write_text("\n".join(lines) + "\n")


def read_point_cloud(path) -> PointCloud:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}:1: not a PLY file")
    n_vertex = None
    properties = []
    header_end = None
    for ln, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "end_header":
            header_end = ln
            break
        if tok[0] == "format":
            if tok[1:2] != ["ascii"]:
                raise ParseError(f"{path}:{ln}: only ascii PLY is supported")
        elif tok[0] == "element":
            if tok[1] == "vertex":
                try:
                    n_vertex = int(tok[2])
                except (IndexError, ValueError):
                    raise ParseError(f"{path}:{ln}: bad element line")
        elif tok[0] == "property":
            properties.append(tok[-1])
    if header_end is None or n_vertex is None:
        raise ParseError(f"{path}: header is missing end_header or vertex element")
    if properties[:3] != ["x", "y", "z"]:
        raise ParseError(f"{path}: vertex properties must start with x, y, z")
    has_values = "value" in properties
    n_props = len(properties)

    body = lines[header_end : header_end + n_vertex]
    if len(body) < n_vertex:
        raise ParseError(
            f"{path}:{header_end + len(body) + 1}: expected {n_vertex} vertex "
            f"rows, found {len(body)}"
        )
    pts = np.empty((n_vertex, 3))
    vals = np.empty(n_vertex) if has_values else None
    for r, line in enumerate(body):
        tok = line.split()
        if len(tok) != n_props:
            raise ParseError(
                f"{path}:{header_end + r + 1}: expected {n_props} fields, "
                f"got {len(tok)}"
            )
        try:
            nums = [float(v) for v in tok]
        except ValueError:
            raise ParseError(f"{path}:{header_end + r + 1}: non-numeric field")
        pts[r] = nums[:3]
        if has_values:
            vals[r] = nums[properties.index("value")]
    return PointCloud(pts, vals)


# ---------------------------------------------------------------------------
# meshes: binary STL with a values sidecar


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".values")


def write_mesh(path, mesh: TriMesh) -> None:
    """Standard little-endian binary STL; vertex values go to `<path>.values`."""
    path = Path(path)
    if len(mesh.triangles) == 0:
        raise EmptyInput("cannot write a mesh with no triangles")
    tris = mesh.triangles
    verts = mesh.vertices
    with open(path, "wb") as f:
        f.write(b"cardiofuse stl".ljust(80, b"\0"))
        f.write(struct.pack("<I", len(tris)))
        for tri in tris:
            a, b, c = verts[tri[0]], verts[tri[1]], verts[tri[2]]
            n = np.cross(b - a, c - a)
            norm = np.linalg.norm(n)
            if norm > 0:
                n = n / norm
            f.write(struct.pack("<3f", *n))
            for v in (a, b, c):
                f.write(struct.pack("<3f", *v))
            f.write(struct.pack("<H", 0))
    if mesh.vertex_values is not None:
        _sidecar_path(path).write_text(
            "\n".join(_fmt(v) for v in mesh.vertex_values) + "\n"
        )


def read_mesh(path) -> TriMesh:
    """Read binary STL, reconstructing shared vertices by exact coordinate match."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 84:
        raise ParseError(f"{path}: too short for an STL header")
    (n_tri,) = struct.unpack_from("<I", raw, 80)
    expected = 84 + 50 * n_tri
    if len(raw) < expected:
        raise ParseError(
            f"{path}: declared {n_tri} triangles need {expected} bytes, "
            f"file has {len(raw)}"
        )
    vert_index: dict = {}
    verts = []
    tris = np.empty((n_tri, 3), dtype=int)
    off = 84
    for ti in range(n_tri):
        off += 12  # skip normal
        for corner in range(3):
            key = raw[off : off + 12]
            idx = vert_index.get(key)
            if idx is None:
                idx = len(verts)
                vert_index[key] = idx
                verts.append(struct.unpack("<3f", key))
            tris[ti, corner] = idx
            off += 12
        off += 2
    values = None
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        try:
            values = np.array(
                [float(v) for v in sidecar.read_text().split()], dtype=float
            )
        except ValueError:
            raise ParseError(f"{sidecar}: non-numeric value entry")
        if len(values) != len(verts):
            raise ParseError(
                f"{sidecar}: {len(values)} values for {len(verts)} vertices"
            )
    return TriMesh(np.asarray(verts, dtype=float), tris, values)


# ---------------------------------------------------------------------------
# volumes: text header + raw little-endian float32 body, i fastest


def write_volume(path, vol: Volume) -> None:
    path = Path(path)
    ref = vol.ref
    header = (
        "cardiofuse-volume 1\n"
        f"size {ref.image_size[0]} {ref.image_size[1]} {ref.image_size[2]}\n"
        f"voxel {_fmt(ref.pixel_extent[0])} {_fmt(ref.pixel_extent[1])} "
        f"{_fmt(ref.pixel_extent[2])}\n"
        f"origin {_fmt(ref.origin[0])} {_fmt(ref.origin[1])} "
        f"{_fmt(ref.origin[2])}\n"
        "end_header\n"
    )
    body = np.asarray(vol.data, dtype="<f4").tobytes(order="F")  # i fastest
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(body)


def read_volume(path) -> Volume:
    path = Path(path)
    raw = path.read_bytes()
    marker = b"end_header\n"
    pos = raw.find(marker)
    if pos < 0:
        raise ParseError(f"{path}: missing end_header")
    try:
        header_lines = raw[:pos].decode("ascii").splitlines()
    except UnicodeDecodeError:
        raise ParseError(f"{path}: header is not ASCII")
    fields = {}
    for ln, line in enumerate(header_lines, start=1):
        tok = line.split()
        if not tok:
            continue
        if ln == 1:
            if tok[0] != "cardiofuse-volume":
                raise ParseError(f"{path}:1: not a cardiofuse volume file")
            continue
        fields[tok[0]] = tok[1:]
    try:
        size = tuple(int(v) for v in fields["size"])
        voxel = tuple(float(v) for v in fields["voxel"])
        origin = tuple(float(v) for v in fields["origin"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad or missing header field ({exc})")
    if len(size) != 3 or len(voxel) != 3 or len(origin) != 3:
        raise ParseError(f"{path}: header fields must have 3 components")

    body = raw[pos + len(marker) :]
    count = size[0] * size[1] * size[2]
    if len(body) != 4 * count:
        raise ParseError(
            f"{path}: body has {len(body)} bytes, header implies {4 * count}"
        )
    data = np.frombuffer(body, dtype="<f4").astype(float)
    if not np.all(np.isfinite(data)):
        raise InvalidData(f"{path}: body contains non-finite samples")
    ref = build_spatial_reference(size, voxel, origin)
    return Volume(data.reshape(size, order="F"), ref)


def write_mask(path, mask: Mask) -> None:
    """Masks serialize as 0/1 volumes in the volume format."""
    write_volume(path, Volume(mask.data.astype(float), mask.ref))


def read_mask(path) -> Mask:
    vol = read_volume(path)
    return Mask(vol.data > 0.5, vol.ref)


# ---------------------------------------------------------------------------
# transforms and landmarks: structured text


_KIND_TAGS = {k.value: k for k in TransformKind}


def write_transform(path, t: AffineTransform3) -> None:
    path = Path(path)
    m = t.matrix()
    lines = ["cardiofuse-transform 1", f"kind {t.kind.value}"]
    for row in m:
        lines.append(" ".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def read_transform(path) -> AffineTransform3:
    path = Path(path)
    lines = [l for l in path.read_text().splitlines() if l.strip()]
    if not lines or not lines[0].startswith("cardiofuse-transform"):
        raise ParseError(f"{path}:1: not a cardiofuse transform file")
    if len(lines) < 2 or not lines[1].startswith("kind "):
        raise ParseError(f"{path}:2: missing kind line")
    tag = lines[1].split(None, 1)[1].strip()
    kind = _KIND_TAGS.get(tag)
    if kind is None:
        raise ParseError(f"{path}:2: unknown transform kind {tag!r}")
    rows = lines[2:]
    if len(rows) != 4:
        raise ParseError(f"{path}: expected 4 matrix rows, found {len(rows)}")
    m = np.empty((4, 4))
    for r, line in enumerate(rows):
        tok = line.split()
        if len(tok) != 4:
            raise ParseError(f"{path}:{3 + r}: expected 4 entries, got {len(tok)}")
        try:
            m[r] = [float(v) for v in tok]
        except ValueError:
            raise ParseError(f"{path}:{3 + r}: non-numeric entry")
    if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
        raise InvalidData(f"{path}: last homogeneous row must be (0, 0, 0, 1)")
    return AffineTransform3.from_matrix(m, kind)


def write_landmarks(path, landmarks: LandmarkSet) -> None:
    path = Path(path)
    lines = ["cardiofuse-landmarks 1"]
    for name, group in (
        ("anterior", landmarks.anterior),
        ("posterior", landmarks.posterior),
    ):
        lines.append(f"{name} {len(group)}")
        for p in group:
            lines.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    path.write_text("\n".join(lines) + "\n")


def read_landmarks(path) -> LandmarkSet:
    path = Path(path)
    lines = [l for l in path.read_text().splitlines() if l.strip()]
    if not lines or not lines[0].startswith("cardiofuse-landmarks"):
        raise ParseError(f"{path}:1: not a cardiofuse landmarks file")
    groups = {}
    i = 1
    while i < len(lines):
        tok = lines[i].split()
        if len(tok) != 2 or tok[0] not in ("anterior", "posterior"):
            raise ParseError(f"{path}:{i + 1}: expected a group header line")
        name = tok[0]
        try:
            count = int(tok[1])
        except ValueError:
            raise ParseError(f"{path}:{i + 1}: bad group count")
        rows = lines[i + 1 : i + 1 + count]
        if len(rows) < count:
            raise ParseError(f"{path}:{i + 1}: group {name} is truncated")
        pts = np.empty((count, 3))
        for r, line in enumerate(rows):
            tok = line.split()
            if len(tok) != 3:
                raise ParseError(f"{path}:{i + 2 + r}: expected 3 coordinates")
            try:
                pts[r] = [float(v) for v in tok]
            except ValueError:
                raise ParseError(f"{path}:{i + 2 + r}: non-numeric coordinate")
        groups[name] = pts
        i += 1 + count
    if "anterior" not in groups or "posterior" not in groups:
        raise ParseError(f"{path}: missing anterior or posterior group")
    return LandmarkSet(groups["anterior"], groups["posterior"])
