"""Point cloud and mesh file I/O.

PLY: ASCII or binary little-endian, float64 properties x y z [nx ny nz].
Meshes: ASCII STL and OBJ with triangular faces only.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from insertsim.geom import PointCloud
from insertsim.scansim.surfaces import TriangleMesh


class MeshFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# PLY
# ---------------------------------------------------------------------------

def write_ply(path, cloud: PointCloud, binary: bool = False) -> None:
    path = Path(path)
    n = len(cloud)
    props = ["x", "y", "z"]
    if cloud.has_normals:
        props += ["nx", "ny", "nz"]
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {n}"]
    header += [f"property double {p}" for p in props]
    header.append("end_header")
    data = cloud.points if not cloud.has_normals else np.hstack([cloud.points, cloud.normals])
    if binary:
        with open(path, "wb") as f:
            f.write(("\n".join(header) + "\n").encode("ascii"))
            f.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    else:
        with open(path, "w") as f:
            f.write("\n".join(header) + "\n")
            for row in data:
                f.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_ply(path) -> PointCloud:
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise MeshFormatError(f"{path}: not a PLY file")
    header = raw[:end].decode("ascii").splitlines()
    body = raw[end + len(b"end_header\n"):]
    fmt = None
    count = 0
    props: list[tuple[str, str]] = []
    in_vertex = False
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            props.append((parts[1], parts[2]))
    names = [name for _, name in props]
    if names[:3] != ["x", "y", "z"]:
        raise MeshFormatError(f"{path}: vertex element must start with x y z")
    has_normals = names[3:6] == ["nx", "ny", "nz"]
    width = len(props)
    if fmt == "ascii":
        values = np.array(body.decode("ascii").split(), dtype=np.float64)
        if values.size != count * width:
            raise MeshFormatError(f"{path}: expected {count * width} values")
        table = values.reshape(count, width)
    elif fmt == "binary_little_endian":
        dtypes = {"double": "<f8", "float": "<f4"}
        for typ, _ in props:
            if typ not in dtypes:
                raise MeshFormatError(f"{path}: unsupported property type {typ}")
        rec = np.dtype([(name, dtypes[typ]) for typ, name in props])
        arr = np.frombuffer(body, dtype=rec, count=count)
        table = np.column_stack([arr[name].astype(np.float64) for _, name in props])
    else:
        raise MeshFormatError(f"{path}: unsupported format {fmt}")
    normals = table[:, 3:6] if has_normals else None
    return PointCloud(table[:, :3], normals)


# ---------------------------------------------------------------------------
# STL / OBJ meshes
# ---------------------------------------------------------------------------

def read_stl(path) -> TriangleMesh:
    """ASCII STL reader; vertices are merged exactly (bitwise equality)."""
    path = Path(path)
    text = path.read_text()
    if not text.lstrip().startswith("solid"):
        raise MeshFormatError(f"{path}: only ASCII STL is supported")
    verts: list[tuple[float, float, float]] = []
    index: dict[tuple[float, float, float], int] = {}
    faces = []
    current: list[int] = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            if len(parts) != 4:
                raise MeshFormatError(f"{path}: malformed vertex line")
            key = (float(parts[1]), float(parts[2]), float(parts[3]))
            if key not in index:
                index[key] = len(verts)
                verts.append(key)
            current.append(index[key])
        elif parts[0] == "endfacet":
            if len(current) != 3:
                raise MeshFormatError(f"{path}: facet with {len(current)} vertices")
            faces.append(tuple(current))
            current = []
    if not faces:
        raise MeshFormatError(f"{path}: no facets found")
    return TriangleMesh(np.array(verts), np.array(faces))


def write_stl(path, mesh: TriangleMesh, name: str = "mesh") -> None:
    a, b, c = mesh.triangle_corners()
    normals = mesh.triangle_normals()
    with open(path, "w") as f:
        f.write(f"solid {name}\n")
        for i in range(len(mesh.faces)):
            f.write(f"  facet normal {normals[i, 0]:.9e} {normals[i, 1]:.9e} {normals[i, 2]:.9e}\n")
            f.write("    outer loop\n")
            for v in (a[i], b[i], c[i]):
                f.write(f"      vertex {v[0]:.17e} {v[1]:.17e} {v[2]:.17e}\n")
            f.write("    endloop\n  endfacet\n")
        f.write(f"endsolid {name}\n")


def read_obj(path) -> TriangleMesh:
    path = Path(path)
    verts = []
    faces = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshFormatError(f"{path}:{lineno}: malformed vertex")
            verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
        elif parts[0] == "f":
            idx = [int(tok.split("/")[0]) for tok in parts[1:]]
            if len(idx) != 3:
                raise MeshFormatError(f"{path}:{lineno}: only triangular faces supported")
            faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    if not faces:
        raise MeshFormatError(f"{path}: no faces found")
    return TriangleMesh(np.array(verts, dtype=np.float64), np.array(faces))


def read_mesh(path) -> TriangleMesh:
    suffix = Path(path).suffix.lower()
    if suffix == ".stl":
        return read_stl(path)
    if suffix == ".obj":
        return read_obj(path)
    raise MeshFormatError(f"unsupported mesh format: {suffix}")
