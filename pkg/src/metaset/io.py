"""Artifact file formats.

All binary formats are little-endian:

* voxel cell  ``VXC1``: u32 n, then n^3 bits packed with x fastest
  (bit order little within each byte, zero padded to a whole byte)
* point cloud ``PC3D``: u32 count, then count x 3 float32
* kernel      ``KMAT``: u32 n, u8 kind, then n^2 float64 row-major
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .metrics import UnitCell2D


class FormatError(ValueError):
    """Bad magic bytes, truncated payload or a failed invariant check."""


KIND_CODES = {"shape": 0, "property": 1, "joint": 2, "distance": 3}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


def _read_magic(buf, magic, path):
    if buf[:4] != magic:
        raise FormatError(f"{path}: bad magic {buf[:4]!r}, expected {magic!r}")


# --- voxel cells ---------------------------------------------------------------

def write_voxels(path, solid):
    solid = np.asarray(solid, dtype=bool)
    n = solid.shape[0]
    if solid.shape != (n, n, n):
        raise ValueError(f"voxel cell must be cubic, got {solid.shape}")
    bits = np.packbits(solid.ravel(order="C"), bitorder="little")
    Path(path).write_bytes(b"VXC1" + struct.pack("<I", n) + bits.tobytes())


def read_voxels(path, expected_density=None, tol=1e-12):
    """Load a voxel cell; optionally verify the recorded density."""
    buf = Path(path).read_bytes()
    _read_magic(buf, b"VXC1", path)
    (n,) = struct.unpack("<I", buf[4:8])
    nbytes = (n ** 3 + 7) // 8
    payload = np.frombuffer(buf[8:], dtype=np.uint8)
    if payload.size != nbytes:
        raise FormatError(f"{path}: expected {nbytes} payload bytes, got {payload.size}")
    bits = np.unpackbits(payload, bitorder="little")[: n ** 3]
    solid = bits.astype(bool).reshape(n, n, n)
    if expected_density is not None:
        rho = np.count_nonzero(solid) / solid.size
        if abs(rho - expected_density) > tol:
            raise FormatError(f"{path}: density {rho} does not match recorded {expected_density}")
    return solid


# --- point clouds --------------------------------------------------------------

def write_cloud(path, points):
    pts = np.asarray(points, dtype="<f4")
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"point cloud must be (n, 3), got {pts.shape}")
    Path(path).write_bytes(b"PC3D" + struct.pack("<I", len(pts)) + pts.tobytes())


def read_cloud(path):
    buf = Path(path).read_bytes()
    _read_magic(buf, b"PC3D", path)
    (count,) = struct.unpack("<I", buf[4:8])
    if len(buf) != 8 + 12 * count:
        raise FormatError(f"{path}: truncated point cloud")
    return np.frombuffer(buf[8:], dtype="<f4").reshape(count, 3).astype(float)


# --- kernels -------------------------------------------------------------------

def write_kernel(path, matrix, kind="shape", csv_mirror=False):
    m = np.asarray(matrix, dtype="<f8")
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError(f"kernel must be square, got {m.shape}")
    code = KIND_CODES[kind]
    Path(path).write_bytes(b"KMAT" + struct.pack("<IB", n, code) + m.tobytes(order="C"))
    if csv_mirror:
        np.savetxt(Path(path).with_suffix(".csv"), m, delimiter=",", fmt="%.17g")


def read_kernel(path, check_symmetry=True, tol=1e-12):
    """Return ``(matrix, kind)``; verifies symmetry unless disabled."""
    buf = Path(path).read_bytes()
    _read_magic(buf, b"KMAT", path)
    n, code = struct.unpack("<IB", buf[4:9])
    if len(buf) != 9 + 8 * n * n:
        raise FormatError(f"{path}: truncated kernel")
    if code not in KIND_NAMES:
        raise FormatError(f"{path}: unknown kernel kind {code}")
    m = np.frombuffer(buf[9:], dtype="<f8").reshape(n, n).astype(float)
    if check_symmetry and n and np.max(np.abs(m - m.T)) > tol:
        raise FormatError(f"{path}: kernel is not symmetric")
    return m, KIND_NAMES[code]


# --- PBM -----------------------------------------------------------------------

def write_pbm(path, solid, binary=True):
    """Write a PBM image; 1 (black) marks solid pixels."""
    solid = np.asarray(solid, dtype=bool)
    h, w = solid.shape
    if binary:
        rows = np.packbits(solid, axis=1)  # big-endian bit order, padded per row
        Path(path).write_bytes(f"P4\n{w} {h}\n".encode() + rows.tobytes())
    else:
        lines = [" ".join("1" if v else "0" for v in row) for row in solid]
        Path(path).write_text(f"P1\n{w} {h}\n" + "\n".join(lines) + "\n", encoding="ascii")


def _pbm_tokens(data, start, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    i = start
    while len(tokens) < count:
        while i < len(data) and chr(data[i]).isspace():
            i += 1
        if i < len(data) and data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not chr(data[j]).isspace() and data[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise FormatError("truncated PBM header")
        tokens.append(data[i:j].decode("ascii"))
        i = j
    return tokens, i


def read_pbm(path):
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P1", b"P4"):
        raise FormatError(f"{path}: not a PBM file (magic {magic!r})")
    (w, h), pos = _pbm_tokens(data, 2, 2)
    w, h = int(w), int(h)
    if magic == b"P4":
        pos += 1  # single whitespace after the header
        row_bytes = (w + 7) // 8
        raw = np.frombuffer(data[pos:pos + row_bytes * h], dtype=np.uint8)
        if raw.size != row_bytes * h:
            raise FormatError(f"{path}: truncated PBM raster")
        bits = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
        return bits.astype(bool)
    body = data[pos:].decode("ascii")
    body = "\n".join(line.split("#", 1)[0] for line in body.splitlines())
    digits = [c for c in body if c in "01"]
    if len(digits) < w * h:
        raise FormatError(f"{path}: truncated PBM raster")
    return np.array(digits[: w * h], dtype=int).reshape(h, w).astype(bool)


# --- manifests and embeddings ----------------------------------------------------

def write_manifest(path, entries):
    Path(path).write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")


def read_manifest(path):
    entries = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(entries, list):
        raise FormatError(f"{path}: manifest must be a JSON array")
    for e in entries:
        for key in ("id", "family_id", "density", "cell_path", "cloud_path",
                    "properties", "embedding"):
            if key not in e:
                raise FormatError(f"{path}: manifest entry missing {key!r}")
    return entries


def resolve(base, rel):
    p = Path(rel)
    return p if p.is_absolute() else Path(base).parent / p


def load_cell2d(entry, manifest_path):
    solid = read_pbm(resolve(manifest_path, entry["cell_path"]))
    rho = np.count_nonzero(solid) / solid.size
    if abs(rho - entry["density"]) > 1e-9:
        raise FormatError(f"cell {entry['id']}: density {rho} != manifest {entry['density']}")
    props = entry.get("properties")
    return UnitCell2D(solid, None if props is None else np.asarray(props, float), entry["id"])


def write_embeddings(path, ids, vectors):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for cid, vec in zip(ids, vectors):
            writer.writerow([cid] + [repr(float(v)) for v in vec])


def read_embeddings(path):
    """Return ``(ids, matrix)`` from an id-first CSV with fixed row length."""
    ids, rows = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    if len({len(r) for r in rows}) > 1:
        raise FormatError(f"{path}: embedding rows differ in length")
    matrix = np.array(rows, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise FormatError(f"{path}: non-finite embedding values")
    return ids, matrix


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
