"""Small deterministic binary formats shared by the persistence layer.

Two conventions live here:

* matrix files ("SLOTW2V1"): 8-byte ASCII magic, u32 rows, u32 cols,
  then row-major little-endian float32 payload. Used for the token
  embedder vectors and cached feature matrices.
* section files ("SLOTMDL1"): 8-byte magic, u32 version, u32 section
  count, then per section a u64 byte length and the payload. Sections are
  order-significant. Array payloads use :func:`pack_arrays`.

Everything is written explicitly little-endian so files are byte-identical
across runs and platforms.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"SLOTW2V1"
MODEL_MAGIC = b"SLOTMDL1"
MODEL_VERSION = 1

_DTYPE_CODES = {
    np.dtype("<f8"): 0,
    np.dtype("<f4"): 1,
    np.dtype("<i8"): 2,
    np.dtype("<i4"): 3,
    np.dtype("i1"): 4,
    np.dtype("u1"): 5,
    np.dtype("bool"): 6,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def write_matrix(path: str | Path, mat: np.ndarray) -> None:
    """Write a 2-D float32 matrix under the matrix-file convention."""
    mat = np.ascontiguousarray(mat, dtype="<f4")
    if mat.ndim != 2:
        raise ValueError(f"expected 2-D matrix, got shape {mat.shape}")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", mat.shape[0], mat.shape[1]))
        fh.write(mat.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != MATRIX_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}, expected {MATRIX_MAGIC!r}")
    rows, cols = struct.unpack_from("<II", raw, 8)
    expected = 16 + rows * cols * 4
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated matrix file ({len(raw)} bytes, expected {expected})")
    return np.frombuffer(raw, dtype="<f4", offset=16).reshape(rows, cols).copy()


def pack_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    """Serialize named arrays: u32 count, then per array name/dtype/shape/payload."""
    out = [struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.dtype("bool"):
            code = 6
            payload = arr.astype("u1")
        else:
            dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
            arr = arr.astype(dt)
            if arr.dtype not in _DTYPE_CODES:
                raise ValueError(f"unsupported dtype {arr.dtype} for array {name!r}")
            code = _DTYPE_CODES[arr.dtype]
            payload = arr
        encoded = name.encode("utf-8")
        out.append(struct.pack("<H", len(encoded)))
        out.append(encoded)
        out.append(struct.pack("<BB", code, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        out.append(payload.tobytes())
    return b"".join(out)


def unpack_arrays(blob: bytes) -> dict[str, np.ndarray]:
    (count,) = struct.unpack_from("<I", blob, 0)
    offset = 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        code, ndim = struct.unpack_from("<BB", blob, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, offset) if ndim else ()
        offset += 4 * ndim
        dtype = _CODE_DTYPES[code]
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        nbytes = size * dtype.itemsize
        arr = np.frombuffer(blob, dtype=dtype, count=size, offset=offset).reshape(shape).copy()
        if code == 6:
            arr = arr.astype(bool)
        arrays[name] = arr
        offset += nbytes
    return arrays


def pack_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def unpack_json(blob: bytes):
    return json.loads(blob.decode("utf-8"))


def pack_section(meta, arrays: dict[str, np.ndarray]) -> bytes:
    """JSON metadata followed by named arrays, as one length-framed blob."""
    meta_blob = pack_json(meta)
    return struct.pack("<Q", len(meta_blob)) + meta_blob + pack_arrays(arrays)


def unpack_section(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    (meta_len,) = struct.unpack_from("<Q", blob, 0)
    meta = unpack_json(blob[8 : 8 + meta_len])
    return meta, unpack_arrays(blob[8 + meta_len :])


def write_sections(path: str | Path, sections: list[bytes], *, version: int = MODEL_VERSION) -> None:
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", version, len(sections)))
        for section in sections:
            fh.write(struct.pack("<Q", len(section)))
            fh.write(section)


def read_sections(path: str | Path, *, expect_version: int = MODEL_VERSION) -> list[bytes]:
    raw = Path(path).read_bytes()
    if raw[:8] != MODEL_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}, expected {MODEL_MAGIC!r}")
    version, count = struct.unpack_from("<II", raw, 8)
    if version != expect_version:
        raise ValueError(f"{path}: unsupported model version {version} (reader supports {expect_version})")
    sections = []
    offset = 16
    for _ in range(count):
        (length,) = struct.unpack_from("<Q", raw, offset)
        offset += 8
        sections.append(raw[offset : offset + length])
        offset += length
    if offset != len(raw):
        raise ValueError(f"{path}: trailing bytes after last section")
    return sections
