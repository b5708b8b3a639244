"""Tensor archive: a JSON manifest next to one raw little-endian blob.

Manifest layout::

    {"blob": "<file name, relative to the manifest>",
     "format": "tensor-archive-1",
     "tensors": [{"byte_offset": int, "dtype": "uint8"|"int32"|"int64"|"float32"|"float64",
                  "name": str, "shape": [int, ...]}, ...]}

Tensors are stored C-ordered, back to back in manifest order, with no
padding; the blob length must equal the end of the last tensor.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "tensor-archive-1"
DTYPES = {"uint8": "<u1", "int32": "<i4", "int64": "<i8", "float32": "<f4", "float64": "<f8"}


class ArchiveError(ValueError):
    pass


def save_archive(tensors: dict[str, np.ndarray], manifest_path, blob_name: str | None = None) -> None:
    manifest_path = Path(manifest_path)
    blob_name = blob_name or manifest_path.with_suffix(".bin").name
    entries, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        dtype = arr.dtype.name
        if dtype not in DTYPES:
            raise ArchiveError(f"tensor {name!r}: unsupported dtype {dtype}")
        raw = np.ascontiguousarray(arr, dtype=DTYPES[dtype]).tobytes()
        entries.append({"name": name, "dtype": dtype, "shape": list(arr.shape), "byte_offset": offset})
        chunks.append(raw)
        offset += len(raw)
    manifest = {"format": FORMAT, "blob": blob_name, "tensors": entries}
    (manifest_path.parent / blob_name).write_bytes(b"".join(chunks))
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def load_archive(manifest_path) -> dict[str, np.ndarray]:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{manifest_path}: manifest is not valid JSON") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT:
        raise ArchiveError(f"{manifest_path}: not a {FORMAT} manifest")
    try:
        return _unpack(manifest, (manifest_path.parent / manifest["blob"]).read_bytes())
    except (KeyError, TypeError) as exc:
        raise ArchiveError(f"{manifest_path}: malformed manifest ({exc!r})") from exc


def _unpack(manifest: dict, blob: bytes) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    end = 0
    for e in manifest["tensors"]:
        if e.get("dtype") not in DTYPES:
            raise ArchiveError(f"tensor {e.get('name')!r}: unsupported dtype {e.get('dtype')!r}")
        dt = np.dtype(DTYPES[e["dtype"]])
        shape = tuple(int(s) for s in e["shape"])
        start = int(e["byte_offset"])
        if start != end:
            raise ArchiveError(f"tensor {e['name']!r}: offset {start} breaks the packed layout (expected {end})")
        end = start + dt.itemsize * int(np.prod(shape, dtype=np.int64))
        if end > len(blob):
            raise ArchiveError(f"tensor {e['name']!r} runs past the end of the blob")
        arr = np.frombuffer(blob, dtype=dt, count=(end - start) // dt.itemsize, offset=start)
        out[e["name"]] = arr.reshape(shape).astype(dt.newbyteorder("="))
    if end != len(blob):
        raise ArchiveError(f"blob has {len(blob) - end} trailing bytes")
    return out
