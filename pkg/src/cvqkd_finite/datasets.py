"""Binary dataset files and the JSON manifest that describes a run.

File layout (little endian)::

    offset  size  field
    0       8     magic   b"CVQKDSYM" (symbols) or b"CVQKDCAL" (calibration)
    8       4     version (uint32, currently 1)
    12      4     flags   (uint32)
    16      8     record count (uint64)
    24      8     reserved, zero
    32      ...   records of float64

Symbol records are ``(q_tx, p_tx, q_rx, p_rx)``; calibration records are
``(q_rx, p_rx)``.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .estimation import QuadratureDataset

__all__ = [
    "SYMBOL_MAGIC",
    "CALIBRATION_MAGIC",
    "FORMAT_VERSION",
    "FLAG_TX_DIGITIZED",
    "FLAG_RX_DIGITIZED",
    "FLAG_ELECTRONIC",
    "write_symbols",
    "read_symbols",
    "write_calibration",
    "read_calibration",
    "read_header",
    "write_manifest",
    "read_manifest",
    "MANIFEST_NAME",
]

SYMBOL_MAGIC = b"CVQKDSYM"
CALIBRATION_MAGIC = b"CVQKDCAL"
FORMAT_VERSION = 1
HEADER = struct.Struct("<8sIIQ8x")
MANIFEST_NAME = "manifest.json"

FLAG_TX_DIGITIZED = 1
FLAG_RX_DIGITIZED = 2
FLAG_ELECTRONIC = 1  # calibration files: set for lasers-off records, clear for vacuum

_LE_F64 = np.dtype("<f8")


def _write(path: Path, magic: bytes, flags: int, columns: list[np.ndarray]) -> None:
    n = columns[0].shape[0]
    records = np.empty((n, len(columns)), dtype=_LE_F64)
    for j, col in enumerate(columns):
        records[:, j] = col
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "wb") as fh:
        fh.write(HEADER.pack(magic, FORMAT_VERSION, flags, n))
        fh.write(records.tobytes())
    os.replace(tmp, path)


def read_header(path: str | os.PathLike) -> tuple[bytes, int, int, int]:
    """Return ``(magic, version, flags, count)`` after validating the file size."""
    path = Path(path)
    try:
        size = path.stat().st_size
        with open(path, "rb") as fh:
            raw = fh.read(HEADER.size)
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read dataset ({exc.strerror})") from exc
    if len(raw) < HEADER.size:
        raise DataFormatError(f"{path}: file shorter than the {HEADER.size}-byte header")
    magic, version, flags, count = HEADER.unpack(raw)
    if magic not in (SYMBOL_MAGIC, CALIBRATION_MAGIC):
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported format version {version}")
    width = 4 if magic == SYMBOL_MAGIC else 2
    expected = HEADER.size + count * width * 8
    if size != expected:
        raise DataFormatError(f"{path}: header declares {count} records ({expected} bytes) but file has {size} bytes")
    return magic, version, flags, count


def _read(path, magic: bytes, width: int) -> tuple[np.ndarray, int]:
    found, _, flags, count = read_header(path)
    if found != magic:
        raise DataFormatError(f"{path}: expected magic {magic!r}, found {found!r}")
    data = np.fromfile(path, dtype=_LE_F64, offset=HEADER.size, count=count * width)
    data = data.reshape(count, width)
    if not np.isfinite(data).all():
        raise DataFormatError(f"{path}: non-finite sample values")
    return data, flags


def write_symbols(path: str | os.PathLike, data: QuadratureDataset, flags: int = 0) -> None:
    _write(Path(path), SYMBOL_MAGIC, flags, [data.tx_q, data.tx_p, data.rx_q, data.rx_p])


def read_symbols(path: str | os.PathLike) -> tuple[QuadratureDataset, int]:
    """Load a symbol file; returns the dataset and its header flags."""
    rec, flags = _read(path, SYMBOL_MAGIC, 4)
    if rec.shape[0] == 0:
        raise DataFormatError(f"{path}: dataset is empty")
    return QuadratureDataset(rec[:, 0], rec[:, 1], rec[:, 2], rec[:, 3]), flags


def write_calibration(path: str | os.PathLike, q: np.ndarray, p: np.ndarray, electronic: bool) -> None:
    _write(Path(path), CALIBRATION_MAGIC, FLAG_ELECTRONIC if electronic else 0, [q, p])


def read_calibration(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray, bool]:
    """Load a calibration file; returns ``(q, p, is_electronic)``."""
    rec, flags = _read(path, CALIBRATION_MAGIC, 2)
    if rec.shape[0] < 2:
        raise DataFormatError(f"{path}: calibration record needs at least 2 samples")
    return rec[:, 0].copy(), rec[:, 1].copy(), bool(flags & FLAG_ELECTRONIC)


def write_manifest(directory: str | os.PathLike, manifest: dict) -> Path:
    path = Path(directory) / MANIFEST_NAME
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    path.write_text(text)
    return path


def read_manifest(directory: str | os.PathLike) -> dict:
    path = Path(directory)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text())
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read manifest ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: manifest is not valid JSON ({exc.msg})") from exc
    if not isinstance(manifest, dict) or "blocks" not in manifest:
        raise DataFormatError(f"{path}: manifest lacks a 'blocks' list")
    return manifest
