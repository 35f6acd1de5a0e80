"""Raw sample files with a JSON metadata sidecar.

A capture is a headerless little-endian array of real samples plus
``<file>.json`` holding ``{"sample_rate_hz": float, "format": "f32le",
"num_samples": int}``.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .core_dsp import Origin, SampleBuffer
from .exceptions import CaptureError

__all__ = ["FORMATS", "sidecar_path", "ingest_capture", "write_capture"]

FORMATS = {"f32le": np.dtype("<f4"), "f64le": np.dtype("<f8"), "i16le": np.dtype("<i2")}


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _read_meta(meta_path: Path) -> dict:
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError:
        raise CaptureError(f"{meta_path}: metadata sidecar not found") from None
    except json.JSONDecodeError as e:
        raise CaptureError(f"{meta_path}: invalid JSON at line {e.lineno} column {e.colno} (char {e.pos}): {e.msg}") from None
    if not isinstance(meta, dict):
        raise CaptureError(f"{meta_path}: metadata must be a JSON object")
    for key in ("sample_rate_hz", "format"):
        if key not in meta:
            raise CaptureError(f"{meta_path}: missing required field {key!r}")
    if meta["format"] not in FORMATS:
        raise CaptureError(f"{meta_path}: unsupported format {meta['format']!r}; expected one of {sorted(FORMATS)}")
    try:
        fs = float(meta["sample_rate_hz"])
    except (TypeError, ValueError):
        raise CaptureError(f"{meta_path}: sample_rate_hz is not a number") from None
    if not fs > 0 or not np.isfinite(fs):
        raise CaptureError(f"{meta_path}: sample_rate_hz must be positive and finite")
    return meta


def ingest_capture(path, meta_path=None) -> SampleBuffer:
    """Load a capture as a float64 SampleBuffer.

    Raises CaptureError naming byte counts or offsets when the payload is
    truncated, the sidecar is malformed, or a sample is not finite.
    """
    path = Path(path)
    meta_path = Path(meta_path) if meta_path is not None else sidecar_path(path)
    meta = _read_meta(meta_path)
    dtype = FORMATS[meta["format"]]
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise CaptureError(f"{path}: sample file not found") from None

    if "num_samples" in meta:
        n = int(meta["num_samples"])
        expected = n * dtype.itemsize
        if len(raw) != expected:
            raise CaptureError(
                f"{path}: expected {expected} bytes ({n} x {meta['format']}), found {len(raw)} bytes")
    elif len(raw) % dtype.itemsize:
        raise CaptureError(
            f"{path}: {len(raw)} bytes is not a whole number of {dtype.itemsize}-byte samples "
            f"({len(raw) % dtype.itemsize} trailing bytes at offset {len(raw) - len(raw) % dtype.itemsize})")
    if not raw:
        raise CaptureError(f"{path}: file holds no samples")

    x = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        i = int(bad[0])
        raise CaptureError(f"{path}: non-finite sample at index {i} (byte offset {i * dtype.itemsize})")
    return SampleBuffer(x, float(meta["sample_rate_hz"]), Origin.FILE)


def write_capture(buf: SampleBuffer, path, fmt: str = "f32le") -> Path:
    """Write ``buf`` and its sidecar; returns the sidecar path."""
    if fmt not in FORMATS:
        raise CaptureError(f"unsupported format {fmt!r}")
    path = Path(path)
    dtype = FORMATS[fmt]
    data = buf.samples
    if dtype.kind == "i":
        info = np.iinfo(dtype)
        data = np.clip(np.rint(data), info.min, info.max)
    tmp = path.with_name(path.name + ".part")
    tmp.write_bytes(data.astype(dtype).tobytes())
    os.replace(tmp, path)
    meta = {"sample_rate_hz": buf.sample_rate_hz, "format": fmt, "num_samples": len(buf)}
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2) + "\n")
    return side
