"""File formats: PFM images, packed event files, 8-bit PNG and sample metadata."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError
from .events import EventStream

EVENT_MAGIC = b"EVT1"
EVENT_HEADER = struct.Struct("<4sIII")
EVENT_RECORD = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<f8"), ("p", "i1"), ("pad", "V3")])
assert EVENT_RECORD.itemsize == 16


def write_pfm(path, img: np.ndarray) -> None:
    """Write a float image as little-endian PFM (``PF`` for HxWx3, ``Pf`` for HxW)."""
    img = np.asarray(img, dtype="<f4")
    if img.ndim == 3 and img.shape[2] == 3:
        tag = b"PF"
    elif img.ndim == 2:
        tag = b"Pf"
    else:
        raise InvalidInputError(f"PFM needs HxW or HxWx3, got shape {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(tag + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n")
        # PFM rows run bottom-to-top
        f.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        tag = f.readline().strip()
        if tag not in (b"PF", b"Pf"):
            raise InvalidInputError(f"{path}: not a PFM file")
        dims = f.readline().split()
        while len(dims) < 2:  # tolerate width/height split over lines
            dims += f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        data = f.read()
    channels = 3 if tag == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    arr = np.frombuffer(data, dtype=dtype, count=count)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return arr.reshape(shape)[::-1].astype(np.float32)


def write_events(path, ev: EventStream) -> None:
    h, w = ev.resolution
    if w > 0xFFFF or h > 0xFFFF:
        raise InvalidInputError("resolution exceeds u16 coordinates")
    rec = np.zeros(len(ev), dtype=EVENT_RECORD)
    rec["x"], rec["y"], rec["t"], rec["p"] = ev.x, ev.y, ev.t, ev.p
    with open(path, "wb") as f:
        f.write(EVENT_HEADER.pack(EVENT_MAGIC, w, h, len(ev)))
        f.write(rec.tobytes())


def read_events(path, span: tuple[float, float] | None = None) -> EventStream:
    """Read an ``events.bin`` file. The span defaults to the min/max timestamp."""
    raw = Path(path).read_bytes()
    if len(raw) < EVENT_HEADER.size:
        raise InvalidInputError(f"{path}: truncated header")
    magic, w, h, n = EVENT_HEADER.unpack_from(raw)
    if magic != EVENT_MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    if len(raw) != EVENT_HEADER.size + n * EVENT_RECORD.itemsize:
        raise InvalidInputError(f"{path}: expected {n} records")
    rec = np.frombuffer(raw, dtype=EVENT_RECORD, count=n, offset=EVENT_HEADER.size)
    if span is None:
        span = (float(rec["t"].min()), float(rec["t"].max())) if n else (0.0, 0.0)
    return EventStream(rec["x"], rec["y"], rec["t"], rec["p"], (h, w), span)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path, img: np.ndarray) -> None:
    """Store an image in [0, 1] as 8-bit PNG (values are written as-is, no encoding)."""
    Image.fromarray(to_uint8(img)).save(path, optimize=False)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def write_meta(path, timestamp: float, ev: int, span: tuple[float, float], kind: str) -> None:
    Path(path).write_text(
        f"timestamp {timestamp!r}\nev {ev:+d}\nspan {span[0]!r} {span[1]!r}\nkind {kind}\n"
    )


def read_meta(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, *vals = line.split()
        out[key] = vals
    try:
        return {
            "timestamp": float(out["timestamp"][0]),
            "ev": int(out["ev"][0]),
            "span": (float(out["span"][0]), float(out["span"][1])),
            "kind": out.get("kind", ["static"])[0],
        }
    except (KeyError, IndexError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed metadata") from exc
