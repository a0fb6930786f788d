"""MNRT raw fields, 8-bit PNG, shift-stack files and atomic multi-file writes.

MNRT layout: the 4 magic bytes ``MNRT``, then H, W, C as little-endian
uint32, then H*W*C little-endian float32 values in (y, x, c) order.
"""

import io as _io
import os
import struct
import tempfile
from contextlib import contextmanager

import numpy as np
from PIL import Image

MAGIC = b"MNRT"
_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """A file exists but does not parse as the expected format."""


def encode_mnrt(field):
    arr = np.asarray(field)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"MNRT needs an (H, W, C) field, got shape {arr.shape}")
    h, w, c = arr.shape
    return _HEADER.pack(MAGIC, h, w, c) + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_mnrt(buf, name="<bytes>", offset=0):
    """Decode one MNRT field starting at ``offset``; returns (field, end)."""
    if len(buf) - offset < _HEADER.size:
        raise FormatError(f"{name}: truncated MNRT header")
    magic, h, w, c = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise FormatError(f"{name}: bad magic {magic!r}, expected {MAGIC!r}")
    if min(h, w, c) < 1:
        raise FormatError(f"{name}: empty MNRT dimensions {h}x{w}x{c}")
    start = offset + _HEADER.size
    end = start + 4 * h * w * c
    if len(buf) < end:
        raise FormatError(f"{name}: truncated MNRT payload ({h}x{w}x{c})")
    data = np.frombuffer(buf, dtype="<f4", count=h * w * c, offset=start)
    arr = data.astype(np.float64).reshape(h, w, c)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{name}: MNRT payload contains non-finite values")
    return arr, end


def read_mnrt(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    arr, end = decode_mnrt(buf, name=str(path))
    if end != len(buf):
        raise FormatError(f"{path}: {len(buf) - end} trailing bytes after MNRT field")
    return arr


def write_mnrt(path, field):
    with atomic_outputs() as tmp:
        with open(tmp(path), "wb") as fh:
            fh.write(encode_mnrt(field))


def to_uint8(field):
    """Map [0, 1] linearly to [0, 255], rounding half up and clamping."""
    arr = np.asarray(field, dtype=np.float64)
    return np.clip(np.floor(arr * 255.0 + 0.5), 0, 255).astype(np.uint8)


def encode_png(field):
    q = to_uint8(field)
    if q.ndim == 3 and q.shape[2] == 1:
        q = q[:, :, 0]
    elif q.ndim == 3 and q.shape[2] not in (3, 4):
        raise ValueError(f"PNG needs 1, 3 or 4 channels, got {q.shape[2]}")
    out = _io.BytesIO()
    Image.fromarray(q).save(out, format="PNG")
    return out.getvalue()


def read_png(path):
    """Read an 8-bit PNG as an (H, W, C) float field in [0, 1]."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB", "RGBA"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64)
    except OSError as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise FormatError(f"{path}: not a readable PNG ({exc})") from None
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr / 255.0


def write_png(path, field):
    with atomic_outputs() as tmp:
        with open(tmp(path), "wb") as fh:
            fh.write(encode_png(field))


def read_field(path):
    """Read MNRT or PNG by sniffing the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_mnrt(path)
    if head == b"\x89PNG":
        return read_png(path)
    raise FormatError(f"{path}: neither MNRT nor PNG")


def encode_stack(levels, pan_amount, max_disp):
    header = f"N_s={len(levels)} P_a={pan_amount!r} max_disp={max_disp!r}\n"
    return header.encode("ascii") + b"".join(encode_mnrt(lv) for lv in levels)


def read_stack(path):
    """Returns (levels, meta) where meta has N_s, P_a and max_disp."""
    with open(path, "rb") as fh:
        buf = fh.read()
    nl = buf.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing stack header line")
    try:
        meta = dict(kv.split("=", 1) for kv in buf[:nl].decode("ascii").split())
        n = int(meta["N_s"])
        meta = {"N_s": n, "P_a": float(meta["P_a"]), "max_disp": float(meta["max_disp"])}
    except (KeyError, ValueError, UnicodeDecodeError):
        raise FormatError(f"{path}: malformed stack header") from None
    levels, off = [], nl + 1
    for _ in range(n):
        lv, off = decode_mnrt(buf, name=str(path), offset=off)
        levels.append(lv)
    if off != len(buf):
        raise FormatError(f"{path}: trailing bytes after {n} stack levels")
    return levels, meta


@contextmanager
def atomic_outputs():
    """Collect output files and publish them together on success.

    ``tmp(path)`` returns a temporary sibling path to write into. Nothing is
    renamed into place unless the block exits cleanly; on error every
    temporary file is removed, so callers never leave partial artifacts.
    """
    pending = []

    def tmp(path):
        path = os.fspath(path)
        d = os.path.dirname(os.path.abspath(path))
        fd, t = tempfile.mkstemp(prefix=".tmp-", dir=d)
        os.close(fd)
        pending.append((t, path))
        return t

    try:
        yield tmp
    except BaseException:
        for t, _ in pending:
            if os.path.exists(t):
                os.unlink(t)
        raise
    for t, path in pending:
        os.replace(t, path)


def write_bytes_atomic(outputs):
    """Write ``{path: bytes}`` all-or-nothing."""
    with atomic_outputs() as tmp:
        for path, data in outputs.items():
            with open(tmp(path), "wb") as fh:
                fh.write(data)
