"""On-disk formats: time-series volumes, masks and label maps.

TSV container layout::

    TSV1\\n
    H W T\\n
    f32le\\n
    <H*W*T little-endian float32, ordered [t][row][col]>

Masks and label archives are binary PGM (P5); label renders are binary PPM (P6).
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

TSV_MAGIC = b"TSV1"
TSV_DTYPE = "f32le"


class Label(enum.IntEnum):
    BACKGROUND = 0
    HEALTHY = 1
    TUMOR = 2
    VESSEL = 3


LABEL_COLORS = {
    Label.BACKGROUND: (0, 0, 0),
    Label.HEALTHY: (0, 0, 255),
    Label.TUMOR: (255, 255, 0),
    Label.VESSEL: (0, 255, 0),
}


@dataclass(frozen=True, eq=False)
class TimeSeriesVolume:
    """A single CT slice sampled at ``timepoints`` acquisition times.

    ``data`` has shape ``(timepoints, height, width)`` and holds Hounsfield
    units as float32. ``pixel_spacing_mm`` is carried for reference only and is
    not persisted by the TSV container.
    """

    data: np.ndarray
    pixel_spacing_mm: float | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, order="C")
        if data.ndim != 3:
            raise ValueError(f"volume data must be 3-D (T, H, W), got shape {data.shape}")
        if min(data.shape) < 1:
            raise ValueError(f"volume dimensions must be >= 1, got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("volume contains non-finite intensities")
        if self.pixel_spacing_mm is not None and not self.pixel_spacing_mm > 0:
            raise ValueError("pixel_spacing_mm must be positive")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def timepoints(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def last_frame(self) -> np.ndarray:
        return self.data[-1]

    def __eq__(self, other):
        if not isinstance(other, TimeSeriesVolume):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    __hash__ = None


def save_volume(vol: TimeSeriesVolume, path) -> None:
    t, h, w = vol.data.shape
    header = b"%s\n%d %d %d\n%s\n" % (TSV_MAGIC, h, w, t, TSV_DTYPE.encode())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(vol.data.astype("<f4", copy=False).tobytes(order="C"))


def _split_lines(raw: bytes, n: int) -> tuple[list[bytes], bytes]:
    lines = []
    pos = 0
    for _ in range(n):
        end = raw.find(b"\n", pos)
        if end < 0:
            raise FormatError("truncated TSV header")
        lines.append(raw[pos:end].strip())
        pos = end + 1
    return lines, raw[pos:]


def load_volume(path) -> TimeSeriesVolume:
    with open(path, "rb") as fh:
        raw = fh.read()
    (magic, dims, dtype), payload = _split_lines(raw, 3)
    if not magic.startswith(b"TSV"):
        raise FormatError(f"not a TSV container (magic {magic[:8]!r})")
    if magic != TSV_MAGIC:
        raise FormatError(f"unsupported TSV version {magic.decode(errors='replace')!r}")
    try:
        h, w, t = (int(x) for x in dims.split())
    except ValueError:
        raise FormatError(f"bad TSV dimension line {dims!r}") from None
    if min(h, w, t) < 1:
        raise FormatError(f"TSV dimensions must be >= 1, got {h} {w} {t}")
    if dtype.decode(errors="replace") != TSV_DTYPE:
        raise FormatError(f"unsupported TSV element type {dtype!r}")
    expected = h * w * t * 4
    if len(payload) != expected:
        raise FormatError(
            f"TSV payload size mismatch: header {h}x{w}x{t} needs {expected} bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(t, h, w)
    if not np.isfinite(data).all():
        raise FormatError("TSV payload contains non-finite values")
    return TimeSeriesVolume(data.astype(np.float32))


# -- netpbm ------------------------------------------------------------------

_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _read_netpbm(path, magic: bytes) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != magic:
        raise FormatError(f"{os.fspath(path)}: expected {magic.decode()} netpbm, found magic {raw[:2]!r}")
    pos = 2
    fields = []
    for _ in range(3):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise FormatError(f"{os.fspath(path)}: truncated header")
        fields.append(m.group(1))
        pos = m.end()
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise FormatError(f"{os.fspath(path)}: malformed header {fields!r}") from None
    if width < 1 or height < 1:
        raise FormatError(f"{os.fspath(path)}: bad dimensions {width}x{height}")
    if not 0 < maxval < 256:
        raise FormatError(f"{os.fspath(path)}: only 8-bit maxval supported, got {maxval}")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise FormatError(f"{os.fspath(path)}: missing whitespace after header")
    pos += 1
    channels = 3 if magic == b"P6" else 1
    payload = raw[pos:]
    if len(payload) != width * height * channels:
        raise FormatError(
            f"{os.fspath(path)}: payload has {len(payload)} bytes, expected {width * height * channels}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 3:
        return arr.reshape(height, width, 3).copy()
    return arr.reshape(height, width).copy()


def _write_netpbm(path, magic: bytes, arr: np.ndarray) -> None:
    height, width = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n255\n" % (magic, width, height))
        fh.write(np.ascontiguousarray(arr, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Raw 8-bit P5 pixel values as a ``(H, W)`` uint8 array."""
    return _read_netpbm(path, b"P5")


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, b"P6")


def load_mask(path) -> np.ndarray:
    """Boolean mask; any nonzero pixel is inside."""
    return read_pgm(path) > 0


def save_mask(mask: np.ndarray, path) -> None:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    _write_netpbm(path, b"P5", np.where(mask, 255, 0))


def save_labels(labels: np.ndarray, path) -> None:
    """Lossless label archive: PGM with values 0..3."""
    labels = np.asarray(labels)
    _check_labels(labels)
    _write_netpbm(path, b"P5", labels)


def load_labels(path) -> np.ndarray:
    labels = read_pgm(path)
    if labels.max(initial=0) > max(Label):
        raise FormatError(f"{os.fspath(path)}: label archive holds values outside 0..3")
    return labels


def render_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels)
    _check_labels(labels)
    palette = np.zeros((len(Label), 3), dtype=np.uint8)
    for lab, rgb in LABEL_COLORS.items():
        palette[lab] = rgb
    _write_netpbm(path, b"P6", palette[labels])


def _check_labels(labels: np.ndarray) -> None:
    if labels.ndim != 2:
        raise ValueError("label map must be 2-D")
    if labels.size and (labels.min() < 0 or labels.max() > max(Label)):
        raise ValueError("label values must lie in 0..3")
