"""Grayscale images: PGM (and optional PNG) I/O, noise, synthetic scenes.

An image is a 2-D float64 ndarray of shape (height, width) with every
sample in [0, 1]. Files are 8-bit; everything in memory stays double.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAXVAL = 255
_WHITESPACE = b" \t\n\r\v\f"


class ImageFormatError(ValueError):
    """A file could not be parsed as a supported grayscale image."""

    def __init__(self, path, message, offset=None):
        self.path = str(path)
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{path}: {message}{where}")


def check_image(img):
    """Validate and return ``img`` as a float64 array; raise ValueError otherwise."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"intensities must lie in [0, 1], got [{arr.min()}, {arr.max()}]")
    return arr


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if int(self.seed) < 0:
            raise ValueError(f"seed must be unsigned, got {self.seed}")


SYNTH_KINDS = ("step", "disk", "blob")


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    width: int
    height: int
    low: float = 0.2
    high: float = 0.8

    def __post_init__(self):
        if self.kind not in SYNTH_KINDS:
            raise ValueError(f"kind must be one of {SYNTH_KINDS}, got {self.kind!r}")
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be >= 1")
        if not 0.0 <= self.low < self.high <= 1.0:
            raise ValueError(f"need 0 <= low < high <= 1, got low={self.low} high={self.high}")


# -- PGM ----------------------------------------------------------------------

def _read_token(data, pos, path):
    """Return (token, next_pos); skips whitespace and '#' comments."""
    n = len(data)
    while pos < n:
        ch = data[pos]
        if ch == ord("#"):
            while pos < n and data[pos] not in b"\n\r":
                pos += 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
        pos += 1
    if start == pos:
        raise ImageFormatError(path, "malformed header: unexpected end of file", start)
    return data[start:pos], pos


def _header_int(data, pos, path, what):
    tok, nxt = _read_token(data, pos, path)
    try:
        value = int(tok)
    except ValueError:
        raise ImageFormatError(path, f"malformed header: bad {what} {tok!r}", pos) from None
    return value, nxt


def parse_pgm(data, path="<bytes>"):
    """Decode P2 or P5 bytes into a normalized image."""
    if len(data) < 2 or data[:1] != b"P":
        raise ImageFormatError(path, "unsupported format: missing PGM magic", 0)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(path, f"unsupported format {magic.decode('latin-1')!r}", 0)
    pos = 2
    width, pos = _header_int(data, pos, path, "width")
    height, pos = _header_int(data, pos, path, "height")
    maxval, pos = _header_int(data, pos, path, "maxval")
    if width < 1 or height < 1:
        raise ImageFormatError(path, f"malformed header: size {width}x{height}", pos)
    if maxval != MAXVAL:
        raise ImageFormatError(path, f"unsupported maxval {maxval} (only 255)", pos)
    count = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates maxval from the raster
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise ImageFormatError(path, "malformed header: no separator before raster", pos)
        pos += 1
        raster = data[pos:pos + count]
        if len(raster) < count:
            raise ImageFormatError(
                path, f"truncated pixel data ({len(raster)} of {count} bytes)", pos + len(raster))
        samples = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    else:
        fields = data[pos:].split()
        if len(fields) < count:
            raise ImageFormatError(path, f"truncated pixel data ({len(fields)} of {count} samples)", len(data))
        try:
            samples = np.array([int(f) for f in fields[:count]], dtype=np.float64)
        except ValueError:
            raise ImageFormatError(path, "malformed ASCII sample", pos) from None
        if samples.min() < 0 or samples.max() > maxval:
            raise ImageFormatError(path, "sample exceeds maxval", pos)
    return (samples / maxval).reshape(height, width)


def quantize(img):
    """Map [0,1] intensities to uint8 with round-half-away-from-zero."""
    scaled = np.floor(np.asarray(img, dtype=np.float64) * MAXVAL + 0.5)
    return np.clip(scaled, 0, MAXVAL).astype(np.uint8)


def encode_pgm(img):
    img = np.asarray(img)
    h, w = img.shape
    return b"P5\n%d %d\n%d\n" % (w, h, MAXVAL) + quantize(img).tobytes()


def _is_png(path):
    return Path(path).suffix.lower() == ".png"


def load_image(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path}: no such file")
    if _is_png(path):
        return _load_png(path)
    return parse_pgm(path.read_bytes(), path)


def save_image(img, path):
    img = check_image(img)
    path = Path(path)
    if _is_png(path):
        _save_png(img, path)
    else:
        path.write_bytes(encode_pgm(img))


def _load_png(path):
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover
        raise ImageFormatError(path, "PNG support needs Pillow") from None
    with Image.open(path) as im:
        if im.mode != "L":
            raise ImageFormatError(path, f"unsupported PNG mode {im.mode!r} (need 8-bit grayscale)")
        return np.asarray(im, dtype=np.float64) / MAXVAL


def _save_png(img, path):
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover
        raise ImageFormatError(path, "PNG support needs Pillow") from None
    Image.fromarray(quantize(img), mode="L").save(path)


# -- noise & synthetic scenes ---------------------------------------------------

def add_gaussian_noise(img, spec):
    """Return clamp(img + N(0, sigma^2)), drawn from numpy's PCG64 seeded by ``spec.seed``.

    Clamping biases the noise slightly near 0 and 1; negligible for sigma <= 0.2
    on mid-range intensities.
    """
    img = check_image(img)
    if spec.sigma == 0:
        return img.copy()
    rng = np.random.Generator(np.random.PCG64(int(spec.seed)))
    noise = rng.standard_normal(img.shape) * spec.sigma
    return np.clip(img + noise, 0.0, 1.0)


# Blob geometry, as fractions of (width, height) for centres and of
# min(width, height) for radii: a palm disk plus an overlapping thumb disk.
BLOB_DISKS = (
    ((0.45, 0.58), 0.24),
    ((0.64, 0.36), 0.15),
)


def _disk_mask(h, w, cx, cy, radius):
    yy, xx = np.mgrid[0:h, 0:w]
    return (xx - cx) ** 2 + (yy - cy) ** 2 < radius ** 2


def make_synthetic(spec):
    h, w = spec.height, spec.width
    img = np.full((h, w), spec.low, dtype=np.float64)
    if spec.kind == "step":
        img[:, (w + 1) // 2:] = spec.high
    elif spec.kind == "disk":
        radius = min(w, h) // 4
        img[_disk_mask(h, w, (w - 1) / 2, (h - 1) / 2, radius)] = spec.high
    else:
        m = min(w, h)
        mask = np.zeros((h, w), dtype=bool)
        for (fx, fy), fr in BLOB_DISKS:
            mask |= _disk_mask(h, w, fx * (w - 1), fy * (h - 1), fr * m)
        img[mask] = spec.high
    return img
