"""Grayscale image validation, PGM/PNG input and output, raw matrix files.

Images are plain 2D uint8 numpy arrays (rows = height). ``check_gray_image``
is the single validation gate used by every operation that consumes one.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError, DimensionError, DomainError
from .seeding import philox, stable_hash64

MIN_DIM = 16  # filter support must fit after mirror padding

RAW_MAGIC = b"NNIDCST1"
_PGM_HEADER = re.compile(rb"^P5\s+(\d+)\s+(\d+)\s+(\d+)\s", re.S)


def check_gray_image(pixels: np.ndarray) -> np.ndarray:
    """Validate an 8-bit grayscale image and return it as a uint8 array."""
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2D grayscale array, got shape {arr.shape}")
    if arr.shape[0] < MIN_DIM or arr.shape[1] < MIN_DIM:
        raise DimensionError(
            f"image {arr.shape[1]}x{arr.shape[0]} is smaller than the "
            f"{MIN_DIM}x{MIN_DIM} minimum"
        )
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise DomainError(f"pixel dtype {arr.dtype} is not an integer type")
        if arr.min() < 0 or arr.max() > 255:
            raise DomainError("pixel intensities outside [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def read_image(path: str | Path) -> np.ndarray:
    """Read an 8-bit grayscale PGM (P5) or PNG file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such image file: {path}")
    data = path.read_bytes()
    if data[:2] == b"P5":
        return _parse_pgm(data, path)
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise DataError(f"{path}: mode {im.mode!r} is not 8-bit grayscale")
            arr = np.asarray(im, dtype=np.uint8)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from exc
    return check_gray_image(arr)


def _parse_pgm(data: bytes, path: Path) -> np.ndarray:
    # Minimal P5 reader: single whitespace-separated header, no comments.
    m = _PGM_HEADER.match(data)
    if not m:
        raise DataError(f"{path}: malformed PGM header")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise DataError(f"{path}: PGM maxval {maxval} is not 8-bit")
    raster = data[m.end() : m.end() + width * height]
    if len(raster) != width * height:
        raise DataError(f"{path}: truncated PGM raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return check_gray_image(arr)


def write_image(path: str | Path, pixels: np.ndarray) -> None:
    """Write a grayscale image as PGM (default) or PNG by extension.

    PGM output is byte-deterministic: fixed header layout, raw raster.
    """
    arr = check_gray_image(pixels)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".png":
        Image.fromarray(arr, mode="L").save(path, format="PNG")
        return
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


def save_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Write a 2D float matrix: 16-byte header, then row-major f32 LE.

    Header: magic ``NNIDCST1`` + width and height as 32-bit LE unsigned.
    """
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2D matrix, got shape {arr.shape}")
    h, w = arr.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(np.array([w, h], dtype="<u4").tobytes())
        fh.write(arr.astype("<f4").tobytes())


def load_matrix(path: str | Path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix` back as float64."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    data = path.read_bytes()
    if len(data) < 16 or data[:8] != RAW_MAGIC:
        raise DataError(f"{path}: bad magic, not a raw matrix file")
    w, h = np.frombuffer(data[8:16], dtype="<u4")
    expected = 16 + 4 * int(w) * int(h)
    if len(data) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(data)}")
    raster = np.frombuffer(data[16:], dtype="<f4").reshape(int(h), int(w))
    return raster.astype(np.float64)


def generate_synthetic_corpus(
    out_dir: str | Path,
    count: int = 10,
    height: int = 2048,
    width: int = 3072,
    seed: int = 0,
) -> list[Path]:
    """Write a deterministic corpus of synthetic mother images.

    Each image mixes a smooth oriented gradient with band-limited noise so
    that cost maps show both homogeneous and textured regions. Files are
    named ``mother_00.pgm`` ... and returned in name order.
    """
    from scipy.ndimage import gaussian_filter

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    for i in range(count):
        rng = philox(stable_hash64(seed, "synthetic-mother", i))
        theta = rng.uniform(0.0, np.pi)
        span = rng.uniform(60.0, 160.0)
        ramp = (np.cos(theta) * xx + np.sin(theta) * yy) / max(height, width)
        base = 128.0 + span * (ramp - ramp.mean())
        noise = rng.standard_normal((height, width))
        sigma_n = rng.uniform(1.0, 6.0)
        texture = gaussian_filter(noise, sigma_n)
        texture *= rng.uniform(10.0, 45.0) / max(texture.std(), 1e-12)
        # gate the texture so parts of the image stay smooth
        gate = gaussian_filter(rng.standard_normal((height, width)), 64.0)
        gate = (gate - gate.min()) / max(np.ptp(gate), 1e-12)
        img = np.clip(base + texture * gate, 0.0, 255.0)
        img = np.rint(img).astype(np.uint8)
        path = out / f"mother_{i:02d}.pgm"
        write_image(path, img)
        paths.append(path)
    return paths
