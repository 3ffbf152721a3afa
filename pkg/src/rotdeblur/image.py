"""Image buffers, lossless PNG IO, and bilinear sampling.

Images are float rasters in [0, 1] at rest; intermediate pipeline buffers
may range over [-0.25, 1.25] and are clamped back to [0, 1] on export.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as _PILImage
from PIL import UnidentifiedImageError


class RasterError(Exception):
    """Base class for raster IO failures."""


class MissingFileError(RasterError):
    """The requested raster file does not exist."""


class CorruptStreamError(RasterError):
    """The file exists but does not decode as a valid raster."""


class UnsupportedFormatError(RasterError):
    """The raster decodes but its mode/bit depth is not supported."""


@dataclass(frozen=True)
class CartesianImage:
    """An (H, W, C) float raster, C in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W, 1|3) data, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite samples")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def load_raster(path) -> CartesianImage:
    """Load an 8- or 16-bit PNG, scaled to [0, 1]. Alpha is dropped."""
    try:
        with _PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "RGBA":
                im = im.convert("RGB")
                mode = "RGB"
            elif mode == "LA":
                im = im.convert("L")
                mode = "L"
            elif mode == "P":
                im = im.convert("RGB")
                mode = "RGB"
            if mode in ("L", "RGB"):
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            else:
                raise UnsupportedFormatError(f"unsupported raster mode {mode!r}")
    except FileNotFoundError as exc:
        raise MissingFileError(str(path)) from exc
    except UnidentifiedImageError as exc:
        raise CorruptStreamError(str(path)) from exc
    except OSError as exc:
        raise CorruptStreamError(f"{path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return CartesianImage(arr)


def save_raster(img: CartesianImage, path) -> None:
    """Write an 8-bit PNG; samples are clamped to [0, 1] and quantized."""
    arr = np.clip(img.data, 0.0, 1.0)
    q = np.rint(arr * 255.0).astype(np.uint8)
    if img.channels == 1:
        pil = _PILImage.fromarray(q[:, :, 0], mode="L")
    else:
        pil = _PILImage.fromarray(q, mode="RGB")
    try:
        pil.save(path, format="PNG")
    except OSError as exc:
        raise RasterError(f"cannot write {path}: {exc}") from exc


def bilinear_plane(plane: np.ndarray, xs, ys):
    """Vectorized bilinear sampling of a single (H, W) plane.

    Coordinates outside [0, W-1] x [0, H-1] return 0.0 (zero padding);
    interior coordinates are a convex blend of the 4 surrounding pixels.
    """
    h, w = plane.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    val = (
        plane[y0, x0] * (1.0 - fx) * (1.0 - fy)
        + plane[y0, x1] * fx * (1.0 - fy)
        + plane[y1, x0] * (1.0 - fx) * fy
        + plane[y1, x1] * fx * fy
    )
    return np.where(inside, val, 0.0)


def sample_bilinear(img: CartesianImage, x: float, y: float, ch: int = 0) -> float:
    """Bilinear sample of one channel at a sub-pixel coordinate."""
    return float(bilinear_plane(img.data[:, :, ch], x, y))
