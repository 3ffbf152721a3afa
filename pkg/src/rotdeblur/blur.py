"""Forward rotational blur: arc averaging in Cartesian coordinates and the
equivalent circular convolution along the angular axis of a polar raster.

Convention shared by every operator here: the blur spreads one-sided from
angle 0 to +theta, i.e. an output sample averages the input along the arc
swept when rotating its position by -u*theta for u in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .image import CartesianImage, bilinear_plane
from .polar import GeometryError, PolarGeometry, PolarImage

DEFAULT_THETA_MAX = 40.0


@dataclass(frozen=True)
class BlurSpec:
    """Physical blur parameters for one observation."""

    theta_gt: float
    theta_initial: Optional[float] = None
    theta_corrected: Optional[float] = None
    theta_max: float = DEFAULT_THETA_MAX
    center: Tuple[float, float] = (0.5, 0.5)
    n_step: int = 15

    def __post_init__(self):
        if not 0.0 < self.theta_gt <= self.theta_max:
            raise ValueError(
                f"theta_gt {self.theta_gt} outside (0, {self.theta_max}]"
            )
        if self.n_step < 1:
            raise ValueError("n_step must be >= 1")
        if self.theta_initial is not None and not np.isfinite(self.theta_initial):
            raise ValueError("theta_initial must be finite")


@dataclass(frozen=True)
class KernelSpectrum:
    """2D FFT of the polar blur kernel; DC bin equals 1."""

    geometry: PolarGeometry
    values: np.ndarray  # (R, Theta) complex128


def angular_box_kernel(theta_deg: float, angular_samples: int) -> np.ndarray:
    """1D blur kernel along the angular axis, summing to 1.

    A box covering theta degrees spans w = theta * Theta / 360 bins;
    the final bin gets the fractional remainder so continuous angles are
    representable. theta <= one bin (including 0) degenerates to a delta.
    """
    if theta_deg < 0:
        raise ValueError("theta must be >= 0")
    width = theta_deg * angular_samples / 360.0
    if width <= 1.0:
        return np.array([1.0])
    n = int(np.ceil(width - 1e-9))
    taps = np.minimum(np.arange(1, n + 1, dtype=np.float64), width) - np.arange(
        n, dtype=np.float64
    )
    return np.maximum(taps, 0.0) / width


def build_polar_kernel(theta_deg: float, geom: PolarGeometry) -> PolarImage:
    """Kernel raster: the angular box repeated on every radial row."""
    k = angular_box_kernel(theta_deg, geom.angular_samples)
    raster = np.zeros((geom.radial_samples, geom.angular_samples), dtype=np.float64)
    raster[:, : k.size] = k[None, :]
    return PolarImage(geom, raster)


@lru_cache(maxsize=256)
def _spectrum_cached(theta_q: float, r: int, t: int) -> np.ndarray:
    k = angular_box_kernel(theta_q, t)
    raster = np.zeros((r, t), dtype=np.float64)
    raster[0, : k.size] = k
    values = np.fft.fft2(raster)
    values.flags.writeable = False
    return values


def kernel_spectrum(theta_deg: float, geom: PolarGeometry) -> KernelSpectrum:
    """2D FFT of the blur kernel placed at the radial index origin.

    The blur touches only the angular axis, so the spatial kernel is a
    delta in radius times the angular box; its spectrum is the angular
    frequency response replicated across every radial frequency.
    """
    if theta_deg < 0:
        raise ValueError("theta must be >= 0")
    values = _spectrum_cached(
        round(float(theta_deg), 6), geom.radial_samples, geom.angular_samples
    )
    return KernelSpectrum(geom, values)


def blur_polar(pimg: PolarImage, theta_deg: float) -> PolarImage:
    """Circular convolution of each radial row with the angular box kernel."""
    if theta_deg < 0:
        raise ValueError("theta must be >= 0")
    k = angular_box_kernel(theta_deg, pimg.geometry.angular_samples)
    out = np.zeros_like(pimg.data)
    for tap, weight in enumerate(k):
        out += weight * np.roll(pimg.data, tap, axis=1)
    return PolarImage(pimg.geometry, out)


def blur_cartesian(img: CartesianImage, spec: BlurSpec) -> CartesianImage:
    """Arc-averaging rotational blur about the spec's center.

    Each output pixel is the mean of n_step bilinear samples of the input
    taken along the pixel's rotational arc of length theta_gt. Samples
    rotating outside the frame read as zero, so a little energy is lost at
    the rim only.
    """
    h, w = img.height, img.width
    cx = spec.center[0] * (w - 1)
    cy = spec.center[1] * (h - 1)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xx - cx
    dy = yy - cy
    if spec.n_step == 1:
        fractions = [0.0]
    else:
        fractions = [i / (spec.n_step - 1) for i in range(spec.n_step)]
    out = np.zeros_like(img.data)
    for u in fractions:
        ang = -np.deg2rad(u * spec.theta_gt)
        c, s = np.cos(ang), np.sin(ang)
        xs = cx + c * dx - s * dy
        ys = cy + s * dx + c * dy
        for ch in range(img.channels):
            out[:, :, ch] += bilinear_plane(img.data[:, :, ch], xs, ys)
    out /= len(fractions)
    return CartesianImage(out)


def check_same_geometry(a: PolarGeometry, b: PolarGeometry) -> None:
    if a != b:
        raise GeometryError(f"geometry mismatch: {a} vs {b}")
