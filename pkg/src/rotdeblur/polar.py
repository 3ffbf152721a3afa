"""Cartesian <-> polar resampling and the circular evaluation mask.

Rotational blur is spatially variant in Cartesian coordinates but reduces
to a 1D circular convolution along the angular axis of a polar raster, so
every learned/inverted stage of the pipeline operates on polar buffers.

Conventions: angular zero points along +x, angle increases with the +y
axis (row index), and the angular axis is periodic with period Theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import CartesianImage, bilinear_plane


class GeometryError(ValueError):
    """Raised for degenerate polar grids or mismatched geometries."""


@dataclass(frozen=True)
class PolarGeometry:
    """Polar grid: center in normalized image coords, R x Theta samples."""

    cx: float = 0.5
    cy: float = 0.5
    radial_samples: int = 160
    angular_samples: int = 720
    max_radius: float = 160.0

    def __post_init__(self):
        if self.radial_samples < 2 or self.angular_samples < 8:
            raise GeometryError(
                f"degenerate grid {self.radial_samples}x{self.angular_samples}"
            )
        if self.max_radius <= 0:
            raise GeometryError("max_radius must be positive")

    def to_json(self) -> dict:
        return {
            "cx": self.cx,
            "cy": self.cy,
            "radial_samples": self.radial_samples,
            "angular_samples": self.angular_samples,
            "max_radius": self.max_radius,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PolarGeometry":
        return cls(
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            radial_samples=int(d["radial_samples"]),
            angular_samples=int(d["angular_samples"]),
            max_radius=float(d["max_radius"]),
        )


def default_geometry(height: int, width: int) -> PolarGeometry:
    """Grid with ~0.5 deg angular bins at 320x320, scaled to the image.

    320x320 -> R=160, Theta=720, max_radius=160.
    """
    side = min(height, width)
    return PolarGeometry(
        cx=0.5,
        cy=0.5,
        radial_samples=max(2, side // 2),
        angular_samples=max(8, int(round(2.25 * side))),
        max_radius=side / 2.0,
    )


@dataclass(frozen=True)
class PolarImage:
    """An (R, Theta, C) float raster over (radius, angle)."""

    geometry: PolarGeometry
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        expect = (self.geometry.radial_samples, self.geometry.angular_samples)
        if arr.ndim != 3 or arr.shape[:2] != expect:
            raise GeometryError(
                f"data shape {arr.shape} does not match grid {expect}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("polar image contains non-finite samples")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def cpt(img: CartesianImage, geom: PolarGeometry) -> PolarImage:
    """Cartesian-to-polar transform by bilinear resampling.

    Row i holds radius rho_i = i * max_radius / (R - 1); column j holds
    angle phi_j = 2*pi*j / Theta. Samples falling outside the source image
    are zero.
    """
    r, t = geom.radial_samples, geom.angular_samples
    rho = np.arange(r, dtype=np.float64) * (geom.max_radius / (r - 1))
    phi = 2.0 * np.pi * np.arange(t, dtype=np.float64) / t
    cx = geom.cx * (img.width - 1)
    cy = geom.cy * (img.height - 1)
    xs = cx + rho[:, None] * np.cos(phi)[None, :]
    ys = cy + rho[:, None] * np.sin(phi)[None, :]
    out = np.empty((r, t, img.channels), dtype=np.float64)
    for c in range(img.channels):
        out[:, :, c] = bilinear_plane(img.data[:, :, c], xs, ys)
    return PolarImage(geom, out)


def pct(pimg: PolarImage, out_h: int, out_w: int) -> CartesianImage:
    """Polar-to-Cartesian transform; pixels beyond max_radius are zero.

    Sampling on the polar grid is bilinear with wraparound along the
    angular axis.
    """
    geom = pimg.geometry
    r, t = geom.radial_samples, geom.angular_samples
    yy, xx = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    dx = xx - geom.cx * (out_w - 1)
    dy = yy - geom.cy * (out_h - 1)
    dist = np.hypot(dx, dy)
    rr = dist * ((r - 1) / geom.max_radius)
    aa = np.mod(np.arctan2(dy, dx) * (t / (2.0 * np.pi)), t)
    r0 = np.floor(rr).astype(np.intp)
    r0 = np.clip(r0, 0, r - 1)
    r1 = np.minimum(r0 + 1, r - 1)
    fr = np.clip(rr - r0, 0.0, 1.0)
    a0 = np.floor(aa).astype(np.intp) % t
    a1 = (a0 + 1) % t
    fa = aa - np.floor(aa)
    out = np.empty((out_h, out_w, pimg.channels), dtype=np.float64)
    for c in range(pimg.channels):
        p = pimg.data[:, :, c]
        val = (
            p[r0, a0] * (1.0 - fr) * (1.0 - fa)
            + p[r0, a1] * (1.0 - fr) * fa
            + p[r1, a0] * fr * (1.0 - fa)
            + p[r1, a1] * fr * fa
        )
        out[:, :, c] = np.where(dist <= geom.max_radius, val, 0.0)
    return CartesianImage(out)


def roi_mask(h: int, w: int) -> np.ndarray:
    """Boolean mask of the largest circle inscribed in an h x w frame."""
    if h < 1 or w < 1:
        raise ValueError("mask dimensions must be >= 1")
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    rad = min(h, w) / 2.0
    return (xx - (w - 1) / 2.0) ** 2 + (yy - (h - 1) / 2.0) ** 2 <= rad * rad
