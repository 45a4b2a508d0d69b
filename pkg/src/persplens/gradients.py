"""Image container, luma conversion, Sobel gradient fields, bilinear sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BadChannelsError, ImageTooSmallError, OutOfBoundsError
from .geometry import Vec2

#: Rec. 709 luma weights.
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)

#: Positions this far outside the pixel-center rectangle still sample.
SAMPLE_TOL = 1e-9


@dataclass(frozen=True)
class Image:
    """Dense raster of finite scalars, (h, w) or (h, w, 3) float64 data."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise BadChannelsError(f"channels must be 1 or 3, got {self.channels}")
        expected = ((self.height, self.width) if self.channels == 1
                    else (self.height, self.width, 3))
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.shape != expected:
            raise ValueError(f"data shape {arr.shape} does not match {expected}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data must be finite")
        if arr is self.data and arr.flags.writeable:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "Image":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim == 2:
            h, w = arr.shape
            return cls(w, h, 1, arr)
        if arr.ndim == 3 and arr.shape[2] == 3:
            h, w, _ = arr.shape
            return cls(w, h, 3, arr)
        raise BadChannelsError(f"cannot build an image from shape {arr.shape}")


@dataclass(frozen=True)
class GradientField:
    """Per-pixel image-derivative planes, immutable after construction."""

    width: int
    height: int
    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        for name in ("gx", "gy"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.height, self.width):
                raise ValueError(f"{name} shape {arr.shape} does not match "
                                 f"({self.height}, {self.width})")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            if arr is getattr(self, name) and arr.flags.writeable:
                arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def to_luma(img: Image) -> Image:
    """Collapse an image to one channel (Rec. 709 weights for RGB)."""
    if img.channels == 1:
        return img
    if img.channels == 3:
        r, g, b = LUMA_WEIGHTS
        luma = r * img.data[:, :, 0] + g * img.data[:, :, 1] + b * img.data[:, :, 2]
        return Image(img.width, img.height, 1, luma)
    raise BadChannelsError(f"cannot convert {img.channels}-channel image")


def luma_adjoint(dluma: np.ndarray, channels: int) -> np.ndarray:
    """Adjoint of to_luma: spread a 1-plane gradient back over channels."""
    if channels == 1:
        return dluma
    return dluma[:, :, None] * np.asarray(LUMA_WEIGHTS)


def sobel(img: Image) -> GradientField:
    """3x3 Sobel gradient field of a 1-channel image.

    Horizontal derivative from [[-1,0,1],[-2,0,2],[-1,0,1]], vertical from
    its transpose; borders replicate-padded, no normalization factor.
    """
    if img.channels != 1:
        raise BadChannelsError("gradient field needs a 1-channel image")
    if img.width < 3 or img.height < 3:
        raise ImageTooSmallError(
            f"{img.width}x{img.height} image is smaller than the 3x3 stencil")
    gx, gy = kernels.sobel_planes(np.ascontiguousarray(img.data))
    return GradientField(img.width, img.height, gx, gy)


def sample_gradient(field: GradientField, p: Vec2) -> Vec2:
    """Bilinear interpolation of (gx, gy) at a fractional position.

    p must lie within the closed pixel-center rectangle up to SAMPLE_TOL.
    """
    if not (-SAMPLE_TOL <= p.x <= field.width - 1 + SAMPLE_TOL
            and -SAMPLE_TOL <= p.y <= field.height - 1 + SAMPLE_TOL):
        raise OutOfBoundsError(f"{p} outside [0, {field.width - 1}] x "
                               f"[0, {field.height - 1}]")
    xs = np.array([min(max(p.x, 0.0), float(field.width - 1))])
    ys = np.array([min(max(p.y, 0.0), float(field.height - 1))])
    return Vec2(float(kernels.bilinear_gather(field.gx, xs, ys)[0]),
                float(kernels.bilinear_gather(field.gy, xs, ys)[0]))
