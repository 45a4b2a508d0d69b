"""Pinhole projection, vanishing points, and ray/angle machinery.

Image coordinates follow the raster convention: origin at the top-left
pixel center, x to the right, y down, units of pixels. Angles are measured
from the +x axis toward +y. Everything here is a pure function on
immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import BadCountError, BadStepError, NonPositiveDepthError

TWO_PI = 2.0 * math.pi

#: |dz| at or below this counts as parallel to the sensor plane.
PARALLEL_EPS = 1e-6

#: Ray/rect intersections shorter than this count as a miss.
MIN_RAY_SPAN = 1e-12


class Vec2(NamedTuple):
    x: float
    y: float


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class ClipInterval(NamedTuple):
    """Forward-ray parameter interval [k0, k1] inside a rectangle."""

    k0: float
    k1: float


class RaySample(NamedTuple):
    """One quadrature node on a clipped ray: position, parameter, weight."""

    point: Vec2
    k: float
    weight: float


class VPSource(Enum):
    GROUND_TRUTH = "ground_truth"
    ESTIMATED = "estimated"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class Direction3:
    """World-space direction, stored normalized to unit length."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        n = math.sqrt(self.dx * self.dx + self.dy * self.dy + self.dz * self.dz)
        if not n > 0.0 or not math.isfinite(n):
            raise ValueError("direction must have positive finite norm")
        object.__setattr__(self, "dx", float(self.dx / n))
        object.__setattr__(self, "dy", float(self.dy / n))
        object.__setattr__(self, "dz", float(self.dz / n))


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: focal length and principal point in pixels."""

    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not self.f > 0.0:
            raise ValueError("focal length must be positive")
        if self.width < 2 or self.height < 2:
            raise ValueError("image must be at least 2x2 pixels")

    def image_rect(self) -> "ImageRect":
        """Closed rectangle spanned by the pixel centers."""
        return ImageRect(0.0, 0.0, float(self.width - 1), float(self.height - 1))


@dataclass(frozen=True)
class ImageRect:
    """Axis-aligned rectangle in image coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("rectangle must have positive extent")

    def contains(self, p: Vec2, tol: float = 0.0) -> bool:
        return (self.x0 - tol <= p.x <= self.x1 + tol
                and self.y0 - tol <= p.y <= self.y1 + tol)

    def corners(self) -> tuple[Vec2, Vec2, Vec2, Vec2]:
        return (Vec2(self.x0, self.y0), Vec2(self.x1, self.y0),
                Vec2(self.x1, self.y1), Vec2(self.x0, self.y1))


@dataclass(frozen=True)
class VanishingPoint:
    """Finite image-plane convergence point of a parallel-line pencil."""

    position: Vec2
    source: VPSource = VPSource.SYNTHETIC
    residual: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.position.x) and math.isfinite(self.position.y)):
            raise ValueError("vanishing point must be finite; use InfiniteVP instead")
        if self.residual < 0.0:
            raise ValueError("residual must be non-negative")


@dataclass(frozen=True)
class InfiniteVP:
    """Sensor-parallel pencil: image lines stay parallel in direction2d."""

    direction2d: Vec2

    def __post_init__(self):
        n = math.hypot(self.direction2d.x, self.direction2d.y)
        if not n > 0.0 or not math.isfinite(n):
            raise ValueError("direction must have positive finite norm")
        object.__setattr__(self, "direction2d", Vec2(self.direction2d.x / n,
                                                     self.direction2d.y / n))


#: Two vanishing points closer than this are considered duplicates.
MIN_VP_SEPARATION = 1e-6


@dataclass(frozen=True)
class VanishingPointSet:
    """Ordered collection of distinct finite vanishing points."""

    points: tuple[VanishingPoint, ...]

    def __init__(self, points):
        pts = tuple(points)
        for p in pts:
            if not isinstance(p, VanishingPoint):
                raise TypeError(f"expected VanishingPoint, got {type(p).__name__}"
                                " (InfiniteVP pencils cannot join the set)")
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = math.hypot(pts[i].position.x - pts[j].position.x,
                               pts[i].position.y - pts[j].position.y)
                if d < MIN_VP_SEPARATION:
                    raise ValueError(f"vanishing points {i} and {j} coincide")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]


@dataclass(frozen=True)
class AngleRange:
    """Angular extent [phi_min, phi_max] of ray directions swept from a VP."""

    phi_min: float
    phi_max: float
    full_circle: bool = False

    def __post_init__(self):
        if self.full_circle:
            if self.phi_min != 0.0 or self.phi_max != TWO_PI:
                raise ValueError("full circle range is fixed to (0, 2*pi)")
        else:
            span = self.phi_max - self.phi_min
            if not 0.0 < span <= math.pi + 1e-9:
                raise ValueError("arc must have width in (0, pi]")

    @classmethod
    def full(cls) -> "AngleRange":
        return cls(0.0, TWO_PI, True)


def project_point(camera: Camera, p: Point3) -> Vec2:
    """Project a 3-D point through the pinhole onto the image plane.

    Raises NonPositiveDepthError when the point is at or behind the camera.
    """
    if p.z <= 0.0:
        raise NonPositiveDepthError(f"point depth {p.z} is not positive")
    return Vec2(camera.cx + camera.f * p.x / p.z,
                camera.cy + camera.f * p.y / p.z)


def vanishing_point_of_direction(camera: Camera, d: Direction3) -> VanishingPoint | InfiniteVP:
    """Limit point of a pencil of 3-D lines sharing direction d.

    Pencils parallel to the sensor (|dz| <= PARALLEL_EPS) have no finite
    limit and come back as InfiniteVP carrying the shared image direction.
    """
    if abs(d.dz) <= PARALLEL_EPS:
        return InfiniteVP(Vec2(d.dx, d.dy))
    return VanishingPoint(Vec2(camera.cx + camera.f * d.dx / d.dz,
                               camera.cy + camera.f * d.dy / d.dz),
                          source=VPSource.SYNTHETIC)


def image_angle_range(v: VanishingPoint, rect: ImageRect) -> AngleRange:
    """Angular extent of the image rectangle as seen from a vanishing point.

    A VP inside (or on the boundary of) the rectangle sees every direction,
    so the sweep is the full circle. An exterior VP gets the minimal
    circular arc covering the directions to all four corners, unwrapped so
    phi_min < phi_max; the arc never exceeds pi because the rectangle is
    convex.
    """
    p = v.position
    if rect.contains(p):
        return AngleRange.full()
    angles = sorted(math.atan2(c.y - p.y, c.x - p.x) for c in rect.corners())
    # the widest gap between successive corner angles is the excluded
    # region; its complement is the minimal covering arc
    best_gap = -1.0
    best_i = 0
    for i in range(4):
        nxt = angles[(i + 1) % 4] + (TWO_PI if i == 3 else 0.0)
        gap = nxt - angles[i]
        if gap > best_gap:
            best_gap = gap
            best_i = i
    phi_min = angles[(best_i + 1) % 4]
    return AngleRange(phi_min, phi_min + (TWO_PI - best_gap), False)


def angle_fan(rng: AngleRange, n: int) -> list[float]:
    """n equally spaced ray angles over an AngleRange.

    Arcs include both endpoints; the full circle excludes the duplicate
    2*pi ray.
    """
    if n < 2:
        raise BadCountError(f"need at least 2 angles, got {n}")
    if rng.full_circle:
        return [TWO_PI * i / n for i in range(n)]
    span = rng.phi_max - rng.phi_min
    return [rng.phi_min + span * (i / (n - 1)) for i in range(n)]


def perp_vector(phi: float) -> Vec2:
    """Unit vector perpendicular to the ray direction (cos phi, sin phi).

    The sign is the +90 degree rotation; consumers must be invariant to it.
    """
    return Vec2(-math.sin(phi), math.cos(phi))


def clip_ray_to_rect(v: VanishingPoint, phi: float, rect: ImageRect) -> ClipInterval | None:
    """Forward-ray parameter interval of l(k) = v + k*(cos phi, sin phi)
    inside rect, clamped to k >= 0; None when the ray misses the rectangle
    or grazes it in a single point."""
    dx, dy = math.cos(phi), math.sin(phi)
    k0, k1 = 0.0, math.inf
    for o, d, lo, hi in ((v.position.x, dx, rect.x0, rect.x1),
                         (v.position.y, dy, rect.y0, rect.y1)):
        if d == 0.0:
            if o < lo or o > hi:
                return None
        else:
            a = (lo - o) / d
            b = (hi - o) / d
            if a > b:
                a, b = b, a
            if a > k0:
                k0 = a
            if b < k1:
                k1 = b
    if not k1 - k0 > MIN_RAY_SPAN:
        return None
    return ClipInterval(k0, k1)


def ray_sample_ks(clip: ClipInterval, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights over a clip interval.

    Nodes sit at k0, k0+step, ... with weight step each; if the progression
    stops short of k1 a terminal node at k1 carries the remainder.
    """
    if step <= 0.0:
        raise BadStepError(f"step must be positive, got {step}")
    k0, k1 = clip
    m = int((k1 - k0) / step + 1e-12)
    ks = k0 + step * np.arange(m + 1)
    weights = np.full(m + 1, step)
    rem = k1 - ks[-1]
    if rem > 1e-9:
        ks = np.append(ks, k1)
        weights = np.append(weights, rem)
    return ks, weights


def ray_sample_points(v: VanishingPoint, phi: float, rect: ImageRect,
                      ks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample positions along a ray, clamped into the closed rectangle."""
    xs = np.clip(v.position.x + ks * math.cos(phi), rect.x0, rect.x1)
    ys = np.clip(v.position.y + ks * math.sin(phi), rect.y0, rect.y1)
    return xs, ys


def line_pixels(v: VanishingPoint, phi: float, rect: ImageRect, step: float) -> list[RaySample]:
    """Quadrature samples of the ray from v at angle phi across rect.

    Empty on a miss. Every sample lies inside the closed rectangle and
    carries a positive weight.
    """
    if step <= 0.0:
        raise BadStepError(f"step must be positive, got {step}")
    clip = clip_ray_to_rect(v, phi, rect)
    if clip is None:
        return []
    ks, weights = ray_sample_ks(clip, step)
    xs, ys = ray_sample_points(v, phi, rect, ks)
    return [RaySample(Vec2(float(x), float(y)), float(k), float(w))
            for x, y, k, w in zip(xs, ys, ks, weights)]
