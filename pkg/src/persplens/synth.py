"""Synthetic wireframe scenes with known vanishing points.

Boxes under a shared random rotation give one, two, or three finite
vanishing points; an anti-aliased renderer and controlled
perspective-breaking distortions (bowed lines, family translations)
produce image pairs with a known quality ordering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AllInfiniteError, ParseError, SchemaVersionError
from .geometry import (Camera, Direction3, ImageRect, InfiniteVP, Point3,
                       VanishingPoint, VanishingPointSet, Vec2, VPSource,
                       project_point, vanishing_point_of_direction)
from .gradients import Image
from .vptools import AnnotationSet, Segment2

#: Segments are clipped to this depth before projection.
NEAR_PLANE = 0.1

SCENE_SCHEMA = 1


@dataclass(frozen=True)
class WireframeScene:
    """3-D segments grouped into parallel families, plus a pinhole camera."""

    segments: tuple[tuple[Point3, Point3, int], ...]
    families: tuple[Direction3, ...]
    camera: Camera

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "families", tuple(self.families))
        for p0, p1, fam in self.segments:
            if not 0 <= fam < len(self.families):
                raise ValueError(f"segment references unknown family {fam}")
            if p0.z <= 0.0 or p1.z <= 0.0:
                raise ValueError("segment endpoints must be in front of the camera")
            d = np.array([p1.x - p0.x, p1.y - p0.y, p1.z - p0.z])
            n = np.linalg.norm(d)
            if n == 0.0:
                raise ValueError("zero-length segment")
            d /= n
            f = self.families[fam]
            fv = np.array([f.dx, f.dy, f.dz])
            if min(np.linalg.norm(d - fv), np.linalg.norm(d + fv)) > 1e-9:
                raise ValueError(f"segment not parallel to family {fam}")


@dataclass(frozen=True)
class RenderConfig:
    line_width: float = 1.5
    background: float = 0.0
    foreground: float = 1.0
    supersample: int = 1

    def __post_init__(self):
        if self.line_width <= 0.0:
            raise ValueError("line width must be positive")
        for name in ("background", "foreground"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.supersample < 1:
            raise ValueError("supersample factor must be >= 1")


@dataclass(frozen=True)
class DistortionSpec:
    """Perspective-breaking edits: quadratic bowing and family translation."""

    bow_amplitude: float = 0.0
    vp_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.bow_amplitude < 0.0 or self.vp_jitter < 0.0:
            raise ValueError("distortion magnitudes must be non-negative")


def make_box_scene(camera: Camera, seed: int, n_boxes: int = 1) -> WireframeScene:
    """Randomly rotated cuboids in front of the camera, 3 parallel families.

    Deterministic for a given seed. Placement retries until every corner
    projects inside a 4x-size frame centered on the image, box centers
    project inside the central region, and the wireframe is large enough
    on screen to be useful.
    """
    if n_boxes < 1:
        raise ValueError("need at least one box")
    rng = np.random.default_rng(seed)
    tanx = 0.5 * camera.width / camera.f
    tany = 0.5 * camera.height / camera.f
    half_span = min(tanx, tany)
    margin = _expand_rect(camera.image_rect(), 4.0)
    for _ in range(200):
        rot = _rotation_matrix(rng)
        segments = []
        ok = True
        sq_len = 0.0
        for _ in range(n_boxes):
            z = rng.uniform(3.5, 6.5)
            center = np.array([rng.uniform(-0.55, 0.55) * z * tanx,
                               rng.uniform(-0.55, 0.55) * z * tany,
                               z])
            ext = rng.uniform(0.15, 0.40, size=3) * z * half_span
            axes = [rot[:, k] * ext[k] for k in range(3)]
            corners = [center + sx * axes[0] + sy * axes[1] + sz * axes[2]
                       for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
            if any(c[2] < 0.5 for c in corners):
                ok = False
                break
            proj = [project_point(camera, Point3(*c)) for c in corners]
            if not all(margin.contains(p) for p in proj):
                ok = False
                break
            pc = project_point(camera, Point3(*center))
            if not (abs(pc.x - 0.5 * (camera.width - 1)) <= 0.40 * camera.width
                    and abs(pc.y - 0.5 * (camera.height - 1)) <= 0.40 * camera.height):
                ok = False
                break
            for k in range(3):
                a1 = axes[(k + 1) % 3]
                a2 = axes[(k + 2) % 3]
                for s1 in (-1, 1):
                    for s2 in (-1, 1):
                        off = s1 * a1 + s2 * a2
                        p0 = Point3(*(center - axes[k] + off))
                        p1 = Point3(*(center + axes[k] + off))
                        segments.append((p0, p1, k))
                        q0 = project_point(camera, p0)
                        q1 = project_point(camera, p1)
                        sq_len += (q1.x - q0.x) ** 2 + (q1.y - q0.y) ** 2
        if not ok:
            continue
        if math.sqrt(sq_len / (12 * n_boxes)) < 6.0:
            continue
        families = tuple(Direction3(*rot[:, k]) for k in range(3))
        return WireframeScene(tuple(segments), families, camera)
    raise RuntimeError("could not place boxes; widen the camera or field of view")


def _rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (normalized Gaussian quaternion)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _expand_rect(rect: ImageRect, factor: float) -> ImageRect:
    cx = 0.5 * (rect.x0 + rect.x1)
    cy = 0.5 * (rect.y0 + rect.y1)
    hx = 0.5 * (rect.x1 - rect.x0) * factor
    hy = 0.5 * (rect.y1 - rect.y0) * factor
    return ImageRect(cx - hx, cy - hy, cx + hx, cy + hy)


def ground_truth_vps(scene: WireframeScene
                     ) -> tuple[VanishingPointSet, list[tuple[int, InfiniteVP]]]:
    """Analytic vanishing points of the scene's families, in family order.

    Sensor-parallel families have no finite VP and are returned separately
    as (family index, InfiniteVP) pairs.
    """
    finite = []
    infinite = []
    for idx, d in enumerate(scene.families):
        vp = vanishing_point_of_direction(scene.camera, d)
        if isinstance(vp, InfiniteVP):
            infinite.append((idx, vp))
        else:
            finite.append(VanishingPoint(vp.position, source=VPSource.GROUND_TRUTH))
    if not finite:
        raise AllInfiniteError("every family is parallel to the sensor")
    return VanishingPointSet(finite), infinite


def _clip_to_near_plane(p0: Point3, p1: Point3) -> tuple[Point3, Point3] | None:
    if p0.z < NEAR_PLANE and p1.z < NEAR_PLANE:
        return None
    a, b = np.array(p0), np.array(p1)
    if a[2] < NEAR_PLANE:
        t = (NEAR_PLANE - a[2]) / (b[2] - a[2])
        a = a + t * (b - a)
    elif b[2] < NEAR_PLANE:
        t = (NEAR_PLANE - b[2]) / (a[2] - b[2])
        b = b + t * (a - b)
    return Point3(*a), Point3(*b)


def _draw_aa_segment(canvas: np.ndarray, a: Vec2, b: Vec2, line_width: float,
                     foreground: float, ss: int):
    """Max-composite a tent-falloff line onto the canvas (canvas units)."""
    h, w = canvas.shape
    off = 0.5 * (ss - 1)
    ax, ay = a.x * ss + off, a.y * ss + off
    bx, by = b.x * ss + off, b.y * ss + off
    lw = line_width * ss
    x_lo = max(int(math.floor(min(ax, bx) - lw)), 0)
    x_hi = min(int(math.ceil(max(ax, bx) + lw)), w - 1)
    y_lo = max(int(math.floor(min(ay, by) - lw)), 0)
    y_hi = min(int(math.ceil(max(ay, by) + lw)), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    xs = np.arange(x_lo, x_hi + 1)[None, :] - ax
    ys = np.arange(y_lo, y_hi + 1)[:, None] - ay
    ex, ey = bx - ax, by - ay
    sq = ex * ex + ey * ey
    if sq > 0.0:
        t = np.clip((xs * ex + ys * ey) / sq, 0.0, 1.0)
    else:
        t = 0.0
    dist = np.hypot(xs - t * ex, ys - t * ey)
    vals = foreground * np.maximum(0.0, 1.0 - dist / lw)
    region = canvas[y_lo:y_hi + 1, x_lo:x_hi + 1]
    np.maximum(region, vals, out=region)


def _render(scene: WireframeScene, cfg: RenderConfig, draw) -> Image:
    ss = cfg.supersample
    canvas = np.full((scene.camera.height * ss, scene.camera.width * ss),
                     cfg.background)
    for idx, (p0, p1, fam) in enumerate(scene.segments):
        clipped = _clip_to_near_plane(p0, p1)
        if clipped is None:
            continue
        a = project_point(scene.camera, clipped[0])
        b = project_point(scene.camera, clipped[1])
        draw(canvas, idx, fam, a, b)
    if ss > 1:
        canvas = canvas.reshape(scene.camera.height, ss,
                                scene.camera.width, ss).mean(axis=(1, 3))
    return Image.from_array(np.clip(canvas, 0.0, 1.0))


def render_wireframe(scene: WireframeScene, cfg: RenderConfig = RenderConfig()) -> Image:
    """Project every segment and draw it as an anti-aliased straight line."""

    def draw(canvas, idx, fam, a, b):
        _draw_aa_segment(canvas, a, b, cfg.line_width, cfg.foreground,
                         cfg.supersample)

    return _render(scene, cfg, draw)


def distort_render(scene: WireframeScene, cfg: RenderConfig,
                   spec: DistortionSpec) -> Image:
    """Render with perspective-breaking edits.

    Each projected segment becomes a quadratic curve whose midpoint is
    displaced bow_amplitude pixels off the chord (sign per segment from the
    seeded RNG), and whole families are translated by vp_jitter pixels in a
    seeded random direction. Zero amplitudes reproduce render_wireframe
    bit-exactly; the RNG is consumed identically for any magnitudes so one
    seed gives a consistent distortion pattern across amplitude sweeps.
    """
    rng = np.random.default_rng(spec.seed)
    thetas = rng.uniform(0.0, 2.0 * math.pi, size=len(scene.families))
    signs = 2.0 * rng.integers(0, 2, size=len(scene.segments)) - 1.0

    def draw(canvas, idx, fam, a, b):
        if spec.vp_jitter > 0.0:
            a = Vec2(a.x + spec.vp_jitter * math.cos(thetas[fam]),
                     a.y + spec.vp_jitter * math.sin(thetas[fam]))
            b = Vec2(b.x + spec.vp_jitter * math.cos(thetas[fam]),
                     b.y + spec.vp_jitter * math.sin(thetas[fam]))
        if spec.bow_amplitude == 0.0:
            _draw_aa_segment(canvas, a, b, cfg.line_width, cfg.foreground,
                             cfg.supersample)
            return
        ex, ey = b.x - a.x, b.y - a.y
        chord = math.hypot(ex, ey)
        if chord == 0.0:
            _draw_aa_segment(canvas, a, b, cfg.line_width, cfg.foreground,
                             cfg.supersample)
            return
        nx, ny = -ey / chord, ex / chord
        # quadratic Bezier whose t=0.5 point sits bow_amplitude off the chord
        mx = 0.5 * (a.x + b.x) + 2.0 * spec.bow_amplitude * signs[idx] * nx
        my = 0.5 * (a.y + b.y) + 2.0 * spec.bow_amplitude * signs[idx] * ny
        n_seg = max(8, int(math.ceil(chord / 3.0)))
        ts = np.linspace(0.0, 1.0, n_seg + 1)
        px = (1 - ts) ** 2 * a.x + 2 * ts * (1 - ts) * mx + ts ** 2 * b.x
        py = (1 - ts) ** 2 * a.y + 2 * ts * (1 - ts) * my + ts ** 2 * b.y
        for j in range(n_seg):
            _draw_aa_segment(canvas, Vec2(px[j], py[j]), Vec2(px[j + 1], py[j + 1]),
                             cfg.line_width, cfg.foreground, cfg.supersample)

    return _render(scene, cfg, draw)


def project_scene_segments(scene: WireframeScene) -> list[Segment2]:
    """Exact projections of the 3-D segments, pre-rasterization."""
    out = []
    for p0, p1, fam in scene.segments:
        out.append(Segment2(project_point(scene.camera, p0),
                            project_point(scene.camera, p1), fam))
    return out


def scene_annotations(scene: WireframeScene,
                      max_vp_magnitude: float = 1e6) -> AnnotationSet:
    """Projected segments plus the finite ground-truth VPs, as annotations.

    VPs farther out than max_vp_magnitude are dropped (they behave like
    infinite ones for scoring purposes).
    """
    segments = project_scene_segments(scene)
    vps = []
    fams = []
    for idx, d in enumerate(scene.families):
        vp = vanishing_point_of_direction(scene.camera, d)
        if isinstance(vp, InfiniteVP):
            continue
        if max(abs(vp.position.x), abs(vp.position.y)) > max_vp_magnitude:
            continue
        vps.append(VanishingPoint(vp.position, source=VPSource.GROUND_TRUTH))
        fams.append(idx)
    return AnnotationSet(width=scene.camera.width, height=scene.camera.height,
                         segments=tuple(segments),
                         vps=VanishingPointSet(vps) if vps else None,
                         vp_families=tuple(fams) if vps else None)


def write_scene(scene: WireframeScene, path):
    """Serialize a scene as versioned JSON (schema 1)."""
    doc = {
        "schema": SCENE_SCHEMA,
        "camera": {"f": scene.camera.f, "cx": scene.camera.cx,
                   "cy": scene.camera.cy, "width": scene.camera.width,
                   "height": scene.camera.height},
        "families": [[d.dx, d.dy, d.dz] for d in scene.families],
        "segments": [[p0.x, p0.y, p0.z, p1.x, p1.y, p1.z, fam]
                     for p0, p1, fam in scene.segments],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_scene(path) -> WireframeScene:
    """Load a schema-1 scene JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    schema = doc.get("schema")
    if schema != SCENE_SCHEMA:
        raise SchemaVersionError(f"{path}: unsupported schema {schema!r}")
    for key in ("camera", "families", "segments"):
        if key not in doc:
            raise ParseError(f"{path}: missing {key!r}")
    try:
        cam = doc["camera"]
        camera = Camera(f=float(cam["f"]), cx=float(cam["cx"]), cy=float(cam["cy"]),
                        width=int(cam["width"]), height=int(cam["height"]))
        families = tuple(Direction3(*map(float, d)) for d in doc["families"])
        segments = tuple((Point3(float(s[0]), float(s[1]), float(s[2])),
                          Point3(float(s[3]), float(s[4]), float(s[5])), int(s[6]))
                         for s in doc["segments"])
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ParseError(f"{path}: {e}") from e
    return WireframeScene(segments, families, camera)
