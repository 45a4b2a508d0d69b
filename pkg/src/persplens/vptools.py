"""Vanishing-point estimation from annotated line segments and the
parallel-line concurrency check, plus the annotation file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegeneratePencilError, ParseError, SchemaVersionError,
                     TooFewSegmentsError)
from .geometry import (InfiniteVP, VanishingPoint, VanishingPointSet, Vec2,
                       VPSource)

ANNOTATION_SCHEMA = 1

#: Relative eigenvalue ratio below which the normal matrix counts as singular.
SINGULAR_EPS = 1e-12


@dataclass(frozen=True)
class Segment2:
    """2-D line segment tagged with its parallel-family id."""

    p0: Vec2
    p1: Vec2
    family: int

    def __post_init__(self):
        if math.hypot(self.p1.x - self.p0.x, self.p1.y - self.p0.y) <= 1e-6:
            raise ValueError("segment is shorter than 1e-6 px")


@dataclass(frozen=True)
class AnnotationSet:
    """Annotated segments for one image, with optional ground-truth VPs."""

    width: int
    height: int
    segments: tuple[Segment2, ...]
    vps: VanishingPointSet | None = None
    vp_families: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if (self.vps is None) != (self.vp_families is None):
            raise ValueError("vps and vp_families must be given together")
        if self.vps is not None:
            if len(self.vps) != len(self.vp_families):
                raise ValueError("one family id per vanishing point")
            referenced = {s.family for s in self.segments}
            for fam in self.vp_families:
                if fam not in referenced:
                    raise ValueError(f"vp family {fam} has no segments")
            for vp in self.vps:
                if vp.source is not VPSource.GROUND_TRUTH:
                    raise ValueError("declared vanishing points must carry "
                                     "ground-truth provenance")


@dataclass(frozen=True)
class FamilyCheck:
    """Concurrency verdict for one parallel family."""

    family: int
    vp: VanishingPoint | InfiniteVP
    rms_residual: float
    max_residual: float
    passed: bool


@dataclass(frozen=True)
class ConcurrencyReport:
    entries: tuple[FamilyCheck, ...]
    tol: float

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)


def _line_normal(seg: Segment2) -> tuple[float, float, float, float]:
    """Unit normal (nx, ny), offset c = n.p0, and length of a segment's line."""
    tx = seg.p1.x - seg.p0.x
    ty = seg.p1.y - seg.p0.y
    length = math.hypot(tx, ty)
    nx, ny = -ty / length, tx / length
    return nx, ny, nx * seg.p0.x + ny * seg.p0.y, length


def estimate_vp(segments) -> VanishingPoint:
    """Length-weighted least-squares intersection of the segments' lines.

    Minimizes the sum of length * (perpendicular distance)^2 via the 2x2
    normal equations. Raises DegeneratePencilError when the lines are all
    parallel (singular normal matrix): the caller should treat the pencil
    as an InfiniteVP.
    """
    segments = list(segments)
    if len(segments) < 2:
        raise TooFewSegmentsError(f"need at least 2 segments, got {len(segments)}")
    a = np.zeros((2, 2))
    b = np.zeros(2)
    for seg in segments:
        nx, ny, c, length = _line_normal(seg)
        n = np.array([nx, ny])
        a += length * np.outer(n, n)
        b += length * c * n
    eigs = np.linalg.eigvalsh(a)
    if eigs[0] <= SINGULAR_EPS * max(eigs[1], 1.0):
        raise DegeneratePencilError("all lines parallel; no finite intersection")
    p = np.linalg.solve(a, b)
    dists = [abs(nx * p[0] + ny * p[1] - c)
             for nx, ny, c, _ in map(_line_normal, segments)]
    rms = math.sqrt(sum(d * d for d in dists) / len(dists))
    return VanishingPoint(Vec2(float(p[0]), float(p[1])),
                          source=VPSource.ESTIMATED, residual=rms)


def _residuals(vp: VanishingPoint, segments) -> list[float]:
    out = []
    for seg in segments:
        nx, ny, c, _ = _line_normal(seg)
        out.append(abs(nx * vp.position.x + ny * vp.position.y - c))
    return out


def consistency_check(ann: AnnotationSet, tol: float) -> ConcurrencyReport:
    """Verify that each family's lines meet at a single point.

    A family passes when the maximum perpendicular distance from its
    estimated VP to every member line is at most tol. Families whose lines
    are parallel in the image pass as InfiniteVP pencils (legal one-point-
    at-infinity geometry).
    """
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    by_family: dict[int, list[Segment2]] = {}
    for seg in ann.segments:
        by_family.setdefault(seg.family, []).append(seg)
    entries = []
    for fam in sorted(by_family):
        segs = by_family[fam]
        if len(segs) < 2:
            raise TooFewSegmentsError(f"family {fam} has {len(segs)} segment(s)")
        try:
            vp = estimate_vp(segs)
        except DegeneratePencilError:
            tx = segs[0].p1.x - segs[0].p0.x
            ty = segs[0].p1.y - segs[0].p0.y
            if tx < 0.0 or (tx == 0.0 and ty < 0.0):
                tx, ty = -tx, -ty
            entries.append(FamilyCheck(fam, InfiniteVP(Vec2(tx, ty)),
                                       0.0, 0.0, True))
            continue
        dists = _residuals(vp, segs)
        rms = math.sqrt(sum(d * d for d in dists) / len(dists))
        mx = max(dists)
        entries.append(FamilyCheck(fam, vp, rms, mx, mx <= tol))
    return ConcurrencyReport(tuple(entries), tol)


def write_annotations(ann: AnnotationSet, path):
    """Serialize annotations as versioned JSON (schema 1).

    Floats go through repr, which round-trips float64 exactly.
    """
    doc = {
        "schema": ANNOTATION_SCHEMA,
        "width": ann.width,
        "height": ann.height,
        "segments": [{"p0": [s.p0.x, s.p0.y], "p1": [s.p1.x, s.p1.y],
                      "family": s.family} for s in ann.segments],
    }
    if ann.vps is not None:
        doc["vps"] = [{"xy": [vp.position.x, vp.position.y], "family": fam}
                      for vp, fam in zip(ann.vps, ann.vp_families)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_annotations(path) -> AnnotationSet:
    """Load a schema-1 annotation JSON document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    schema = doc.get("schema")
    if schema != ANNOTATION_SCHEMA:
        raise SchemaVersionError(f"{path}: unsupported schema {schema!r}")
    for key in ("width", "height", "segments"):
        if key not in doc:
            raise ParseError(f"{path}: missing {key!r}")
    try:
        segments = tuple(
            Segment2(Vec2(float(s["p0"][0]), float(s["p0"][1])),
                     Vec2(float(s["p1"][0]), float(s["p1"][1])),
                     int(s["family"]))
            for s in doc["segments"])
        vps = None
        fams = None
        if "vps" in doc and doc["vps"]:
            points = []
            fams = []
            for entry in doc["vps"]:
                points.append(VanishingPoint(
                    Vec2(float(entry["xy"][0]), float(entry["xy"][1])),
                    source=VPSource.GROUND_TRUTH))
                fams.append(int(entry["family"]))
            vps = VanishingPointSet(points)
            fams = tuple(fams)
        return AnnotationSet(width=int(doc["width"]), height=int(doc["height"]),
                             segments=segments, vps=vps, vp_families=fams)
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ParseError(f"{path}: {e}") from e
