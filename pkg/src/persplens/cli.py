"""Command-line surface: scoring, gradient checking, dataset generation,
the pixel-space optimization demo, and concurrency checks.

Exit codes: 0 success/pass, 1 semantic failure (a check failed), 2
usage/validation error, 3 I/O error. All randomness flows from --seed, so
re-runs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import (DimensionMismatchError, EmptyVPSetError,
                     PersplensError, SizeTooLargeError)
from .geometry import Camera, InfiniteVP, VanishingPoint, VanishingPointSet, Vec2, VPSource
from .gradients import Image
from .loss import (CompositeLossConfig, PerspLossConfig, Reduction,
                   composite_loss, gradient_check, optimize_image, persp_loss,
                   search_lr)
from .synth import (DistortionSpec, RenderConfig, distort_render,
                    make_box_scene, render_wireframe, scene_annotations,
                    write_scene)
from .vptools import consistency_check, read_annotations, write_annotations

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3

#: Finite-difference cost guard for the gradcheck command.
MAX_GRADCHECK_SIZE = 32

DEFAULT_SEED = 0


def worker_count() -> int:
    """Worker cap from PERSPLENS_THREADS (default: up to 4)."""
    raw = os.environ.get("PERSPLENS_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            raise PersplensError(f"PERSPLENS_THREADS={raw!r} is not an integer")
    return min(4, os.cpu_count() or 1)


def load_image(path) -> Image:
    """Decode an 8-bit grayscale or 24-bit RGB PNG to scalars in [0, 1]."""
    try:
        with PILImage.open(path) as img:
            if img.mode not in ("L", "RGB"):
                raise PersplensError(f"{path}: unsupported image mode "
                                     f"{img.mode!r}; use 8-bit gray or 24-bit "
                                     "RGB PNG")
            arr = np.asarray(img, dtype=np.float64) / 255.0
    except PILImage.UnidentifiedImageError as e:
        raise PersplensError(f"{path}: not a decodable image") from e
    return Image.from_array(arr)


def save_image(img: Image, path):
    """Encode to PNG with fixed settings (byte-stable across runs)."""
    data = np.clip(np.rint(img.data * 255.0), 0.0, 255.0).astype(np.uint8)
    mode = "L" if img.channels == 1 else "RGB"
    PILImage.fromarray(data, mode=mode).save(path, format="PNG", compress_level=6)


def loss_config_from_args(args) -> PerspLossConfig:
    return PerspLossConfig(
        n_angles=args.n_angles,
        step=args.step,
        reduction=Reduction(args.reduction),
        normalize_by_length=args.normalize_length,
    )


def config_fingerprint(cfg: PerspLossConfig) -> str:
    """Short stable hash of every loss-affecting parameter."""
    payload = json.dumps({
        "n_angles": cfg.n_angles,
        "step": cfg.step,
        "reduction": cfg.reduction.value,
        "normalize_by_length": cfg.normalize_by_length,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ScoreRecord:
    image_id: str
    per_vp: tuple[float, ...]
    total: float
    fingerprint: str


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise PersplensError(f"no such file: {path}")
    return p


def _annotation_vps(path) -> VanishingPointSet:
    ann = read_annotations(path)
    if ann.vps is None or len(ann.vps) == 0:
        raise EmptyVPSetError(f"{path} carries no vanishing points")
    return ann.vps


def cmd_score(args) -> int:
    image_path = _require_file(args.image)
    ref_path = _require_file(args.reference)
    _require_file(args.annotations)
    img = load_image(image_path)
    ref = load_image(ref_path)
    if (img.width, img.height) != (ref.width, ref.height):
        raise DimensionMismatchError(
            f"image dimension mismatch: {img.width}x{img.height} vs "
            f"{ref.width}x{ref.height}")
    vps = _annotation_vps(args.annotations)
    cfg = loss_config_from_args(args)
    report = persp_loss(img, ref, vps, cfg)
    record = ScoreRecord(image_id=str(image_path),
                         per_vp=tuple(val for _, val in report.per_vp),
                         total=report.total,
                         fingerprint=config_fingerprint(cfg))
    print(f"total {report.total!r}")
    for idx, (vp, val) in enumerate(report.per_vp):
        print(f"vp {idx} ({vp.position.x:.3f}, {vp.position.y:.3f}) {val!r}")
    if args.base_loss is not None:
        comp = composite_loss(args.base_loss, report,
                              CompositeLossConfig(lambda_=args.lam))
        print(f"composite {comp!r}")
    if args.out:
        new = not Path(args.out).exists()
        with open(args.out, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if new:
                writer.writerow(["image", "reference", "total", "fingerprint",
                                 "per_vp"])
            writer.writerow([record.image_id, str(ref_path), repr(record.total),
                             record.fingerprint,
                             ";".join(repr(v) for v in record.per_vp)])
    return EXIT_OK


def _random_vps(rng: np.random.Generator, count: int, width: int,
                height: int) -> VanishingPointSet:
    """Mixed interior/exterior vanishing points for synthetic checks."""
    points = []
    while len(points) < count:
        x = rng.uniform(-2.0 * width, 3.0 * width)
        y = rng.uniform(-2.0 * height, 3.0 * height)
        vp = VanishingPoint(Vec2(x, y), source=VPSource.SYNTHETIC)
        if all(math.hypot(p.position.x - x, p.position.y - y) > 1.0
               for p in points):
            points.append(vp)
    return VanishingPointSet(points)


def cmd_gradcheck(args) -> int:
    if args.size > MAX_GRADCHECK_SIZE:
        raise SizeTooLargeError(
            f"size {args.size} exceeds the finite-difference guard "
            f"({MAX_GRADCHECK_SIZE})")
    rng = np.random.default_rng(args.seed)
    img = Image.from_array(rng.uniform(0.0, 1.0, size=(args.size, args.size)))
    ref = Image.from_array(rng.uniform(0.0, 1.0, size=(args.size, args.size)))
    vps = _random_vps(rng, args.vps, args.size, args.size)
    cfg = loss_config_from_args(args)
    result = gradient_check(img, ref, vps, cfg, h=args.h)
    status = "PASS" if result.passed else "FAIL"
    print(f"max relative error {result.max_rel_err:.3e} over "
          f"{result.n_checked} pixels (threshold {result.threshold:g}): {status}")
    return EXIT_OK if result.passed else EXIT_FAIL


def _build_scene_outputs(index: int, args):
    scene_seed = args.seed + index
    camera = Camera(f=args.f, cx=0.5 * (args.width - 1), cy=0.5 * (args.height - 1),
                    width=args.width, height=args.height)
    scene = make_box_scene(camera, seed=scene_seed, n_boxes=args.boxes)
    render_cfg = RenderConfig()
    accurate = render_wireframe(scene, render_cfg)
    spec = DistortionSpec(bow_amplitude=args.bow, vp_jitter=args.jitter,
                          seed=scene_seed)
    distorted = distort_render(scene, render_cfg, spec)
    ann = scene_annotations(scene)
    return scene, accurate, distorted, ann, scene_seed


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count()
    indices = list(range(args.n))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _build_scene_outputs(i, args),
                                    indices))
    else:
        results = [_build_scene_outputs(i, args) for i in indices]
    rows = []
    for i, (scene, accurate, distorted, ann, scene_seed) in zip(indices, results):
        stem = f"scene_{i:04d}"
        scene_path = out / f"{stem}.json"
        ann_path = out / f"{stem}_annotations.json"
        acc_path = out / f"{stem}_accurate.png"
        dist_path = out / f"{stem}_distorted.png"
        write_scene(scene, scene_path)
        write_annotations(ann, ann_path)
        save_image(accurate, acc_path)
        save_image(distorted, dist_path)
        n_vps = 0 if ann.vps is None else len(ann.vps)
        rows.append([i, scene_seed, args.bow, args.jitter, n_vps,
                     acc_path.name, dist_path.name, scene_path.name,
                     ann_path.name])
    with open(out / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene", "seed", "bow_amplitude", "vp_jitter",
                         "n_vps", "accurate", "distorted", "scene_json",
                         "annotations"])
        writer.writerows(rows)
    print(f"wrote {args.n} scene(s) to {out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    init = load_image(_require_file(args.init))
    ref = load_image(_require_file(args.reference))
    _require_file(args.annotations)
    vps = _annotation_vps(args.annotations)
    cfg = loss_config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lr = args.lr if args.lr is not None else search_lr(init, ref, vps, cfg)
    trace = []
    current = init
    done = 0
    while done < args.steps:
        chunk = args.steps - done
        if args.snapshots:
            chunk = min(chunk, args.snapshots)
        current, part = optimize_image(current, ref, vps, cfg, steps=chunk, lr=lr)
        trace.extend(part if not trace else part[1:])
        done += chunk
        if args.snapshots and done < args.steps:
            save_image(current, out / f"step_{done:05d}.png")
    save_image(current, out / "final.png")
    with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, val in enumerate(trace):
            writer.writerow([step, repr(val)])
    print(f"lr {lr:g}: loss {trace[0]!r} -> {trace[-1]!r} over {args.steps} steps")
    return EXIT_OK


def cmd_check(args) -> int:
    ann = read_annotations(_require_file(args.annotations))
    report = consistency_check(ann, tol=args.tol)
    for e in report.entries:
        status = "PASS" if e.passed else "FAIL"
        if isinstance(e.vp, InfiniteVP):
            where = (f"parallel pencil, direction "
                     f"({e.vp.direction2d.x:.4f}, {e.vp.direction2d.y:.4f})")
        else:
            where = f"vp ({e.vp.position.x:.3f}, {e.vp.position.y:.3f})"
        print(f"family {e.family}: {where} rms {e.rms_residual:.4g} px "
              f"max {e.max_residual:.4g} px [{status}]")
    print(f"{'all families pass' if report.all_pass else 'concurrency check failed'}"
          f" at tol {args.tol:g} px")
    return EXIT_OK if report.all_pass else EXIT_FAIL


def _add_loss_flags(p: argparse.ArgumentParser):
    p.add_argument("--n-angles", type=int, default=64,
                   help="rays swept per vanishing point")
    p.add_argument("--step", type=float, default=0.5,
                   help="quadrature step along each ray, pixels")
    p.add_argument("--reduction", choices=["l2", "sum"], default="l2",
                   help="per-VP reduction over the angle index")
    p.add_argument("--normalize-length", action="store_true",
                   help="divide each profile entry by its ray length")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="persplens",
                                description="Perspective-consistency scoring "
                                            "and synthetic wireframe tooling")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("score", help="perspective loss between two images")
    ps.add_argument("image")
    ps.add_argument("reference")
    ps.add_argument("annotations")
    _add_loss_flags(ps)
    ps.add_argument("--base-loss", type=float, default=None,
                    help="external base loss; prints the weighted composite")
    ps.add_argument("--lambda", dest="lam", type=float, default=0.01,
                    help="perspective weight in the composite")
    ps.add_argument("--out", default=None, help="append a CSV row here")
    ps.set_defaults(func=cmd_score)

    pg = sub.add_parser("gradcheck",
                        help="analytic gradient vs central finite differences")
    pg.add_argument("--size", type=int, default=12)
    pg.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pg.add_argument("--vps", type=int, default=1)
    pg.add_argument("--h", type=float, default=1e-3,
                    help="finite-difference step")
    _add_loss_flags(pg)
    pg.set_defaults(func=cmd_gradcheck, n_angles=8)

    pn = sub.add_parser("gen", help="generate a synthetic scene corpus")
    pn.add_argument("--n", type=int, default=10, help="number of scenes")
    pn.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pn.add_argument("--width", type=int, default=128)
    pn.add_argument("--height", type=int, default=128)
    pn.add_argument("--f", type=float, default=128.0, help="focal length, pixels")
    pn.add_argument("--boxes", type=int, default=1, help="boxes per scene")
    pn.add_argument("--bow", type=float, default=2.0,
                    help="bow amplitude for the distorted render, pixels")
    pn.add_argument("--jitter", type=float, default=0.0,
                    help="family translation for the distorted render, pixels")
    pn.add_argument("--out", required=True, help="output directory")
    pn.set_defaults(func=cmd_gen)

    po = sub.add_parser("optimize",
                        help="gradient-descend image pixels toward a reference")
    po.add_argument("init")
    po.add_argument("reference")
    po.add_argument("annotations")
    po.add_argument("--steps", type=int, default=500)
    po.add_argument("--lr", type=float, default=None,
                    help="learning rate (default: line search at step 0)")
    po.add_argument("--snapshots", type=int, default=0,
                    help="write an intermediate PNG every k steps")
    _add_loss_flags(po)
    po.add_argument("--out", required=True, help="output directory")
    po.set_defaults(func=cmd_optimize)

    pc = sub.add_parser("check", help="parallel-line concurrency check")
    pc.add_argument("annotations")
    pc.add_argument("--tol", type=float, default=2.0,
                    help="max residual, pixels (use 0.5 for synthetic data)")
    pc.set_defaults(func=cmd_check)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PersplensError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
