#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the three hot paths (Sobel planes, profile accumulation, profile
scatter) on a realistic workload: a 512x512 gradient field swept by 3
vanishing points x 64 rays at 0.5 px steps, plus an end-to-end loss
forward+backward at two image sizes.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from persplens.kernels import _pykernels

try:
    from persplens.kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, repeat=20):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def sweep_workload(seed=0, size=512, n_vps=3, n_angles=64, step=0.5):
    rng = np.random.default_rng(seed)
    n_per_ray = int(size * 1.4 / step)
    n = n_vps * n_angles * n_per_ray
    xs = rng.uniform(0, size - 1, n)
    ys = rng.uniform(0, size - 1, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    seg = np.repeat(np.arange(n_vps * n_angles, dtype=np.intp), n_per_ray)
    return (rng.uniform(0, 1, (size, size)), rng.normal(size=(size, size)),
            rng.normal(size=(size, size)), xs, ys, -np.sin(phi), np.cos(phi),
            np.full(n, step), seg, n_vps * n_angles,
            rng.normal(size=n_vps * n_angles))


def bench_kernels():
    img, gx, gy, xs, ys, px, py, w, seg, n_seg, coeff = sweep_workload()
    rows = []
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("compiled", _ckernels))
    for name, impl in backends:
        t_sobel = timeit(lambda: impl.sobel_planes(img))
        t_acc = timeit(lambda: impl.profile_accumulate(
            gx, gy, xs, ys, px, py, w, seg, n_seg))
        t_scat = timeit(lambda: impl.profile_scatter(
            gx, gy, xs, ys, px, py, w, seg, coeff))
        rows.append((name, t_sobel, t_acc, t_scat))
    print(f"kernel timings ({len(xs)} ray samples, {img.shape[0]}x{img.shape[1]} field)")
    print(f"{'backend':<10} {'sobel':>10} {'accumulate':>12} {'scatter':>10}")
    for name, a, b, c in rows:
        print(f"{name:<10} {a * 1e3:>8.2f}ms {b * 1e3:>10.2f}ms {c * 1e3:>8.2f}ms")
    if len(rows) == 2:
        print(f"{'speedup':<10} {rows[0][1] / rows[1][1]:>9.1f}x "
              f"{rows[0][2] / rows[1][2]:>11.1f}x {rows[0][3] / rows[1][3]:>9.1f}x")
    print()


def bench_end_to_end():
    import persplens as pl
    from persplens import kernels

    print(f"end-to-end loss forward+backward (active backend: {kernels.BACKEND};")
    print("set PERSPLENS_KERNELS=python to time the fallback)")
    for size in (128, 256):
        cam = pl.Camera(f=float(size), cx=(size - 1) / 2.0, cy=(size - 1) / 2.0,
                        width=size, height=size)
        scene = pl.make_box_scene(cam, seed=1)
        vps_all, _ = pl.ground_truth_vps(scene)
        vps = pl.VanishingPointSet(
            [v for v in vps_all
             if max(abs(v.position.x), abs(v.position.y)) <= 1e6])
        ref = pl.render_wireframe(scene)
        img = pl.distort_render(scene, pl.RenderConfig(),
                                pl.DistortionSpec(2.0, 0.0, seed=1))
        cfg = pl.PerspLossConfig()
        t_fwd = timeit(lambda: pl.persp_loss(img, ref, vps, cfg), repeat=10)
        t_bwd = timeit(lambda: pl.persp_loss_backward(img, ref, vps, cfg),
                       repeat=10)
        print(f"  {size}x{size}, {len(vps)} VPs: forward {t_fwd * 1e3:.2f}ms, "
              f"forward+backward {t_bwd * 1e3:.2f}ms")


if __name__ == "__main__":
    bench_kernels()
    bench_end_to_end()
