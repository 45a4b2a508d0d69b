"""NumPy implementations of the hot kernels.

Every function here has an identically-named, identically-behaved twin in
the compiled ``_ckernels`` extension; this module is the fallback used when
the extension is not built. Inputs are float64 arrays, gradient planes are
C-contiguous (height, width), and sample coordinates are assumed to lie
inside the closed plane rectangle (callers clamp).
"""

from __future__ import annotations

import numpy as np


def sobel_planes(img):
    """3x3 Sobel derivative planes (gx, gy) with replicate-padded borders.

    Taps are paired as differences so constant regions cancel exactly.
    """
    p = np.pad(img, 1, mode="edge")
    gx = ((p[:-2, 2:] - p[:-2, :-2])
          + 2.0 * (p[1:-1, 2:] - p[1:-1, :-2])
          + (p[2:, 2:] - p[2:, :-2]))
    gy = ((p[2:, :-2] - p[:-2, :-2])
          + 2.0 * (p[2:, 1:-1] - p[:-2, 1:-1])
          + (p[2:, 2:] - p[:-2, 2:]))
    return gx, gy


def sobel_planes_adjoint(dgx, dgy):
    """Exact adjoint of sobel_planes: <sobel(a), b> == <a, adjoint(b)>."""
    h, w = dgx.shape
    dp = np.zeros((h + 2, w + 2))
    dp[:-2, 2:] += dgx
    dp[1:-1, 2:] += 2.0 * dgx
    dp[2:, 2:] += dgx
    dp[:-2, :-2] -= dgx
    dp[1:-1, :-2] -= 2.0 * dgx
    dp[2:, :-2] -= dgx
    dp[2:, :-2] += dgy
    dp[2:, 1:-1] += 2.0 * dgy
    dp[2:, 2:] += dgy
    dp[:-2, :-2] -= dgy
    dp[:-2, 1:-1] -= 2.0 * dgy
    dp[:-2, 2:] -= dgy
    # fold the replicate-padding border back onto the edge pixels
    out = dp[1:-1, 1:-1].copy()
    out[0, :] += dp[0, 1:-1]
    out[-1, :] += dp[-1, 1:-1]
    out[:, 0] += dp[1:-1, 0]
    out[:, -1] += dp[1:-1, -1]
    out[0, 0] += dp[0, 0]
    out[0, -1] += dp[0, -1]
    out[-1, 0] += dp[-1, 0]
    out[-1, -1] += dp[-1, -1]
    return out


def _corner_indices(shape, xs, ys):
    h, w = shape
    ix = np.clip(np.floor(xs).astype(np.intp), 0, max(w - 2, 0))
    iy = np.clip(np.floor(ys).astype(np.intp), 0, max(h - 2, 0))
    fx = xs - ix if w > 1 else np.zeros_like(xs)
    fy = ys - iy if h > 1 else np.zeros_like(ys)
    return ix, iy, np.minimum(ix + 1, w - 1), np.minimum(iy + 1, h - 1), fx, fy


def bilinear_gather(plane, xs, ys):
    """Bilinear interpolation of one plane at fractional (x, y) positions."""
    ix, iy, ix1, iy1, fx, fy = _corner_indices(plane.shape, xs, ys)
    return (plane[iy, ix] * (1.0 - fx) * (1.0 - fy)
            + plane[iy, ix1] * fx * (1.0 - fy)
            + plane[iy1, ix] * (1.0 - fx) * fy
            + plane[iy1, ix1] * fx * fy)


def profile_accumulate(gx, gy, xs, ys, px, py, weights, seg, n_seg):
    """Per-ray sums D[s] = sum over samples of w * |px*gx(p) + py*gy(p)|."""
    u = px * bilinear_gather(gx, xs, ys) + py * bilinear_gather(gy, xs, ys)
    return np.bincount(seg, weights=weights * np.abs(u), minlength=n_seg)


def profile_scatter(gx, gy, xs, ys, px, py, weights, seg, coeff):
    """Adjoint of profile_accumulate into the gradient planes.

    coeff[s] is the upstream derivative with respect to D[s]. Each sample
    scatters coeff[seg]*w*sign(u)*(px, py) over its four bilinear corners;
    samples exactly at a kink (u == 0) contribute nothing.
    """
    ix, iy, ix1, iy1, fx, fy = _corner_indices(gx.shape, xs, ys)
    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy
    u = (px * (gx[iy, ix] * w00 + gx[iy, ix1] * w01
               + gx[iy1, ix] * w10 + gx[iy1, ix1] * w11)
         + py * (gy[iy, ix] * w00 + gy[iy, ix1] * w01
                 + gy[iy1, ix] * w10 + gy[iy1, ix1] * w11))
    c = coeff[seg] * weights * np.sign(u)
    dgx = np.zeros_like(gx)
    dgy = np.zeros_like(gy)
    for jy, jx, wt in ((iy, ix, w00), (iy, ix1, w01), (iy1, ix, w10), (iy1, ix1, w11)):
        np.add.at(dgx, (jy, jx), c * px * wt)
        np.add.at(dgy, (jy, jx), c * py * wt)
    return dgx, dgy
