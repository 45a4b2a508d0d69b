# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the NumPy kernels in ``_pykernels``.

Same contracts, loop-based: see the fallback module for the reference
semantics. Sample coordinates must lie inside the closed plane rectangle.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor

cnp.import_array()


def sobel_planes(const double[:, ::1] img):
    """3x3 Sobel derivative planes (gx, gy) with replicate-padded borders."""
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    gx_arr = np.empty((h, w))
    gy_arr = np.empty((h, w))
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gy = gy_arr
    cdef Py_ssize_t y, x, ym, yp, xm, xp
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            # taps paired as differences so constant regions cancel exactly
            gx[y, x] = ((img[ym, xp] - img[ym, xm])
                        + 2.0 * (img[y, xp] - img[y, xm])
                        + (img[yp, xp] - img[yp, xm]))
            gy[y, x] = ((img[yp, xm] - img[ym, xm])
                        + 2.0 * (img[yp, x] - img[ym, x])
                        + (img[yp, xp] - img[ym, xp]))
    return gx_arr, gy_arr


def sobel_planes_adjoint(const double[:, ::1] dgx, const double[:, ::1] dgy):
    """Exact adjoint of sobel_planes: <sobel(a), b> == <a, adjoint(b)>."""
    cdef Py_ssize_t h = dgx.shape[0], w = dgx.shape[1]
    out_arr = np.zeros((h, w))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x, ym, yp, xm, xp
    cdef double vx, vy
    # scatter each output tap back to its clamped source pixel
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            vx = dgx[y, x]
            vy = dgy[y, x]
            out[ym, xp] += vx
            out[y, xp] += 2.0 * vx
            out[yp, xp] += vx
            out[ym, xm] -= vx
            out[y, xm] -= 2.0 * vx
            out[yp, xm] -= vx
            out[yp, xm] += vy
            out[yp, x] += 2.0 * vy
            out[yp, xp] += vy
            out[ym, xm] -= vy
            out[ym, x] -= 2.0 * vy
            out[ym, xp] -= vy
    return out_arr


def bilinear_gather(const double[:, ::1] plane, const double[::1] xs, const double[::1] ys):
    """Bilinear interpolation of one plane at fractional (x, y) positions."""
    cdef Py_ssize_t h = plane.shape[0], w = plane.shape[1], n = xs.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t j, ix, iy, ix1, iy1
    cdef double fx, fy
    for j in range(n):
        ix = <Py_ssize_t>floor(xs[j])
        iy = <Py_ssize_t>floor(ys[j])
        if ix > w - 2:
            ix = w - 2
        if ix < 0:
            ix = 0
        if iy > h - 2:
            iy = h - 2
        if iy < 0:
            iy = 0
        fx = xs[j] - ix if w > 1 else 0.0
        fy = ys[j] - iy if h > 1 else 0.0
        ix1 = ix + 1 if ix + 1 < w else w - 1
        iy1 = iy + 1 if iy + 1 < h else h - 1
        out[j] = (plane[iy, ix] * (1.0 - fx) * (1.0 - fy)
                  + plane[iy, ix1] * fx * (1.0 - fy)
                  + plane[iy1, ix] * (1.0 - fx) * fy
                  + plane[iy1, ix1] * fx * fy)
    return out_arr


def profile_accumulate(const double[:, ::1] gx, const double[:, ::1] gy,
                       const double[::1] xs, const double[::1] ys,
                       const double[::1] px, const double[::1] py,
                       const double[::1] weights, const cnp.intp_t[::1] seg,
                       Py_ssize_t n_seg):
    """Per-ray sums D[s] = sum over samples of w * |px*gx(p) + py*gy(p)|."""
    cdef Py_ssize_t h = gx.shape[0], w = gx.shape[1], n = xs.shape[0]
    out_arr = np.zeros(n_seg)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t j, ix, iy, ix1, iy1
    cdef double fx, fy, w00, w01, w10, w11, gxv, gyv
    for j in range(n):
        ix = <Py_ssize_t>floor(xs[j])
        iy = <Py_ssize_t>floor(ys[j])
        if ix > w - 2:
            ix = w - 2
        if ix < 0:
            ix = 0
        if iy > h - 2:
            iy = h - 2
        if iy < 0:
            iy = 0
        fx = xs[j] - ix if w > 1 else 0.0
        fy = ys[j] - iy if h > 1 else 0.0
        ix1 = ix + 1 if ix + 1 < w else w - 1
        iy1 = iy + 1 if iy + 1 < h else h - 1
        w00 = (1.0 - fx) * (1.0 - fy)
        w01 = fx * (1.0 - fy)
        w10 = (1.0 - fx) * fy
        w11 = fx * fy
        gxv = gx[iy, ix] * w00 + gx[iy, ix1] * w01 + gx[iy1, ix] * w10 + gx[iy1, ix1] * w11
        gyv = gy[iy, ix] * w00 + gy[iy, ix1] * w01 + gy[iy1, ix] * w10 + gy[iy1, ix1] * w11
        out[seg[j]] += weights[j] * fabs(px[j] * gxv + py[j] * gyv)
    return out_arr


def profile_scatter(const double[:, ::1] gx, const double[:, ::1] gy,
                    const double[::1] xs, const double[::1] ys,
                    const double[::1] px, const double[::1] py,
                    const double[::1] weights, const cnp.intp_t[::1] seg,
                    const double[::1] coeff):
    """Adjoint of profile_accumulate into the gradient planes.

    Each sample scatters coeff[seg]*w*sign(u)*(px, py) over its bilinear
    corners; samples exactly at a kink (u == 0) contribute nothing.
    """
    cdef Py_ssize_t h = gx.shape[0], w = gx.shape[1], n = xs.shape[0]
    dgx_arr = np.zeros((h, w))
    dgy_arr = np.zeros((h, w))
    cdef double[:, ::1] dgx = dgx_arr
    cdef double[:, ::1] dgy = dgy_arr
    cdef Py_ssize_t j, ix, iy, ix1, iy1
    cdef double fx, fy, w00, w01, w10, w11, gxv, gyv, u, c, cx, cy
    for j in range(n):
        ix = <Py_ssize_t>floor(xs[j])
        iy = <Py_ssize_t>floor(ys[j])
        if ix > w - 2:
            ix = w - 2
        if ix < 0:
            ix = 0
        if iy > h - 2:
            iy = h - 2
        if iy < 0:
            iy = 0
        fx = xs[j] - ix if w > 1 else 0.0
        fy = ys[j] - iy if h > 1 else 0.0
        ix1 = ix + 1 if ix + 1 < w else w - 1
        iy1 = iy + 1 if iy + 1 < h else h - 1
        w00 = (1.0 - fx) * (1.0 - fy)
        w01 = fx * (1.0 - fy)
        w10 = (1.0 - fx) * fy
        w11 = fx * fy
        gxv = gx[iy, ix] * w00 + gx[iy, ix1] * w01 + gx[iy1, ix] * w10 + gx[iy1, ix1] * w11
        gyv = gy[iy, ix] * w00 + gy[iy, ix1] * w01 + gy[iy1, ix] * w10 + gy[iy1, ix1] * w11
        u = px[j] * gxv + py[j] * gyv
        if u == 0.0:
            continue
        c = coeff[seg[j]] * weights[j] * (1.0 if u > 0.0 else -1.0)
        cx = c * px[j]
        cy = c * py[j]
        dgx[iy, ix] += cx * w00
        dgx[iy, ix1] += cx * w01
        dgx[iy1, ix] += cx * w10
        dgx[iy1, ix1] += cx * w11
        dgy[iy, ix] += cy * w00
        dgy[iy, ix1] += cy * w01
        dgy[iy1, ix] += cy * w10
        dgy[iy1, ix1] += cy * w11
    return dgx_arr, dgy_arr
