"""Backend parity and adjoint identities for the hot kernels."""

import numpy as np
import pytest

from persplens.kernels import _pykernels

try:
    from persplens.kernels import _ckernels
    BACKENDS = [_pykernels, _ckernels]
except ImportError:
    _ckernels = None
    BACKENDS = [_pykernels]


def random_problem(seed, h=11, w=13, n=400, n_seg=9):
    rng = np.random.default_rng(seed)
    gx = rng.normal(size=(h, w))
    gy = rng.normal(size=(h, w))
    xs = rng.uniform(0, w - 1, n)
    ys = rng.uniform(0, h - 1, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    px, py = -np.sin(phi), np.cos(phi)
    weights = rng.uniform(0.1, 1.0, n)
    seg = rng.integers(0, n_seg, n).astype(np.intp)
    coeff = rng.normal(size=n_seg)
    return gx, gy, xs, ys, px, py, weights, seg, coeff


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit("_", 1)[-1])
class TestPerBackend:
    def test_sobel_adjoint_identity(self, impl):
        # <S(a), b> == <a, S^T(b)> for random a, b
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.normal(size=(8, 9))
            bx = rng.normal(size=(8, 9))
            by = rng.normal(size=(8, 9))
            gx, gy = impl.sobel_planes(a)
            lhs = np.sum(gx * bx) + np.sum(gy * by)
            rhs = np.sum(a * impl.sobel_planes_adjoint(bx, by))
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_profile_scatter_is_accumulate_adjoint(self, impl):
        # away from kinks the accumulate map is locally linear in the
        # field, so directional derivatives must match the scatter output
        gx, gy, xs, ys, px, py, w, seg, coeff = random_problem(2)
        d_out = impl.profile_accumulate(gx, gy, xs, ys, px, py, w, seg, 9)
        dgx, dgy = impl.profile_scatter(gx, gy, xs, ys, px, py, w, seg, coeff)
        rng = np.random.default_rng(3)
        eps = 1e-7
        tx = rng.normal(size=gx.shape)
        ty = rng.normal(size=gy.shape)
        d_plus = impl.profile_accumulate(gx + eps * tx, gy + eps * ty,
                                         xs, ys, px, py, w, seg, 9)
        d_minus = impl.profile_accumulate(gx - eps * tx, gy - eps * ty,
                                          xs, ys, px, py, w, seg, 9)
        lhs = float(coeff @ ((d_plus - d_minus) / (2 * eps)))
        rhs = float(np.sum(dgx * tx) + np.sum(dgy * ty))
        assert lhs == pytest.approx(rhs, rel=1e-6)
        assert np.all(d_out >= 0.0)

    def test_accumulate_against_direct_sum(self, impl):
        from oracles import bilinear_reference
        gx, gy, xs, ys, px, py, w, seg, _ = random_problem(4, n=50)
        d = impl.profile_accumulate(gx, gy, xs, ys, px, py, w, seg, 9)
        expected = np.zeros(9)
        for j in range(len(xs)):
            u = (px[j] * bilinear_reference(gx, xs[j], ys[j])
                 + py[j] * bilinear_reference(gy, xs[j], ys[j]))
            expected[seg[j]] += w[j] * abs(u)
        assert np.allclose(d, expected, atol=1e-12)

    def test_bilinear_gather_nodes(self, impl):
        rng = np.random.default_rng(5)
        plane = rng.normal(size=(4, 5))
        ys, xs = np.mgrid[0:4, 0:5]
        vals = impl.bilinear_gather(plane, xs.ravel().astype(float),
                                    ys.ravel().astype(float))
        assert np.array_equal(vals, plane.ravel())


def test_backend_forcing(monkeypatch):
    # PERSPLENS_KERNELS=python must select the fallback on a fresh import
    import subprocess
    import sys
    out = subprocess.run(
        [sys.executable, "-c",
         "from persplens import kernels; print(kernels.BACKEND)"],
        env={"PERSPLENS_KERNELS": "python", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True)
    assert out.stdout.strip() == "python"


@pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")
class TestBackendParity:
    def test_sobel_parity(self):
        rng = np.random.default_rng(6)
        img = rng.uniform(0, 1, (17, 23))
        px_gx, px_gy = _pykernels.sobel_planes(img)
        cx_gx, cx_gy = _ckernels.sobel_planes(img)
        assert np.allclose(px_gx, cx_gx, atol=1e-13)
        assert np.allclose(px_gy, cx_gy, atol=1e-13)

    def test_sobel_adjoint_parity(self):
        rng = np.random.default_rng(7)
        bx = rng.normal(size=(10, 12))
        by = rng.normal(size=(10, 12))
        assert np.allclose(_pykernels.sobel_planes_adjoint(bx, by),
                           _ckernels.sobel_planes_adjoint(bx, by), atol=1e-13)

    def test_profile_parity(self):
        gx, gy, xs, ys, px, py, w, seg, coeff = random_problem(8, n=2000)
        dp = _pykernels.profile_accumulate(gx, gy, xs, ys, px, py, w, seg, 9)
        dc = _ckernels.profile_accumulate(gx, gy, xs, ys, px, py, w, seg, 9)
        assert np.allclose(dp, dc, rtol=1e-12, atol=1e-12)
        sp = _pykernels.profile_scatter(gx, gy, xs, ys, px, py, w, seg, coeff)
        sc = _ckernels.profile_scatter(gx, gy, xs, ys, px, py, w, seg, coeff)
        assert np.allclose(sp[0], sc[0], rtol=1e-12, atol=1e-12)
        assert np.allclose(sp[1], sc[1], rtol=1e-12, atol=1e-12)

    def test_gather_parity(self):
        rng = np.random.default_rng(9)
        plane = rng.normal(size=(9, 7))
        xs = rng.uniform(0, 6, 500)
        ys = rng.uniform(0, 8, 500)
        assert np.allclose(_pykernels.bilinear_gather(plane, xs, ys),
                           _ckernels.bilinear_gather(plane, xs, ys), atol=1e-14)
