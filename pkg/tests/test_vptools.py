import math

import numpy as np
import pytest

from persplens import (AnnotationSet, Camera, DegeneratePencilError, InfiniteVP,
                       Segment2, VanishingPoint, VanishingPointSet, Vec2,
                       VPSource, consistency_check, estimate_vp, make_box_scene,
                       project_scene_segments, read_annotations,
                       scene_annotations, write_annotations)
from persplens.errors import (ParseError, SchemaVersionError,
                              TooFewSegmentsError)

CAM = Camera(f=128.0, cx=63.5, cy=63.5, width=128, height=128)


def seg(x0, y0, x1, y1, family=0):
    return Segment2(Vec2(x0, y0), Vec2(x1, y1), family)


class TestEstimateVP:
    def test_two_lines_exact_intersection(self):
        # y = 0 and y = x meet at the origin
        vp = estimate_vp([seg(1.0, 0.0, 3.0, 0.0), seg(1.0, 1.0, 3.0, 3.0)])
        assert vp.position.x == pytest.approx(0.0, abs=1e-12)
        assert vp.position.y == pytest.approx(0.0, abs=1e-12)
        assert vp.residual == pytest.approx(0.0, abs=1e-12)
        assert vp.source is VPSource.ESTIMATED

    def test_three_concurrent_lines(self):
        c = (2.0, 3.0)
        segs = []
        for phi in (0.0, math.pi / 4, math.pi / 2):
            d = (math.cos(phi), math.sin(phi))
            segs.append(seg(c[0] + d[0], c[1] + d[1],
                            c[0] + 3 * d[0], c[1] + 3 * d[1]))
        vp = estimate_vp(segs)
        assert vp.position.x == pytest.approx(2.0, abs=1e-9)
        assert vp.position.y == pytest.approx(3.0, abs=1e-9)
        assert vp.residual < 1e-9

    def test_parallel_lines_degenerate(self):
        with pytest.raises(DegeneratePencilError):
            estimate_vp([seg(0.0, 0.0, 5.0, 0.0), seg(0.0, 2.0, 5.0, 2.0)])

    def test_needs_two_segments(self):
        with pytest.raises(TooFewSegmentsError):
            estimate_vp([seg(0.0, 0.0, 1.0, 1.0)])

    def test_concurrent_regardless_of_segment_lengths(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            c = rng.uniform(-50, 50, 2)
            segs = []
            for _ in range(rng.integers(3, 8)):
                phi = rng.uniform(0, math.pi)
                t0 = rng.uniform(0.5, 30)
                t1 = t0 + rng.uniform(0.1, 30)
                d = (math.cos(phi), math.sin(phi))
                segs.append(seg(c[0] + t0 * d[0], c[1] + t0 * d[1],
                                c[0] + t1 * d[0], c[1] + t1 * d[1]))
            vp = estimate_vp(segs)
            assert math.hypot(vp.position.x - c[0], vp.position.y - c[1]) < 1e-6
            assert vp.residual < 1e-9

    def test_similarity_equivariance(self):
        rng = np.random.default_rng(2)
        base = [seg(0.0, 0.0, 4.0, 1.0), seg(0.0, 3.0, 4.0, 1.5),
                seg(1.0, -2.0, 5.0, 0.0)]
        vp0 = estimate_vp(base)
        for _ in range(30):
            s = rng.uniform(0.2, 5.0)
            phi = rng.uniform(0, 2 * math.pi)
            tx, ty = rng.uniform(-20, 20, 2)
            c, sn = math.cos(phi), math.sin(phi)

            def xf(p):
                return Vec2(s * (c * p.x - sn * p.y) + tx,
                            s * (sn * p.x + c * p.y) + ty)

            moved = [Segment2(xf(g.p0), xf(g.p1), g.family) for g in base]
            vp1 = estimate_vp(moved)
            expect = xf(vp0.position)
            scale = max(1.0, math.hypot(expect.x, expect.y))
            assert math.hypot(vp1.position.x - expect.x,
                              vp1.position.y - expect.y) / scale < 1e-9
            assert vp1.residual == pytest.approx(s * vp0.residual, rel=1e-9)

    def test_recovers_scene_vps(self):
        from persplens import ground_truth_vps
        diag = math.hypot(128, 128)
        for s in range(10):
            scene = make_box_scene(CAM, seed=s)
            segs = project_scene_segments(scene)
            vps, _ = ground_truth_vps(scene)
            finite_fams = [i for i, d in enumerate(scene.families)
                           if abs(d.dz) > 1e-6]
            for pos, fam in enumerate(finite_fams):
                target = vps[pos].position
                if math.hypot(target.x - 63.5, target.y - 63.5) > 4 * diag:
                    continue
                est = estimate_vp([g for g in segs if g.family == fam])
                assert math.hypot(est.position.x - target.x,
                                  est.position.y - target.y) < 0.5


class TestConsistencyCheck:
    def test_exact_scene_annotations_pass(self):
        for s in range(5):
            ann = scene_annotations(make_box_scene(CAM, seed=s))
            report = consistency_check(ann, tol=0.5)
            assert report.all_pass
            assert len(report.entries) == 3

    def test_perturbed_family_fails(self):
        ann = scene_annotations(make_box_scene(CAM, seed=3))
        segs = list(ann.segments)
        victim = segs[0]
        segs[0] = Segment2(Vec2(victim.p0.x + 5.0, victim.p0.y),
                           victim.p1, victim.family)
        broken = AnnotationSet(ann.width, ann.height, tuple(segs),
                               ann.vps, ann.vp_families)
        report = consistency_check(broken, tol=0.5)
        assert not report.all_pass
        failing = [e for e in report.entries if not e.passed]
        assert [e.family for e in failing] == [victim.family]
        assert failing[0].max_residual > 0.5

    def test_two_exactly_concurrent_segments_pass(self):
        ann = AnnotationSet(16, 16,
                            (seg(0.0, 0.0, 4.0, 0.0), seg(0.0, 4.0, 4.0, 2.0)))
        report = consistency_check(ann, tol=0.5)
        assert report.all_pass
        assert report.entries[0].max_residual == pytest.approx(0.0, abs=1e-12)

    def test_parallel_family_passes_as_infinite(self):
        ann = AnnotationSet(16, 16,
                            (seg(0.0, 1.0, 8.0, 1.0), seg(0.0, 5.0, 8.0, 5.0)))
        report = consistency_check(ann, tol=0.5)
        assert report.all_pass
        assert isinstance(report.entries[0].vp, InfiniteVP)

    def test_single_segment_family_rejected(self):
        ann = AnnotationSet(16, 16,
                            (seg(0.0, 0.0, 4.0, 0.0), seg(0.0, 4.0, 4.0, 2.0),
                             seg(0.0, 0.0, 1.0, 1.0, family=1)))
        with pytest.raises(TooFewSegmentsError, match="family 1"):
            consistency_check(ann, tol=0.5)

    def test_verdict_monotone_in_tolerance(self):
        rng = np.random.default_rng(4)
        for s in range(10):
            ann = scene_annotations(make_box_scene(CAM, seed=s))
            segs = list(ann.segments)
            j = int(rng.integers(0, len(segs)))
            bump = float(rng.uniform(0.0, 3.0))
            segs[j] = Segment2(Vec2(segs[j].p0.x + bump, segs[j].p0.y),
                               segs[j].p1, segs[j].family)
            noisy = AnnotationSet(ann.width, ann.height, tuple(segs),
                                  ann.vps, ann.vp_families)
            verdicts = [consistency_check(noisy, tol=t).all_pass
                        for t in (0.1, 0.5, 2.0, 10.0, 1e4)]
            assert verdicts == sorted(verdicts)


class TestAnnotationIO:
    def random_annotations(self, seed):
        rng = np.random.default_rng(seed)
        segs = []
        for fam in range(3):
            for _ in range(4):
                p0 = rng.uniform(-100, 200, 2)
                p1 = p0 + rng.uniform(1.0, 50.0, 2)
                segs.append(Segment2(Vec2(*p0), Vec2(*p1), fam))
        vps = VanishingPointSet([
            VanishingPoint(Vec2(*rng.uniform(-500, 500, 2)),
                           source=VPSource.GROUND_TRUTH)
            for _ in range(2)])
        return AnnotationSet(320, 240, tuple(segs), vps, (0, 2))

    def test_round_trip_identity(self, tmp_path):
        for s in range(10):
            ann = self.random_annotations(s)
            path = tmp_path / f"ann_{s}.json"
            write_annotations(ann, path)
            back = read_annotations(path)
            assert back.width == ann.width and back.height == ann.height
            for a, b in zip(back.segments, ann.segments):
                assert a.p0 == b.p0 and a.p1 == b.p1 and a.family == b.family
            assert back.vp_families == ann.vp_families
            for a, b in zip(back.vps, ann.vps):
                assert a.position == b.position
                assert a.source is VPSource.GROUND_TRUTH

    def test_missing_segments_key(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text('{"schema": 1, "width": 8, "height": 8}')
        with pytest.raises(ParseError, match="segments"):
            read_annotations(path)

    def test_unknown_schema(self, tmp_path):
        path = tmp_path / "v999.json"
        path.write_text('{"schema": 999, "width": 8, "height": 8, "segments": []}')
        with pytest.raises(SchemaVersionError):
            read_annotations(path)

    def test_malformed_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"schema": 1\n  "width": 8}')
        with pytest.raises(ParseError, match="line 2"):
            read_annotations(path)

    def test_vp_family_must_have_segments(self):
        with pytest.raises(ValueError, match="family"):
            AnnotationSet(8, 8, (seg(0, 0, 1, 1, family=0),),
                          VanishingPointSet([VanishingPoint(Vec2(1, 1))]),
                          (5,))


class TestSegment2:
    def test_rejects_degenerate_segment(self):
        with pytest.raises(ValueError):
            Segment2(Vec2(1.0, 1.0), Vec2(1.0, 1.0 + 1e-9), 0)
