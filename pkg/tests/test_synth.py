import math

import numpy as np
import pytest

from persplens import (AllInfiniteError, Camera, Direction3, DistortionSpec,
                       ImageRect, InfiniteVP, PerspLossConfig, Point3,
                       RenderConfig, WireframeScene,
                       distort_render, ground_truth_vps, make_box_scene,
                       persp_loss, project_point, project_scene_segments,
                       read_scene, render_wireframe, scene_annotations,
                       write_scene)
from persplens.errors import ParseError, SchemaVersionError

from oracles import intersect_lines

CAM = Camera(f=128.0, cx=63.5, cy=63.5, width=128, height=128)


def axis_aligned_scene(camera=None):
    """Hand-built box with world-axis families, camera looking down +z."""
    camera = camera or CAM
    c = np.array([0.0, 0.0, 5.0])
    e = np.array([0.8, 0.6, 0.7])
    segments = []
    axes = np.eye(3)
    for k in range(3):
        a1 = axes[(k + 1) % 3] * e[(k + 1) % 3]
        a2 = axes[(k + 2) % 3] * e[(k + 2) % 3]
        ax = axes[k] * e[k]
        for s1 in (-1, 1):
            for s2 in (-1, 1):
                p0 = Point3(*(c - ax + s1 * a1 + s2 * a2))
                p1 = Point3(*(c + ax + s1 * a1 + s2 * a2))
                segments.append((p0, p1, k))
    families = tuple(Direction3(*axes[k]) for k in range(3))
    return WireframeScene(tuple(segments), families, camera)


class TestMakeBoxScene:
    def test_deterministic(self):
        a = make_box_scene(CAM, seed=7)
        b = make_box_scene(CAM, seed=7)
        assert a == b

    def test_cuboid_combinatorics(self):
        scene = make_box_scene(CAM, seed=1)
        assert len(scene.segments) == 12
        assert len(scene.families) == 3
        for k in range(3):
            assert sum(1 for *_, fam in scene.segments if fam == k) == 4

    def test_multiple_boxes_share_families(self):
        scene = make_box_scene(CAM, seed=3, n_boxes=3)
        assert len(scene.segments) == 36
        assert len(scene.families) == 3

    def test_endpoints_project_inside_margin_frame(self):
        # generator retries until the 4x-size frame predicate holds
        frame = ImageRect(-1.5 * 127.0, -1.5 * 127.0, 2.5 * 127.0, 2.5 * 127.0)
        for seed in range(30):
            scene = make_box_scene(CAM, seed=seed)
            for p0, p1, _ in scene.segments:
                assert frame.contains(project_point(CAM, p0))
                assert frame.contains(project_point(CAM, p1))

    def test_segment_directions_match_families(self):
        scene = make_box_scene(CAM, seed=11)
        for p0, p1, fam in scene.segments:
            d = np.array([p1.x - p0.x, p1.y - p0.y, p1.z - p0.z])
            d /= np.linalg.norm(d)
            f = scene.families[fam]
            assert np.allclose(d, [f.dx, f.dy, f.dz], atol=1e-9)


class TestGroundTruthVPs:
    def test_optical_axis_family_hits_principal_point(self):
        scene = axis_aligned_scene()
        vps, infinite = ground_truth_vps(scene)
        assert len(vps) == 1
        assert vps[0].position.x == pytest.approx(63.5)
        assert vps[0].position.y == pytest.approx(63.5)
        assert len(infinite) == 2

    def test_one_point_perspective_of_axis_aligned_box(self):
        _, infinite = ground_truth_vps(axis_aligned_scene())
        assert {fam for fam, _ in infinite} == {0, 1}
        for _, ivp in infinite:
            assert isinstance(ivp, InfiniteVP)

    def test_generic_rotation_gives_three_finite_vps(self):
        hits = 0
        for seed in range(20):
            vps, infinite = ground_truth_vps(make_box_scene(CAM, seed=seed))
            if len(vps) == 3:
                hits += 1
                assert not infinite
        assert hits == 20

    def test_all_sensor_parallel_rejected(self):
        seg = ((Point3(-1.0, 0.0, 5.0), Point3(1.0, 0.0, 5.0), 0),
               (Point3(-1.0, 1.0, 5.0), Point3(1.0, 1.0, 5.0), 0))
        scene = WireframeScene(seg, (Direction3(1.0, 0.0, 0.0),), CAM)
        with pytest.raises(AllInfiniteError):
            ground_truth_vps(scene)


class TestPairwiseConcurrency:
    def test_projected_lines_meet_at_analytic_vp(self):
        # exact rational arithmetic, pre-rasterization: every same-family
        # line pair intersects within 1e-6 px of the family's vanishing
        # point. Restricted to VPs within 4x the image diagonal: farther
        # out, double rounding of the projections alone exceeds the bound.
        import itertools
        diag = math.hypot(128.0, 128.0)
        for seed in range(10):
            scene = make_box_scene(CAM, seed=seed)
            segs = project_scene_segments(scene)
            vps, _ = ground_truth_vps(scene)
            finite_fams = [i for i, d in enumerate(scene.families)
                           if abs(d.dz) > 1e-6]
            for fam_pos, fam in enumerate(finite_fams):
                target = vps[fam_pos].position
                if math.hypot(target.x - 63.5, target.y - 63.5) > 4 * diag:
                    continue
                fam_segs = [s for s in segs if s.family == fam]
                for s1, s2 in itertools.combinations(fam_segs, 2):
                    got = intersect_lines((s1.p0.x, s1.p0.y), (s1.p1.x, s1.p1.y),
                                          (s2.p0.x, s2.p0.y), (s2.p1.x, s2.p1.y))
                    if got is None:
                        continue
                    assert math.hypot(got[0] - target.x, got[1] - target.y) < 1e-6


class TestRenderWireframe:
    def test_empty_scene_is_background(self):
        scene = WireframeScene((), (Direction3(0, 0, 1),), CAM)
        img = render_wireframe(scene, RenderConfig(background=0.25))
        assert np.all(img.data == 0.25)

    def test_horizontal_segment_lights_its_row(self):
        cam = Camera(f=16.0, cx=7.5, cy=7.5, width=16, height=16)
        # z=1 so image x spans the full row at y = cy
        seg = ((Point3(-0.4, 0.0, 1.0), Point3(0.4, 0.0, 1.0), 0),)
        scene = WireframeScene(seg, (Direction3(1, 0, 0),), cam)
        img = render_wireframe(scene, RenderConfig(line_width=1.5))
        row = int(round(7.5))
        mid = img.data[row - 1:row + 2, 6:10]
        assert mid.max() > 0.5
        assert np.all(img.data[row - 4, :] == 0.0)
        assert np.all(img.data[row + 4, :] == 0.0)

    def test_determinism(self):
        scene = make_box_scene(CAM, seed=4)
        a = render_wireframe(scene)
        b = render_wireframe(scene)
        assert np.array_equal(a.data, b.data)

    def test_values_in_unit_range(self):
        scene = make_box_scene(CAM, seed=6)
        img = render_wireframe(scene)
        assert img.data.min() >= 0.0
        assert img.data.max() <= 1.0

    def test_near_plane_clipping(self):
        # endpoint closer than the near plane: the visible part still draws
        cam = Camera(f=32.0, cx=31.5, cy=31.5, width=64, height=64)
        seg = ((Point3(0.0, 0.0, 0.02), Point3(0.5, 0.0, 4.0), 0),)
        d = Direction3(0.5, 0.0, 3.98)
        scene = WireframeScene(seg, (d,), cam)
        img = render_wireframe(scene)
        assert img.data.max() > 0.5

    def test_supersampling_smooths_but_preserves_lines(self):
        scene = make_box_scene(CAM, seed=6)
        plain = render_wireframe(scene)
        smooth = render_wireframe(scene, RenderConfig(supersample=2))
        assert smooth.data.shape == plain.data.shape
        assert abs(smooth.data.mean() - plain.data.mean()) < 0.01


class TestDistortRender:
    def test_zero_distortion_bit_exact(self):
        scene = make_box_scene(CAM, seed=8)
        accurate = render_wireframe(scene)
        distorted = distort_render(scene, RenderConfig(),
                                   DistortionSpec(0.0, 0.0, seed=123))
        assert np.array_equal(accurate.data, distorted.data)

    def test_seeded_reproducibility(self):
        scene = make_box_scene(CAM, seed=8)
        spec = DistortionSpec(3.0, 1.0, seed=9)
        a = distort_render(scene, RenderConfig(), spec)
        b = distort_render(scene, RenderConfig(), spec)
        assert np.array_equal(a.data, b.data)

    def test_bow_displaces_midpoint_peak(self):
        cam = Camera(f=32.0, cx=31.5, cy=31.5, width=64, height=64)
        # single horizontal segment through the image center
        seg = ((Point3(-0.8, 0.0, 1.0), Point3(0.8, 0.0, 1.0), 0),)
        scene = WireframeScene(seg, (Direction3(1, 0, 0),), cam)
        bow = 3.0
        img = distort_render(scene, RenderConfig(),
                             DistortionSpec(bow, 0.0, seed=0))
        mid_col = img.data[:, 31]
        peak = np.argmax(mid_col)
        chord_row = 31.5
        assert abs(abs(peak - chord_row) - bow) <= 1.0

    def test_jitter_translates_family(self):
        scene = make_box_scene(CAM, seed=10)
        a = distort_render(scene, RenderConfig(), DistortionSpec(0.0, 4.0, seed=3))
        b = render_wireframe(scene)
        assert not np.array_equal(a.data, b.data)

    def test_monotone_discrimination_in_bow_amplitude(self):
        # mean loss against the accurate reference grows with amplitude
        cfg = PerspLossConfig()
        amplitudes = (0.0, 1.0, 2.0, 4.0, 8.0)
        means = []
        for amp in amplitudes:
            vals = []
            for seed in range(12):
                scene = make_box_scene(CAM, seed=seed)
                vps, _ = ground_truth_vps(scene)
                usable = [v for v in vps
                          if max(abs(v.position.x), abs(v.position.y)) <= 1e6]
                from persplens import VanishingPointSet
                ref = render_wireframe(scene)
                img = distort_render(scene, RenderConfig(),
                                     DistortionSpec(amp, 0.0, seed=seed))
                vals.append(persp_loss(img, ref, VanishingPointSet(usable),
                                       cfg).total)
            means.append(np.mean(vals))
        assert means[0] == 0.0
        for lo, hi in zip(means, means[1:]):
            assert hi > lo


class TestSceneIO:
    def test_round_trip(self, tmp_path):
        scene = make_box_scene(CAM, seed=12, n_boxes=2)
        path = tmp_path / "scene.json"
        write_scene(scene, path)
        back = read_scene(path)
        assert back == scene

    def test_missing_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"schema": 1, "camera": {"f": 1, "cx": 0, "cy": 0, '
                        '"width": 4, "height": 4}, "families": []}')
        with pytest.raises(ParseError):
            read_scene(path)

    def test_unknown_schema(self, tmp_path):
        path = tmp_path / "v999.json"
        path.write_text('{"schema": 999, "camera": {}, "families": [], '
                        '"segments": []}')
        with pytest.raises(SchemaVersionError):
            read_scene(path)

    def test_malformed_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"schema": 1,,}')
        with pytest.raises(ParseError, match="line"):
            read_scene(path)


class TestSceneAnnotations:
    def test_annotations_cover_segments_and_vps(self):
        scene = make_box_scene(CAM, seed=13)
        ann = scene_annotations(scene)
        assert len(ann.segments) == 12
        assert ann.width == 128 and ann.height == 128
        vps, _ = ground_truth_vps(scene)
        near = [v for v in vps
                if max(abs(v.position.x), abs(v.position.y)) <= 1e6]
        assert ann.vps is not None
        assert len(ann.vps) == len(near)

    def test_axis_aligned_scene_keeps_one_vp(self):
        ann = scene_annotations(axis_aligned_scene())
        assert len(ann.vps) == 1
        assert ann.vp_families == (2,)
