import numpy as np
import pytest

from handact import detection as det
from handact.errors import MissingAnnotation, NoHandDetected, ParseError


def box(x, y, w, h, cls="hand", side=None):
    return det.BoundingBox(x, y, w, h, cls=cls, side=side)


def record(**kw):
    base = dict(episode_id="e0", frame_idx=0, image_path="img.ppm", action_id=0,
                grasp_id=1, object_id=2, mesh_path="m.off",
                hand_r=box(0.5, 0.5, 0.25, 0.25, side="right"),
                hand_l=None, obj=box(0.1, 0.1, 0.2, 0.2, cls="object"))
    base.update(kw)
    return det.FrameRecord(**base)


class TestBoundingBox:
    def test_valid(self):
        b = box(0.25, 0.5, 0.5, 0.25)
        assert b.center == (0.5, 0.625)

    @pytest.mark.parametrize("bad", [(-0.1, 0, 0.5, 0.5), (0, 0, 0, 0.5),
                                     (0.8, 0, 0.3, 0.5), (0, 0.9, 0.5, 0.2)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            box(*bad)


class TestOracleDetect:
    def test_zero_noise_returns_boxes_verbatim(self):
        r = record()
        d = det.oracle_detect(r)
        assert d.hands == (r.hand_r,)
        assert d.objects == (r.obj,)

    def test_noise_perturbs_within_bound_and_stays_valid(self):
        r = record()
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = det.oracle_detect(r, noise=0.05, rng=rng)
            for b in d.hands + d.objects:
                assert 0.0 <= b.x and b.x + b.w <= 1.0 + 1e-12
                assert 0.0 <= b.y and b.y + b.h <= 1.0 + 1e-12
            jittered = d.hands[0]
            assert abs(jittered.x - r.hand_r.x) <= 0.05 + 1e-12
            assert abs(jittered.y - r.hand_r.y) <= 0.05 + 1e-12

    def test_missing_annotation(self):
        r = record(hand_r=None, obj=None)
        with pytest.raises(MissingAnnotation):
            det.oracle_detect(r)


class TestPrimaryHand:
    def test_rightmost_of_two(self):
        left = box(0.1, 0.4, 0.4, 0.2)
        right = box(0.5, 0.4, 0.4, 0.2)
        d = det.DetectionResult(hands=(left, right), objects=())
        assert det.resolve_primary_hand(d) is right

    def test_order_invariant(self):
        a = box(0.1, 0.4, 0.4, 0.2)
        b = box(0.5, 0.4, 0.4, 0.2)
        r1 = det.resolve_primary_hand(det.DetectionResult(hands=(a, b), objects=()))
        r2 = det.resolve_primary_hand(det.DetectionResult(hands=(b, a), objects=()))
        assert r1 is r2 is b

    def test_single_hand(self):
        only = box(0.2, 0.2, 0.3, 0.3)
        d = det.DetectionResult(hands=(only,), objects=())
        assert det.resolve_primary_hand(d) is only

    def test_no_hands(self):
        with pytest.raises(NoHandDetected):
            det.resolve_primary_hand(det.DetectionResult(hands=(), objects=()))


def reference_bilinear(img, x0, y0, w, h, out):
    """Independent quadruple-loop bilinear oracle (half-pixel convention)."""
    ih, iw = img.shape[:2]
    res = np.zeros((out, out) + img.shape[2:])
    for i in range(out):
        for j in range(out):
            u = min(max(x0 + (j + 0.5) * (w / out) - 0.5, 0.0), iw - 1.0)
            v = min(max(y0 + (i + 0.5) * (h / out) - 0.5, 0.0), ih - 1.0)
            u0, v0 = int(np.floor(u)), int(np.floor(v))
            u1, v1 = min(u0 + 1, iw - 1), min(v0 + 1, ih - 1)
            fu, fv = u - u0, v - v0
            res[i, j] = ((img[v0, u0] * (1 - fu) + img[v0, u1] * fu) * (1 - fv)
                         + (img[v1, u0] * (1 - fu) + img[v1, u1] * fu) * fv)
    return res


class TestCropAndResize:
    def test_full_image_identity(self):
        rng = np.random.default_rng(1)
        img = rng.random((8, 8, 3))
        out = det.crop_and_resize(img, box(0.0, 0.0, 1.0, 1.0), 8)
        assert np.array_equal(out, img)

    def test_uniform_image_uniform_patch(self):
        img = np.full((16, 16, 3), 0.37)
        out = det.crop_and_resize(img, box(0.25, 0.25, 0.5, 0.5), 4)
        assert np.allclose(out, 0.37, atol=1e-15)

    def test_checker_upscale_matches_reference(self):
        img = np.array([[0.0, 1.0], [1.0, 0.0]])[:, :, None]
        got = det.bilinear_resample(img, 0.0, 0.0, 2.0, 2.0, 4)
        expected = reference_bilinear(img, 0.0, 0.0, 2.0, 2.0, 4)
        np.testing.assert_allclose(got, expected, rtol=0, atol=0)

    def test_random_window_matches_reference(self):
        rng = np.random.default_rng(7)
        img = rng.random((9, 11, 3))
        got = det.bilinear_resample(img, 1.5, 2.25, 6.0, 5.0, 5)
        expected = reference_bilinear(img, 1.5, 2.25, 6.0, 5.0, 5)
        np.testing.assert_allclose(got, expected, rtol=0, atol=0)

    def test_mirror_commutes_bitwise(self):
        # pixel-aligned power-of-two box so the mirrored coordinates are exact
        rng = np.random.default_rng(3)
        img = rng.random((16, 16, 3))
        b = box(0.25, 0.25, 0.5, 0.5)
        mirrored_img = img[:, ::-1].copy()
        mb = box(1.0 - b.x - b.w, b.y, b.w, b.h)
        patch = det.crop_and_resize(img, b, 8)
        mirrored_patch = det.crop_and_resize(mirrored_img, mb, 8)
        assert np.array_equal(patch[:, ::-1], mirrored_patch)


class TestGlobalFeature:
    def test_width_and_determinism(self):
        rng = np.random.default_rng(5)
        img = rng.random((32, 32, 3))
        d = det.DetectionResult(hands=(box(0.5, 0.25, 0.25, 0.25),),
                                objects=(box(0.1, 0.1, 0.2, 0.2, cls="object"),))
        f1 = det.global_feature(img, d)
        f2 = det.global_feature(img, d)
        assert f1.shape == (det.GLOBAL_FEATURE_DIM,)
        assert np.array_equal(f1, f2)

    def test_missing_object_zeroes_slots(self):
        img = np.zeros((16, 16, 3))
        d = det.DetectionResult(hands=(box(0.5, 0.25, 0.25, 0.25),), objects=())
        f = det.global_feature(img, d)
        assert np.array_equal(f[-5:], np.zeros(5))
        # single hand: second hand slot zeroed too
        assert np.array_equal(f[64 + 5:64 + 10], np.zeros(5))
        assert f[64 + 4] == 1.0  # primary hand presence

    def test_translation_moves_thumbnail_and_box_slots(self):
        img = np.zeros((32, 32, 3))
        img[4:12, 4:12] = 1.0
        shifted = np.zeros((32, 32, 3))
        shifted[4:12, 12:20] = 1.0
        d1 = det.DetectionResult(hands=(box(0.125, 0.125, 0.25, 0.25),), objects=())
        d2 = det.DetectionResult(hands=(box(0.375, 0.125, 0.25, 0.25),), objects=())
        f1 = det.global_feature(img, d1)
        f2 = det.global_feature(shifted, d2)
        # thumbnail differs, and the recomputed-by-definition slots match
        assert not np.array_equal(f1[:64], f2[:64])
        thumb = det.bilinear_resample(shifted.mean(axis=2), 0.0, 0.0, 32.0, 32.0, 8)
        assert np.array_equal(f2[:64], thumb.ravel())
        assert f2[64] == pytest.approx(f1[64] + 0.25)  # center-x slot shifted


class TestImages:
    def test_ppm_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        img = (rng.random((6, 5, 3)) * 255).astype(np.uint8)
        p = tmp_path / "img.ppm"
        det.write_image(p, img)
        back = det.read_image(p)
        assert np.array_equal((back * 255).round().astype(np.uint8), img)

    def test_pgm_round_trip(self, tmp_path):
        img = np.linspace(0, 1, 20).reshape(4, 5)
        p = tmp_path / "img.pgm"
        det.write_image(p, img)
        back = det.read_image(p)
        assert back.shape == (4, 5)
        assert np.abs(back - img).max() <= 0.5 / 255

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.ppm"
        p.write_bytes(b"P7\n2 2\n255\n" + bytes(12))
        with pytest.raises(ParseError):
            det.read_image(p)


class TestManifest:
    def test_round_trip(self, tmp_path):
        records = [record(), record(frame_idx=1, grasp_id=4, hand_l=box(0.0, 0.0, 0.2, 0.2, side="left"))]
        path = tmp_path / "manifest.txt"
        det.write_manifest(records, path)
        back = det.read_manifest(path)
        assert len(back) == 2
        assert back[0].hand_r == records[0].hand_r
        assert back[1].hand_l == records[1].hand_l
        assert back[0].obj == records[0].obj
        assert back[1].grasp_id == 4

    def test_missing_boxes_round_trip(self, tmp_path):
        r = record(hand_l=None, obj=None)
        path = tmp_path / "manifest.txt"
        det.write_manifest([r], path)
        back = det.read_manifest(path)[0]
        assert back.hand_l is None and back.obj is None

    def test_bad_line(self, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("one two\n")
        with pytest.raises(ParseError, match="line 1"):
            det.read_manifest(p)

    def test_episode_grouping_sorted_by_frame(self, tmp_path):
        records = [record(frame_idx=1), record(frame_idx=0),
                   record(episode_id="e1", frame_idx=0)]
        groups = det.episodes_of(records)
        assert list(groups) == ["e0", "e1"]
        assert [r.frame_idx for r in groups["e0"]] == [0, 1]
