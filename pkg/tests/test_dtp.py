import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ctrlf.dtp import DtpConfig, connected_component_boxes, dtp_proposals, morph_close, multi_threshold
from ctrlf.geometry import Box, iou

images = arrays(
    np.float64,
    st.tuples(st.integers(4, 24), st.integers(4, 24)),
    elements=st.floats(0.0, 1.0, width=64),
)


class TestConfig:
    def test_defaults_valid(self):
        cfg = DtpConfig()
        assert len(cfg.threshold_coeffs) == 4
        assert len(cfg.kernels) == 5

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            DtpConfig(threshold_coeffs=())
        with pytest.raises(ValueError):
            DtpConfig(threshold_coeffs=(0.0,))
        with pytest.raises(ValueError):
            DtpConfig(kernels=((0, 1),))
        with pytest.raises(ValueError):
            DtpConfig(connectivity=6)


class TestMultiThreshold:
    def test_uniform_image_all_background(self):
        img = np.full((5, 5), 0.5)
        (binary,) = multi_threshold(img, [1.0])
        assert not binary.any()

    def test_direct_evaluation(self):
        img = np.array([[0.0, 1.0], [1.0, 1.0]])
        (binary,) = multi_threshold(img, [1.0])  # mean 0.75
        assert binary.tolist() == [[True, False], [False, False]]

    @given(images)
    def test_foreground_nested_in_coefficient_order(self, img):
        lo, hi = multi_threshold(img, [0.5, 1.0])
        assert not (lo & ~hi).any()


class TestMorphClose:
    def test_identity_kernel(self):
        rng = np.random.default_rng(3)
        binary = rng.uniform(size=(9, 9)) < 0.3
        assert np.array_equal(morph_close(binary, 1, 1), binary)

    def test_bridges_gap(self):
        binary = np.zeros((1, 3), dtype=bool)
        binary[0, 0] = binary[0, 2] = True
        closed = morph_close(binary, 3, 1)
        assert closed[0, 1]

    def test_rejects_even_kernel(self):
        with pytest.raises(ValueError):
            morph_close(np.zeros((3, 3), dtype=bool), 2, 1)

    @settings(max_examples=60)
    @given(images, st.sampled_from([(3, 1), (3, 3), (5, 1), (5, 3)]))
    def test_idempotent(self, img, kernel):
        binary = img < 0.4
        kw, kh = kernel
        once = morph_close(binary, kw, kh)
        twice = morph_close(once, kw, kh)
        assert np.array_equal(once, twice)


class TestComponents:
    def test_empty_image(self):
        assert connected_component_boxes(np.zeros((6, 6), dtype=bool)) == []

    def test_single_rectangle(self):
        binary = np.zeros((6, 8), dtype=bool)
        binary[2:4, 3:6] = True  # 3 wide, 2 high
        (box,) = connected_component_boxes(binary)
        assert box == Box.from_corners(3, 2, 6, 4)
        assert (box.w, box.h) == (3, 2)

    def test_connectivity(self):
        binary = np.zeros((4, 4), dtype=bool)
        binary[0, 0] = binary[1, 1] = True
        assert len(connected_component_boxes(binary, connectivity=8)) == 1
        assert len(connected_component_boxes(binary, connectivity=4)) == 2

    def test_min_area_filter(self):
        binary = np.zeros((8, 8), dtype=bool)
        binary[0, 0] = True
        binary[4:6, 4:8] = True
        boxes = connected_component_boxes(binary, min_area=2)
        assert len(boxes) == 1
        assert boxes[0].area == 8

    def test_scan_order(self):
        binary = np.zeros((6, 6), dtype=bool)
        binary[4, 4] = True
        binary[0, 2] = True
        binary[2, 0] = True
        boxes = connected_component_boxes(binary)
        tops = [(b.y0, b.x0) for b in boxes]
        assert tops == sorted(tops, key=lambda t: (t[0], t[1]))


def synthetic_two_word_page():
    """Light page with two dark multi-blob 'words', well separated."""
    img = np.full((40, 120), 0.9)
    img[10:20, 10:40] = 0.1   # word one
    img[25:33, 70:110] = 0.15  # word two
    gt = [Box.from_corners(10, 10, 40, 20), Box.from_corners(70, 25, 110, 33)]
    return img, gt


class TestProposals:
    def test_blank_page(self):
        assert dtp_proposals(np.full((30, 30), 0.8)) == []

    def test_two_word_page_covered(self):
        img, gt = synthetic_two_word_page()
        props = dtp_proposals(img)
        for g in gt:
            assert any(iou(p, g) >= 0.25 for p in props)

    def test_no_duplicates_and_inside_bounds(self):
        img, _ = synthetic_two_word_page()
        props = dtp_proposals(img)
        corners = [p.corners() for p in props]
        assert len(set(corners)) == len(corners)
        h, w = img.shape
        for p in props:
            assert 0 <= p.x0 < p.x1 <= w
            assert 0 <= p.y0 < p.y1 <= h

    def test_dedup_never_adds(self):
        img, _ = synthetic_two_word_page()
        cfg = DtpConfig()
        total = 0
        for binary in multi_threshold(img, cfg.threshold_coeffs):
            for kw, kh in cfg.kernels:
                total += len(
                    connected_component_boxes(morph_close(binary, kw, kh), cfg.connectivity, cfg.min_box_area)
                )
        assert len(dtp_proposals(img, cfg)) <= total

    def test_invariant_under_exact_rescaling(self):
        img, _ = synthetic_two_word_page()
        base = dtp_proposals(img)
        for a in (0.5, 2.0, 0.25):
            scaled = dtp_proposals(img * a)
            assert [p.corners() for p in scaled] == [p.corners() for p in base]

    def test_inverted_polarity(self):
        img, gt = synthetic_two_word_page()
        inv = img.max() - img
        props = dtp_proposals(inv, DtpConfig(invert=True))
        for g in gt:
            assert any(iou(p, g) >= 0.25 for p in props)
