import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lunarhda.errors import BoundsError, ParseError
from lunarhda.hazard_map import (
    CandidateRegion,
    Detection,
    HazardMask,
    build_mask,
    extract_candidates,
    load_detections,
    quadtree_decompose,
    save_detections,
)

from oracles import aligned_free_squares, rasterize_bruteforce, reference_quadtree


def _write(tmp_path, text):
    p = tmp_path / "det.json"
    p.write_text(text, encoding="utf-8")
    return p


# --- load_detections ---------------------------------------------------------

def test_load_empty_array(tmp_path):
    assert load_detections(_write(tmp_path, "[]")) == []


def test_load_single_record(tmp_path):
    dets = load_detections(_write(tmp_path, '[{"class":"rock","bbox":[10,10,20,20],"score":0.9}]'))
    assert dets == [Detection("rock", (10, 10, 20, 20), 0.9)]


def test_load_preserves_order_and_classes(tmp_path):
    recs = [
        {"class": "crater", "bbox": [0, 0, 5, 5], "score": 0.7},
        {"class": "shadow", "bbox": [1, 2, 3, 4], "score": 0.6},
        {"class": "rock", "bbox": [7, 7, 9, 9], "score": 1},
    ]
    dets = load_detections(_write(tmp_path, json.dumps(recs)))
    assert [d.cls.value for d in dets] == ["crater", "shadow", "rock"]


def test_degenerate_bbox_rejected(tmp_path):
    with pytest.raises(BoundsError):
        load_detections(_write(tmp_path, '[{"class":"rock","bbox":[10,10,10,20],"score":0.9}]'))


def test_bbox_outside_image_rejected(tmp_path):
    p = _write(tmp_path, '[{"class":"rock","bbox":[10,10,120,20],"score":0.9}]')
    with pytest.raises(BoundsError):
        load_detections(p, width=100, height=100)


@pytest.mark.parametrize(
    "record, line",
    [
        ('{"class":"boulder","bbox":[1,1,2,2],"score":0.9}', 4),
        ('{"bbox":[1,1,2,2],"score":0.9}', 4),
        ('{"class":"rock","bbox":[1,1,2],"score":0.9}', 4),
        ('{"class":"rock","bbox":[1,1,2,2],"score":1.5}', 4),
        # unterminated object: the decoder notices at the next token
        ('{"class":"rock","bbox":[1,1,2,2],"score":0.9', 5),
    ],
)
def test_malformed_record_reports_line(tmp_path, record, line):
    text = '[\n  {"class":"rock","bbox":[1,1,2,2],"score":0.9},\n\n  ' + record + "\n]"
    with pytest.raises(ParseError) as info:
        load_detections(_write(tmp_path, text))
    assert info.value.line == line


def test_save_load_round_trip(tmp_path):
    dets = [Detection("rock", (1.5, 2.25, 3.0, 4.0), 0.75), Detection("crater", (0, 0, 10, 10), 0.5)]
    save_detections(dets, tmp_path / "d.json")
    assert load_detections(tmp_path / "d.json") == dets


# --- build_mask --------------------------------------------------------------

def test_no_detections_gives_empty_mask():
    assert build_mask([], 40, 30).hazard_count == 0


def test_full_image_bbox_gives_full_mask():
    m = build_mask([Detection("rock", (0, 0, 40, 30), 1.0)], 40, 30)
    assert m.hazard_count == 40 * 30


def test_overlapping_boxes_match_bruteforce():
    boxes = [(3, 4, 17, 12), (10, 8, 25, 20.5)]
    dets = [Detection("rock", b, 0.9) for b in boxes]
    m = build_mask(dets, 32, 24)
    oracle = rasterize_bruteforce(boxes, 32, 24)
    np.testing.assert_array_equal(m.bits, oracle)
    assert m.hazard_count == 14 * 8 + 15 * 13 - 7 * 4


def test_low_score_detections_excluded():
    dets = [Detection("rock", (0, 0, 5, 5), 0.49), Detection("crater", (10, 10, 12, 12), 0.5)]
    assert build_mask(dets, 20, 20).hazard_count == 4
    assert build_mask(dets, 20, 20, score_threshold=0.4).hazard_count == 29


@settings(max_examples=60, deadline=None)
@given(
    boxes=st.lists(
        st.tuples(st.floats(-5, 30), st.floats(-5, 30), st.floats(0.1, 12), st.floats(0.1, 12)), max_size=5
    ),
    margin=st.sampled_from([0, 1, 2.5]),
)
def test_mask_matches_bruteforce_with_margin(boxes, margin):
    w, h = 27, 21
    rects = [(x, y, x + bw, y + bh) for x, y, bw, bh in boxes]
    dets = [Detection("shadow", r, 1.0) for r in rects]
    np.testing.assert_array_equal(build_mask(dets, w, h, margin).bits, rasterize_bruteforce(rects, w, h, margin))


# --- quadtree ----------------------------------------------------------------

def _leafset(leaves):
    return {(l.x, l.y, l.side, l.state) for l in leaves}


def test_all_free_single_leaf():
    leaves = quadtree_decompose(HazardMask(256, 256, np.zeros((256, 256))), 8)
    assert _leafset(leaves) == {(0, 0, 256, "free")}


def test_all_hazard_single_leaf():
    leaves = quadtree_decompose(HazardMask(256, 256, np.ones((256, 256))), 8)
    assert _leafset(leaves) == {(0, 0, 256, "hazard")}


def test_single_block_matches_reference():
    bits = np.zeros((256, 256), dtype=np.uint8)
    bits[100:108, 37:45] = 1
    leaves = quadtree_decompose(HazardMask(256, 256, bits), 8)
    assert _leafset(leaves) == reference_quadtree(bits, 8)
    for l in leaves:
        if l.state == "free":
            assert not bits[l.y : l.y + l.side, l.x : l.x + l.side].any()


def test_padding_is_hazard():
    leaves = quadtree_decompose(HazardMask(96, 64, np.zeros((64, 96))), 8)
    assert _leafset(leaves) == reference_quadtree(np.zeros((64, 96)), 8)
    assert all(l.x + l.side <= 96 and l.y + l.side <= 64 for l in leaves if l.state == "free")


@st.composite
def masks(draw, max_side=70):
    w = draw(st.integers(1, max_side))
    h = draw(st.integers(1, max_side))
    bits = np.zeros((h, w), dtype=np.uint8)
    for _ in range(draw(st.integers(0, 6))):
        x, y = draw(st.integers(0, w - 1)), draw(st.integers(0, h - 1))
        bits[y : y + draw(st.integers(1, 20)), x : x + draw(st.integers(1, 20))] = 1
    return HazardMask(w, h, bits)


@settings(max_examples=150, deadline=None)
@given(mask=masks(), min_leaf=st.sampled_from([1, 2, 4, 8]))
def test_quadtree_equals_reference_and_tiles(mask, min_leaf):
    leaves = quadtree_decompose(mask, min_leaf)
    assert _leafset(leaves) == reference_quadtree(mask.bits, min_leaf)
    n = 1 << (max(mask.width, mask.height) - 1).bit_length()
    cover = np.zeros((n, n), dtype=int)
    for l in leaves:
        cover[l.y : l.y + l.side, l.x : l.x + l.side] += 1
    assert np.all(cover == 1)


@settings(max_examples=150, deadline=None)
@given(mask=masks(), required=st.integers(1, 64), min_leaf=st.sampled_from([1, 4]))
def test_candidates_sound_and_complete(mask, required, min_leaf):
    cands = extract_candidates(quadtree_decompose(mask, min_leaf), required)
    for c in cands:
        assert c.x + c.side <= mask.width and c.y + c.side <= mask.height
        assert not mask.bits[c.y : c.y + c.side, c.x : c.x + c.side].any()
    # every aligned free square at least `required` and `min_leaf` wide lies in a candidate
    side = 1
    while side < max(required, min_leaf):
        side *= 2
    while side <= max(mask.width, mask.height):
        for x, y in aligned_free_squares(mask.bits, side):
            assert any(c.x <= x and c.y <= y and x + side <= c.x + c.side and y + side <= c.y + c.side
                       for c in cands)
        side *= 2


@settings(max_examples=100, deadline=None)
@given(mask=masks(), x=st.integers(0, 69), y=st.integers(0, 69), s=st.integers(1, 15))
def test_adding_a_detection_never_adds_candidate_area(mask, x, y, s):
    before = sum(c.area_px for c in extract_candidates(quadtree_decompose(mask, 2), 2))
    bits = mask.bits.copy()
    bits[y : y + s, x : x + s] = 1
    after = sum(c.area_px for c in extract_candidates(quadtree_decompose(HazardMask(mask.width, mask.height, bits), 2), 2))
    assert after <= before


def test_min_leaf_validation():
    with pytest.raises(ValueError):
        quadtree_decompose(HazardMask(4, 4, np.zeros((4, 4))), 0)


# --- extract_candidates --------------------------------------------------------

def test_required_larger_than_image_gives_nothing():
    leaves = quadtree_decompose(HazardMask(256, 256, np.zeros((256, 256))), 8)
    assert extract_candidates(leaves, 512) == []


def test_all_free_one_candidate():
    leaves = quadtree_decompose(HazardMask(256, 256, np.zeros((256, 256))), 8)
    (c,) = extract_candidates(leaves, 128)
    assert (c.x, c.y, c.side, c.area_px) == (0, 0, 256, 65536)
    assert c.center == (127.5, 127.5)


def test_checkerboard_candidates_match_free_square_scan():
    bits = np.zeros((256, 256), dtype=np.uint8)
    for by in range(4):
        for bx in range(4):
            if (bx + by) % 2:
                bits[by * 64 : (by + 1) * 64, bx * 64 : (bx + 1) * 64] = 1
    cands = extract_candidates(quadtree_decompose(HazardMask(256, 256, bits), 8), 64)
    assert {(c.x, c.y) for c in cands} == aligned_free_squares(bits, 64)
    assert all(c.side == 64 for c in cands)
    assert [(c.y, c.x) for c in cands] == sorted((c.y, c.x) for c in cands)


def test_candidate_ordering_and_area():
    bits = np.ones((256, 256), dtype=np.uint8)
    bits[0:128, 128:256] = 0
    bits[192:256, 0:64] = 0
    bits[128:192, 192:256] = 0
    cands = extract_candidates(quadtree_decompose(HazardMask(256, 256, bits), 8), 32, resolution=0.1)
    assert [(c.x, c.y, c.side) for c in cands] == [(128, 0, 128), (192, 128, 64), (0, 192, 64)]
    assert cands[0].area_m2 == pytest.approx((128 * 0.1) ** 2)
    cands = extract_candidates(quadtree_decompose(HazardMask(256, 256, bits), 8), 32,
                               resolution=lambda u, v: 0.001 * v)
    assert cands[1].area_m2 == pytest.approx((64 * 0.001 * 159.5) ** 2)


def test_region_contains_is_half_open():
    r = CandidateRegion(10, 20, 8)
    u = np.array([10, 17.999, 18, 9.999])
    assert list(r.contains(u, np.full(4, 20.0))) == [True, True, False, False]
