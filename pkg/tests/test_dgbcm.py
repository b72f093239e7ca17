import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detgrasp.dgbcm import (
    DetectionBox,
    DomainError,
    LabelNotFound,
    MalformedBox,
    NoGraspInBox,
    dgbcm_select,
    index_detections,
    point_in_box,
)
from detgrasp.geometry import GraspPose

from .oracles import brute_force_select


def g(x, y, q, theta=0.0, width=10.0):
    return GraspPose(float(x), float(y), theta, width, q)


CUP = DetectionBox("cup", 0.9, 0, 0, 100, 100)


class TestExamples:
    def test_best_inside_beats_better_outside(self):
        det = index_detections([CUP])
        r = dgbcm_select(det, [g(10, 10, 0.9), g(50, 50, 0.7), g(150, 150, 0.95)], "cup")
        assert r.selected.quality == 0.9
        assert r.candidates_considered == 2 and r.discarded == 1

    def test_two_instances(self):
        det = index_detections([CUP, DetectionBox("cup", 0.5, 200, 0, 300, 100)])
        r = dgbcm_select(det, [g(50, 50, 0.6), g(250, 50, 0.8)], "cup")
        assert r.selected.quality == 0.8
        assert r.matched_box.x1 == 200
        assert [b.score for b, _ in r.per_instance_best] == [0.9, 0.5]

    def test_boundary_is_inside(self):
        assert point_in_box(100, 0, CUP) and not point_in_box(100.0001, 0, CUP)
        assert dgbcm_select(index_detections([CUP]), [g(100, 100, 0.3)], "cup").selected.quality == 0.3

    def test_errors(self):
        det = index_detections([CUP])
        with pytest.raises(LabelNotFound) as e:
            dgbcm_select(det, [g(1, 1, 0.5)], "apple")
        assert e.value.kind == "LabelNotFound" and isinstance(e.value, DomainError)
        with pytest.raises(NoGraspInBox):
            dgbcm_select(det, [g(150, 150, 0.5)], "cup")
        with pytest.raises(NoGraspInBox):
            dgbcm_select(det, [], "cup")


class TestGrouping:
    def test_groups(self):
        det = index_detections([CUP, DetectionBox("apple", 0.4, 1, 1, 2, 2), CUP])
        assert sorted(det) == ["apple", "cup"]
        assert len(det["cup"]) == 2  # duplicates kept
        assert len(det.boxes()) == 3

    def test_dict_and_tuple_inputs(self):
        det = index_detections([CUP.to_dict(), ("apple", 0.5, 0, 0, 1, 1)])
        assert det["cup"][0] == CUP

    @pytest.mark.parametrize("bad", [
        ("cup", 0.5, 10, 0, 5, 5),
        ("cup", 1.5, 0, 0, 5, 5),
        ("", 0.5, 0, 0, 5, 5),
        {"label": "cup", "score": 0.5},
    ])
    def test_malformed(self, bad):
        with pytest.raises(MalformedBox):
            index_detections([bad])


coord = st.integers(0, 20)
grasps = st.lists(st.tuples(coord, coord, st.integers(0, 5), st.integers(0, 3)), min_size=0, max_size=12)
boxes = st.lists(
    st.tuples(st.sampled_from(["a", "b"]), st.integers(0, 4), coord, coord, st.integers(0, 10), st.integers(0, 10)),
    min_size=1, max_size=6,
)


def build(box_specs, grasp_specs):
    bx = [DetectionBox(l, s / 4, x, y, x + w, y + h) for l, s, x, y, w, h in box_specs]
    gs = [g(x, y, q / 5, theta=t * 0.3) for x, y, q, t in grasp_specs]
    return bx, gs


def outcome(fn):
    try:
        return fn()
    except DomainError as e:
        return type(e)


class TestOracle:
    @settings(max_examples=300, deadline=None)
    @given(boxes, grasps, st.sampled_from(["a", "b", "c"]))
    def test_matches_brute_force(self, box_specs, grasp_specs, label):
        bx, gs = build(box_specs, grasp_specs)
        got = outcome(lambda: dgbcm_select(index_detections(bx), gs, label))
        want = outcome(lambda: brute_force_select(bx, gs, label))
        if isinstance(want, type):
            assert got is want
        else:
            assert (got.selected, got.matched_box) == want

    @settings(max_examples=100, deadline=None)
    @given(boxes, grasps, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, box_specs, grasp_specs, rnd):
        bx, gs = build(box_specs, grasp_specs)
        ref = outcome(lambda: dgbcm_select(index_detections(bx), gs, "a"))
        rnd.shuffle(bx)
        rnd.shuffle(gs)
        got = outcome(lambda: dgbcm_select(index_detections(bx), gs, "a"))
        assert got == ref

    @settings(max_examples=100, deadline=None)
    @given(boxes, grasps)
    def test_outside_candidate_is_irrelevant(self, box_specs, grasp_specs):
        bx, gs = build(box_specs, grasp_specs)
        det = index_detections(bx)
        ref = outcome(lambda: dgbcm_select(det, gs, "a"))
        got = outcome(lambda: dgbcm_select(det, gs + [g(500, 500, 1.0)], "a"))
        assert got == ref

    @settings(max_examples=100, deadline=None)
    @given(boxes, grasps)
    def test_better_inside_candidate_wins(self, box_specs, grasp_specs):
        bx, gs = build(box_specs, grasp_specs)
        det = index_detections(bx)
        if "a" not in det:
            return
        b = det["a"][0]
        top = g(b.x1, b.y1, 1.0, width=99.0)
        gs = [x for x in gs if x.quality < 1.0]
        assert dgbcm_select(det, gs + [top], "a").selected == top
