"""Dataset-level grasp accuracy.

Each scene contributes one prediction: the box-matched grasp for its target
label when it names one, otherwise its top-quality candidate. Accuracy is
correct scenes over scenes.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from ..dgbcm import DomainError, dgbcm_select, index_detections
from ..geometry import Thresholds, decode_grasp_maps, grasp_correct
from .formats import FORMAT_VERSION

TIE_BREAK = "quality descending, then lower (y, x) of the grasp centre"
ALL = "_all"


def scene_candidates(scene):
    if scene.grasp_candidates is not None:
        return list(scene.grasp_candidates)
    q = scene.grasp_maps.quality
    return decode_grasp_maps(scene.grasp_maps, top_k=q.size)


def evaluate_scene(scene, thresholds: Thresholds = Thresholds()):
    candidates = scene_candidates(scene)
    result = {"id": scene.scene_id, "target": scene.target, "prediction": None, "correct": False, "reason": None}
    if scene.target is not None:
        gts = list(scene.ground_truth.get(scene.target, ()))
        try:
            pred = dgbcm_select(index_detections(scene.detections), candidates, scene.target).selected
        except DomainError as exc:
            result["reason"] = exc.kind
            pred = None
    else:
        gts = [r for rects in scene.ground_truth.values() for r in rects]
        pred = min(candidates, key=lambda g: g.sort_key()) if candidates else None
        if pred is None:
            result["reason"] = "NoCandidates"
    if not gts:
        raise ValueError(f"scene {scene.scene_id} has no ground truth for its target")
    if pred is not None:
        result["prediction"] = pred.to_dict()
        result["correct"] = grasp_correct(pred, gts, thresholds)
        if not result["correct"]:
            result["reason"] = "BelowThreshold"
    return result


def evaluate_dataset(scenes, thresholds: Thresholds = Thresholds(), workers=1):
    scenes = list(scenes)
    if not scenes:
        raise ValueError("cannot evaluate an empty scene list")
    if workers <= 1:
        results = [evaluate_scene(s, thresholds) for s in scenes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: evaluate_scene(s, thresholds), scenes))
    results.sort(key=lambda r: (r["id"], repr(r)))

    per_category = {}
    for r in results:
        cat = per_category.setdefault(r["target"] or ALL, {"n_correct": 0, "n_scenes": 0})
        cat["n_scenes"] += 1
        cat["n_correct"] += int(r["correct"])
    for cat in per_category.values():
        cat["acc"] = cat["n_correct"] / cat["n_scenes"]
    n_c = sum(int(r["correct"]) for r in results)
    return {
        "format_version": FORMAT_VERSION,
        "acc": n_c / len(results),
        "n_correct": n_c,
        "n_gt": len(results),
        "n_gt_counts": "scenes",
        "per_category": per_category,
        "thresholds": {"iou": thresholds.iou, "angle_deg": thresholds.angle_deg},
        "height_ratio": thresholds.height_ratio,
        "tie_break": TIE_BREAK,
        "scenes": results,
    }
