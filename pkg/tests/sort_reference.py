"""Minimal SORT baseline used as an oracle by the acceptance tests.

Written independently of the package tracker on purpose: constant-velocity
prediction straight from the last two observations, IoU-gated Hungarian
matching, immediate emission of the raw detection box for every matched or
newly spawned track. No observation-centric extras of any kind. On clean,
well-separated linear motion this is exactly what the full tracker must
collapse to once its momentum, re-update and recovery stages are disabled.
"""

from typing import Dict, List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from sporttrack.contracts import Detection
from sporttrack.geometry import BoundingBox


def _iou(a: BoundingBox, b: BoundingBox) -> float:
    left = max(a.x, b.x)
    top = max(a.y, b.y)
    right = min(a.x + a.w, b.x + b.w)
    bottom = min(a.y + a.h, b.y + b.h)
    if right <= left or bottom <= top:
        return 0.0
    inter = (right - left) * (bottom - top)
    return inter / (a.w * a.h + b.w * b.h - inter)


class _Track:
    def __init__(self, tid: int, box: BoundingBox):
        self.id = tid
        self.last_center = np.array([box.x + box.w / 2, box.y + box.h / 2])
        self.velocity = np.zeros(2)
        self.size = np.array([box.w, box.h])
        self.steps = 0  # frames since the last accepted observation
        self.misses = 0

    def predicted_box(self) -> BoundingBox:
        c = self.last_center + self.velocity * self.steps
        return BoundingBox(c[0] - self.size[0] / 2, c[1] - self.size[1] / 2,
                           self.size[0], self.size[1])

    def update(self, box: BoundingBox) -> None:
        center = np.array([box.x + box.w / 2, box.y + box.h / 2])
        self.velocity = (center - self.last_center) / self.steps
        self.last_center = center
        self.size = np.array([box.w, box.h])
        self.steps = 0
        self.misses = 0


def run_plain_sort(detections: Dict[int, List[Detection]],
                   det_conf: float = 0.1,
                   iou_gate: float = 0.3,
                   spawn_thresh: float = 0.7,
                   max_age: int = 30,
                   ) -> Dict[int, List[Tuple[int, BoundingBox]]]:
    tracks: List[_Track] = []
    next_id = 1
    result: Dict[int, List[Tuple[int, BoundingBox]]] = {}
    for frame in range(1, max(detections, default=0) + 1):
        for track in tracks:
            track.steps += 1
        dets = [d for d in detections.get(frame, []) if d.score >= det_conf]

        matched_tracks, matched_dets = set(), set()
        if tracks and dets:
            iou = np.array([[_iou(t.predicted_box(), d.box) for d in dets]
                            for t in tracks])
            rows, cols = linear_sum_assignment(-iou)
            for r, c in zip(rows, cols):
                if iou[r, c] < iou_gate:
                    continue
                tracks[r].update(dets[c].box)
                result.setdefault(frame, []).append((tracks[r].id, dets[c].box))
                matched_tracks.add(r)
                matched_dets.add(c)

        for idx, det in enumerate(dets):
            if idx in matched_dets or det.score < spawn_thresh:
                continue
            tracks.append(_Track(next_id, det.box))
            result.setdefault(frame, []).append((next_id, det.box))
            next_id += 1

        survivors = []
        for idx, track in enumerate(tracks):
            if idx not in matched_tracks and track.steps > 0:
                track.misses += 1
            if track.misses <= max_age:
                survivors.append(track)
        tracks = survivors
    return result
