"""Tracking quality scores: higher-order accuracy, CLEAR accuracy, identity F1.

All three metrics consume a ground-truth and a predicted SequenceResult with
at most one box per identity per frame. Frame-level box matching reuses the
exact assignment solver, so "maximize matched count, then total overlap" is
solved optimally rather than greedily.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .assignment import FORBIDDEN, Matching, solve_assignment
from .contracts import SequenceResult
from .geometry import boxes_to_array, iou_matrix

DEFAULT_ALPHA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass
class MetricsReport:
    """Ratios are in [0, 1]; presentation layers scale them by 100."""

    hota: float
    det_a: float
    ass_a: float
    mota: float
    idf1: float
    ids: int
    frag: int
    fn: int = 0
    fp: int = 0
    gt_total: int = 0


def frame_match(gt_boxes: np.ndarray, pred_boxes: np.ndarray,
                alpha: float, overlap: Optional[np.ndarray] = None) -> Matching:
    """Optimal one-to-one matching of boxes with IoU >= alpha.

    Maximum matched count first, then maximum total IoU; pass a precomputed
    IoU matrix via `overlap` to skip recomputing it per threshold.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if overlap is None:
        overlap = iou_matrix(gt_boxes, pred_boxes)
    costs = np.where(overlap >= alpha, 1.0 - overlap, FORBIDDEN)
    return solve_assignment(costs)


@dataclass
class _Frame:
    gt_ids: List[int]
    pred_ids: List[int]
    overlap: np.ndarray


def _index_frames(gt: SequenceResult, pred: SequenceResult) -> List[_Frame]:
    frames = []
    for f in sorted(set(gt) | set(pred)):
        g = gt.get(f, [])
        p = pred.get(f, [])
        if g and p:
            overlap = iou_matrix(boxes_to_array([b for _, b in g]),
                                 boxes_to_array([b for _, b in p]))
        else:
            overlap = np.zeros((len(g), len(p)))
        frames.append(_Frame([i for i, _ in g], [i for i, _ in p], overlap))
    return frames


def hota(gt: SequenceResult, pred: SequenceResult,
         alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID
         ) -> Tuple[float, float, float]:
    """(HOTA, DetA, AssA), each averaged over the localization threshold grid.

    Per threshold: DetA = TP/(TP+FN+FP); AssA averages, over matched
    detections, the fraction of their identity pair's joint detections that
    agree. The per-pair form below is the per-detection definition folded
    by counting: a pair seen t times contributes t * t/(gt_count+pred_count-t).
    """
    frames = _index_frames(gt, pred)
    gt_count = Counter(i for fr in frames for i in fr.gt_ids)
    pred_count = Counter(i for fr in frames for i in fr.pred_ids)

    hota_sum = deta_sum = assa_sum = 0.0
    for alpha in alpha_grid:
        tp_pairs: Counter = Counter()
        tp = fn = fp = 0
        for fr in frames:
            if fr.gt_ids and fr.pred_ids:
                match = frame_match(None, None, alpha, overlap=fr.overlap)
            else:
                match = Matching((), tuple(range(len(fr.gt_ids))),
                                 tuple(range(len(fr.pred_ids))))
            tp += len(match.pairs)
            fn += len(match.unmatched_rows)
            fp += len(match.unmatched_cols)
            for i, j in match.pairs:
                tp_pairs[(fr.gt_ids[i], fr.pred_ids[j])] += 1
        if tp == 0 and fn == 0 and fp == 0:
            deta = assa = 1.0
        elif tp == 0:
            deta = assa = 0.0
        else:
            deta = tp / (tp + fn + fp)
            assa = sum(t * t / (gt_count[g] + pred_count[p] - t)
                       for (g, p), t in tp_pairs.items()) / tp
        deta_sum += deta
        assa_sum += assa
        hota_sum += math.sqrt(deta * assa)
    k = len(alpha_grid)
    return hota_sum / k, deta_sum / k, assa_sum / k


def clear_mot(gt: SequenceResult, pred: SequenceResult
              ) -> Tuple[float, int, int, int, int]:
    """(MOTA, IDS, Frag, FN, FP) at the 0.5 IoU working point.

    Matching prefers continuing the previous frame's correspondence when it
    still overlaps, then matches leftovers optimally. A switch is counted
    against the last identity a ground-truth track was ever matched to; a
    fragmentation whenever a matched track resumes after unmatched frames.
    """
    frames = sorted(set(gt) | set(pred))
    fn = fp = ids = 0
    gt_total = sum(len(v) for v in gt.values())
    prev_match: Dict[int, int] = {}
    last_match: Dict[int, int] = {}
    history: Dict[int, List[bool]] = {}
    for f in frames:
        g = gt.get(f, [])
        p = pred.get(f, [])
        overlap = iou_matrix(boxes_to_array([b for _, b in g]),
                             boxes_to_array([b for _, b in p])) \
            if g and p else np.zeros((len(g), len(p)))
        pred_index = {pid: j for j, (pid, _) in enumerate(p)}
        pairs: List[Tuple[int, int]] = []
        used_g: set = set()
        used_p: set = set()
        for gi, (gid, _) in enumerate(g):
            pj = pred_index.get(prev_match.get(gid))
            if pj is not None and pj not in used_p and overlap[gi, pj] >= 0.5:
                pairs.append((gi, pj))
                used_g.add(gi)
                used_p.add(pj)
        free_g = [i for i in range(len(g)) if i not in used_g]
        free_p = [j for j in range(len(p)) if j not in used_p]
        if free_g and free_p:
            match = frame_match(None, None, 0.5,
                               overlap=overlap[np.ix_(free_g, free_p)])
            pairs += [(free_g[a], free_p[b]) for a, b in match.pairs]
        fn += len(g) - len(pairs)
        fp += len(p) - len(pairs)
        matched_g = {gi for gi, _ in pairs}
        current: Dict[int, int] = {}
        for gi, pj in pairs:
            gid, pid = g[gi][0], p[pj][0]
            if gid in last_match and last_match[gid] != pid:
                ids += 1
            last_match[gid] = pid
            current[gid] = pid
        prev_match = current
        for gi, (gid, _) in enumerate(g):
            history.setdefault(gid, []).append(gi in matched_g)

    frag = 0
    for flags in history.values():
        seen = in_gap = False
        for flag in flags:
            if flag:
                if seen and in_gap:
                    frag += 1
                seen, in_gap = True, False
            elif seen:
                in_gap = True
    mota = 1.0 - (fn + fp + ids) / gt_total if gt_total else 1.0
    return mota, ids, frag, fn, fp


def idf1(gt: SequenceResult, pred: SequenceResult) -> float:
    """Identity F1 under the best one-to-one identity correspondence.

    Counts, per identity pair, frames where their boxes overlap at IoU 0.5,
    then picks the bijection maximizing the total. Negated counts feed the
    exact solver; zero-overlap pads never change the optimum.
    """
    frames = _index_frames(gt, pred)
    overlap_count: Counter = Counter()
    for fr in frames:
        hit_g, hit_p = np.nonzero(fr.overlap >= 0.5)
        for gi, pj in zip(hit_g, hit_p):
            overlap_count[(fr.gt_ids[gi], fr.pred_ids[pj])] += 1

    gt_ids = sorted({i for fr in frames for i in fr.gt_ids})
    pred_ids = sorted({i for fr in frames for i in fr.pred_ids})
    idtp = 0
    if gt_ids and pred_ids and overlap_count:
        costs = np.zeros((len(gt_ids), len(pred_ids)))
        for (g, p), t in overlap_count.items():
            costs[gt_ids.index(g), pred_ids.index(p)] = -t
        match = solve_assignment(costs)
        idtp = int(-sum(costs[i, j] for i, j in match.pairs))
    gt_total = sum(len(fr.gt_ids) for fr in frames)
    pred_total = sum(len(fr.pred_ids) for fr in frames)
    denom = 2 * idtp + (gt_total - idtp) + (pred_total - idtp)
    return 2 * idtp / denom if denom else 1.0


def evaluate(gt: SequenceResult, pred: SequenceResult,
             alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> MetricsReport:
    h, deta, assa = hota(gt, pred, alpha_grid)
    mota, ids, frag, fn, fp = clear_mot(gt, pred)
    return MetricsReport(hota=h, det_a=deta, ass_a=assa, mota=mota,
                         idf1=idf1(gt, pred), ids=ids, frag=frag,
                         fn=fn, fp=fp,
                         gt_total=sum(len(v) for v in gt.values()))


_RATIO_FIELDS = [("HOTA", "hota"), ("DetA", "det_a"), ("AssA", "ass_a"),
                 ("MOTA", "mota"), ("IDF1", "idf1")]
_COUNT_FIELDS = [("IDS", "ids"), ("Frag", "frag"), ("FN", "fn"), ("FP", "fp")]


def format_report(report: MetricsReport, machine: bool = False) -> str:
    """Render scores scaled by 100, as commonly reported.

    machine=True emits `key=value` lines; otherwise an aligned table.
    """
    if machine:
        lines = [f"{label.lower()}={getattr(report, attr) * 100:.3f}"
                 for label, attr in _RATIO_FIELDS]
        lines += [f"{label.lower()}={getattr(report, attr)}"
                  for label, attr in _COUNT_FIELDS]
        return "\n".join(lines)
    lines = [f"{label:<5} {getattr(report, attr) * 100:8.3f}"
             for label, attr in _RATIO_FIELDS]
    lines += [f"{label:<5} {getattr(report, attr):8d}"
              for label, attr in _COUNT_FIELDS]
    return "\n".join(lines)
