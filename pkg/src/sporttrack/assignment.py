"""Optimal and gated bipartite matching between tracks and detections.

Forbidden pairs are marked with FORBIDDEN (float infinity) directly in the
cost matrix and are handled natively: the solver never substitutes a large
finite constant, so gate semantics stay exact. Among all matchings that
respect the forbidden entries, the solver returns one of maximum cardinality
with minimum total cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import (
    BoundingBox,
    boxes_to_array,
    centers_array,
    distance_matrix,
    iou_matrix,
)

FORBIDDEN = float("inf")


@dataclass
class Matching:
    """Pairs of (row, col) indices plus the indices left unmatched on each side."""

    pairs: List[Tuple[int, int]]
    unmatched_rows: List[int]
    unmatched_cols: List[int]


def _finish(costs: np.ndarray, pairs: List[Tuple[int, int]]) -> Matching:
    n, m = costs.shape
    pairs = sorted(pairs)
    matched_rows = {i for i, _ in pairs}
    matched_cols = {j for _, j in pairs}
    return Matching(pairs,
                    [i for i in range(n) if i not in matched_rows],
                    [j for j in range(m) if j not in matched_cols])


def solve_assignment(costs: np.ndarray) -> Matching:
    """Minimum-cost matching of maximum feasible cardinality.

    costs is an (n, m) array of finite values, with FORBIDDEN marking pairs
    that must never be matched. Ties between equal-cost optima resolve
    deterministically (fixed scan order, favouring low indices).
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2:
        raise ValueError(f"cost matrix must be 2-d, got shape {costs.shape}")
    if np.isnan(costs).any() or np.isneginf(costs).any():
        raise ValueError("cost entries must be finite or FORBIDDEN")
    n, m = costs.shape
    allowed = np.isfinite(costs)
    if n == 0 or m == 0 or not allowed.any():
        return _finish(costs, [])

    # A row and column that only tolerate each other leave nothing to optimise;
    # this covers most frames of well-separated players without running the solver.
    if allowed.sum(axis=1).max() <= 1 and allowed.sum(axis=0).max() <= 1:
        rows, cols = np.nonzero(allowed)
        return _finish(costs, list(zip(rows.tolist(), cols.tolist())))

    # Maximum feasible cardinality: a full assignment on the indicator matrix
    # uses as few forbidden cells as possible.
    indicator = np.where(allowed, 0.0, 1.0)
    rows, cols = linear_sum_assignment(indicator)
    cardinality = int(min(n, m) - round(indicator[rows, cols].sum()))
    if cardinality == 0:
        return _finish(costs, [])

    if cardinality == min(n, m):
        rows, cols = linear_sum_assignment(costs)
        pairs = list(zip(rows.tolist(), cols.tolist()))
    else:
        # Zero-cost dummy rows and columns absorb whatever cannot be matched,
        # turning the partial problem into a full one without fake penalties.
        # Dummy-dummy cells stay forbidden so every dummy eats a real index,
        # which forces exactly `cardinality` real pairs.
        size = n + m - cardinality
        padded = np.full((size, size), FORBIDDEN)
        padded[:n, :m] = costs
        padded[:n, m:] = 0.0
        padded[n:, :m] = 0.0
        rows, cols = linear_sum_assignment(padded)
        pairs = [(i, j) for i, j in zip(rows.tolist(), cols.tolist())
                 if i < n and j < m]
    assert all(allowed[i, j] for i, j in pairs)
    return _finish(costs, pairs)


@dataclass
class MotionCandidate:
    """What the motion cost needs to know about one track.

    predicted: filter prediction for the current frame.
    last_obs: most recent real observation, if any.
    prior_obs: observation a few frames before last_obs, None while the
        history is too short to define a direction.
    """

    predicted: BoundingBox
    last_obs: Optional[BoundingBox] = None
    prior_obs: Optional[BoundingBox] = None


def build_motion_cost(tracks: Sequence[MotionCandidate],
                      detections: Sequence[BoundingBox],
                      momentum_weight: float,
                      iou_gate: float) -> np.ndarray:
    """Association cost of (1 - IoU) plus a direction-consistency penalty.

    The penalty compares the track's historical direction (prior_obs to
    last_obs) with the direction implied by taking the candidate detection
    (last_obs to detection), scaled to [0, momentum_weight]. It is dropped
    for tracks without usable history and for zero displacements. Pairs
    whose predicted-box IoU falls below iou_gate are FORBIDDEN.
    """
    pred = boxes_to_array([t.predicted for t in tracks])
    dets = boxes_to_array(list(detections))
    overlap = iou_matrix(pred, dets)
    costs = 1.0 - overlap

    if momentum_weight != 0.0 and len(tracks) and len(dets):
        det_centers = centers_array(dets)
        for i, track in enumerate(tracks):
            if track.last_obs is None or track.prior_obs is None:
                continue
            c_prior = np.array([track.prior_obs.x + track.prior_obs.w / 2,
                                track.prior_obs.y + track.prior_obs.h / 2])
            c_last = np.array([track.last_obs.x + track.last_obs.w / 2,
                               track.last_obs.y + track.last_obs.h / 2])
            hist = c_last - c_prior
            if hist[0] == 0 and hist[1] == 0:
                continue
            hist_angle = math.atan2(hist[1], hist[0])
            step = det_centers - c_last
            moving = (step[:, 0] != 0) | (step[:, 1] != 0)
            cand_angle = np.arctan2(step[:, 1], step[:, 0])
            delta = np.abs(cand_angle - hist_angle) % (2 * math.pi)
            delta = np.minimum(delta, 2 * math.pi - delta)
            costs[i, moving] += momentum_weight * delta[moving] / math.pi
    costs[overlap < iou_gate] = FORBIDDEN
    return costs


def gated_distance_match(track_boxes: Sequence[BoundingBox],
                         det_boxes: Sequence[BoundingBox],
                         threshold: float) -> Matching:
    """Optimal assignment on center distances; pairs at or beyond threshold
    are FORBIDDEN, so every returned pair sits strictly inside the gate."""
    if threshold <= 0:
        raise ValueError(f"distance threshold must be positive, got {threshold}")
    distances = distance_matrix(boxes_to_array(list(track_boxes)),
                                boxes_to_array(list(det_boxes)))
    costs = np.where(distances < threshold, distances, FORBIDDEN)
    return solve_assignment(costs)
