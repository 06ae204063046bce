"""Offline identity repair per sport, then gap interpolation.

The tracker leaves fragments: every exit/re-entry or long occlusion starts a
new raw id. The pipelines here stitch fragments back together using the
queue-and-appearance scheme (basketball), three rounds of gated greedy
merging (football), or a position-only queue (volleyball), and report every
decision they take so results can be audited after the fact.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .contracts import SequenceResult, Sport, sort_result
from .errors import (
    DimensionMismatchError,
    NoEmbeddingsError,
    OverlappingFramesError,
    ZeroVectorError,
)
from .geometry import BoundingBox, Point, center


@dataclass
class Tracklet:
    """One identity fragment: boxes over a frame span, sparse embeddings."""

    id: int
    frames: List[int]
    boxes: Dict[int, BoundingBox]
    embeddings: Dict[int, np.ndarray] = field(default_factory=dict)
    feature: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.frames:
            raise ValueError("tracklet needs at least one frame")
        self.frames = sorted(self.frames)
        missing = [f for f in self.frames if f not in self.boxes]
        if missing:
            raise ValueError(f"tracklet {self.id} missing boxes for frames {missing}")

    @property
    def entry_frame(self) -> int:
        return self.frames[0]

    @property
    def exit_frame(self) -> int:
        return self.frames[-1]

    @property
    def entry_point(self) -> Point:
        return center(self.boxes[self.entry_frame])

    @property
    def exit_point(self) -> Point:
        return center(self.boxes[self.exit_frame])

    def first_area(self) -> float:
        return self.boxes[self.entry_frame].area

    def embedding_sequence(self) -> List[np.ndarray]:
        return [self.embeddings[f] for f in self.frames if f in self.embeddings]


@dataclass
class SportPreset:
    """Post-processing knobs; defaults follow the per-sport configuration."""

    sport: Sport
    player_cap: Optional[int]
    volleyball_dist: float = 400.0
    round_thresholds: Tuple[float, float, float] = (0.1, 0.2, 0.4)
    ema_alpha: float = 0.9

    def __post_init__(self):
        if self.player_cap is not None and self.player_cap <= 0:
            raise ValueError("player cap must be positive when present")
        if not (self.round_thresholds[0] < self.round_thresholds[1]
                < self.round_thresholds[2]):
            raise ValueError("round thresholds must strictly increase")

    @classmethod
    def for_sport(cls, sport: Sport) -> "SportPreset":
        caps = {Sport.BASKETBALL: 10, Sport.VOLLEYBALL: 12, Sport.FOOTBALL: None}
        return cls(sport=sport, player_cap=caps[sport])


@dataclass
class MergeRecord:
    """One accepted re-association, with the evidence it was accepted on."""

    kept_id: int
    absorbed_id: int
    time_gap: int
    round_index: Optional[int] = None  # football round, 0-based
    embedding_distance: Optional[float] = None
    cosine_similarity: Optional[float] = None
    center_dist: Optional[float] = None


@dataclass
class PostprocessReport:
    merges: List[MergeRecord] = field(default_factory=list)
    # tracklets granted a fresh identity while the queue was empty and
    # concurrency never forced one; worth a look when it happens
    flagged_new_identities: List[int] = field(default_factory=list)


def ema_update(feature: np.ndarray, det_feature: np.ndarray, alpha: float) -> np.ndarray:
    """Blend a running feature with a new observation: alpha keeps the old."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    feature = np.asarray(feature, dtype=float)
    det_feature = np.asarray(det_feature, dtype=float)
    if feature.shape != det_feature.shape:
        raise DimensionMismatchError(
            f"feature dims differ: {feature.shape} vs {det_feature.shape}")
    return alpha * feature + (1 - alpha) * det_feature


def ema_feature(embeddings: Sequence[np.ndarray], alpha: float) -> Optional[np.ndarray]:
    """Fold a frame-ordered embedding sequence into one summary vector."""
    feature = None
    for emb in embeddings:
        feature = np.asarray(emb, dtype=float) if feature is None \
            else ema_update(feature, emb, alpha)
    return feature


def football_gate(time_gap: int) -> float:
    """Tolerated re-entry distance as a step function of the frame gap."""
    if time_gap < 1:
        raise ValueError(f"time gap must be at least 1 frame, got {time_gap}")
    if time_gap < 100:
        return 100.0
    if time_gap <= 500:
        return 250.0
    return 400.0


def _normalized_rows(embeddings: List[np.ndarray]) -> np.ndarray:
    stacked = np.stack([np.asarray(e, dtype=float) for e in embeddings])
    norms = np.linalg.norm(stacked, axis=1)
    if (norms == 0).any():
        raise ZeroVectorError("tracklet contains an all-zero embedding")
    return stacked / norms[:, None]


def _subsample(items: List[np.ndarray], cap: int = 30) -> List[np.ndarray]:
    n = len(items)
    if n <= cap:
        return items
    # evenly spaced, deterministic, exactly cap distinct indices
    return [items[(i * n) // cap] for i in range(cap)]


def tracklet_embedding_distance(a: Tracklet, b: Tracklet) -> float:
    """Mean cosine distance over cross pairs of frame embeddings.

    Sides holding more than 30 embeddings are thinned to a deterministic
    evenly-spaced subsample of 30 before averaging.
    """
    ea = a.embedding_sequence()
    eb = b.embedding_sequence()
    if not ea or not eb:
        raise NoEmbeddingsError(
            f"tracklets {a.id} and {b.id} need at least one embedding each")
    na = _normalized_rows(_subsample(ea))
    nb = _normalized_rows(_subsample(eb))
    similarities = np.clip(na @ nb.T, -1.0, 1.0)
    return float(np.mean(1.0 - similarities))


def merge_tracklets(a: Tracklet, b: Tracklet) -> Tracklet:
    """Union of two disjoint fragments under the earlier fragment's id."""
    overlap = set(a.frames) & set(b.frames)
    if overlap:
        raise OverlappingFramesError(
            f"tracklets {a.id} and {b.id} share frames {sorted(overlap)[:5]}")
    earlier = a if a.entry_frame < b.entry_frame else b
    boxes = {**a.boxes, **b.boxes}
    embeddings = {**a.embeddings, **b.embeddings}
    return Tracklet(id=earlier.id, frames=sorted(boxes), boxes=boxes,
                    embeddings=embeddings)


def tracklets_to_result(groups: Dict[int, List[Tracklet]]) -> SequenceResult:
    """Relabel: every box of every member tracklet appears once under its label."""
    result: SequenceResult = {}
    for label, members in groups.items():
        for tracklet in members:
            for frame in tracklet.frames:
                result.setdefault(frame, []).append((label, tracklet.boxes[frame]))
    return sort_result(result)


def _concurrency(tracklets: Sequence[Tracklet]) -> Counter:
    counts: Counter = Counter()
    for tracklet in tracklets:
        counts.update(tracklet.frames)
    return counts


def _entry_order(tracklets: Sequence[Tracklet]) -> List[Tracklet]:
    return sorted(tracklets, key=lambda t: (t.entry_frame, -t.first_area(), t.id))


@dataclass
class _Identity:
    label: int
    exit_frame: int
    exit_point: Point
    feature: Optional[np.ndarray]
    members: List[Tracklet]


def _queue_pipeline(tracklets: Sequence[Tracklet], preset: SportPreset,
                    use_appearance: bool) -> Tuple[SequenceResult, PostprocessReport]:
    """Shared mechanics of the basketball and volleyball pipelines.

    The earliest `cap` fragments seed the identities. Later fragments draw
    from the queue of identities that have already left the view; basketball
    picks the most similar EMA feature, volleyball the nearest exit point
    within its distance threshold.
    """
    report = PostprocessReport()
    ordered = _entry_order(tracklets)
    if not ordered:
        return {}, report
    counts = _concurrency(ordered)
    cap = preset.player_cap or len(ordered)

    identities: List[_Identity] = []
    for tracklet in ordered[:cap]:
        tracklet.feature = ema_feature(tracklet.embedding_sequence(), preset.ema_alpha)
        identities.append(_Identity(tracklet.id, tracklet.exit_frame,
                                    tracklet.exit_point, tracklet.feature, [tracklet]))

    for tracklet in ordered[cap:]:
        tracklet.feature = ema_feature(tracklet.embedding_sequence(), preset.ema_alpha)
        queue = [ident for ident in identities
                 if ident.exit_frame < tracklet.entry_frame]
        chosen: Optional[_Identity] = None
        record: Optional[MergeRecord] = None
        if queue and use_appearance:
            def similarity(ident: _Identity) -> float:
                if ident.feature is None or tracklet.feature is None:
                    return -2.0
                na = np.linalg.norm(ident.feature)
                nb = np.linalg.norm(tracklet.feature)
                if na == 0 or nb == 0:
                    return -2.0
                return float(ident.feature @ tracklet.feature / (na * nb))

            chosen = max(queue, key=lambda ident: (similarity(ident), -ident.label))
            gap = tracklet.entry_frame - chosen.exit_frame
            record = MergeRecord(chosen.label, tracklet.id, gap,
                                 cosine_similarity=similarity(chosen))
        elif queue:
            def distance(ident: _Identity) -> float:
                return math.hypot(ident.exit_point.x - tracklet.entry_point.x,
                                  ident.exit_point.y - tracklet.entry_point.y)

            nearest = min(queue, key=lambda ident: (distance(ident), ident.label))
            if distance(nearest) < preset.volleyball_dist:
                chosen = nearest
                gap = tracklet.entry_frame - chosen.exit_frame
                record = MergeRecord(chosen.label, tracklet.id, gap,
                                     center_dist=distance(nearest))
        if chosen is not None:
            chosen.members.append(tracklet)
            chosen.exit_frame = tracklet.exit_frame
            chosen.exit_point = tracklet.exit_point
            if tracklet.embedding_sequence():
                folded = chosen.feature
                for emb in tracklet.embedding_sequence():
                    folded = np.asarray(emb, dtype=float) if folded is None \
                        else ema_update(folded, emb, preset.ema_alpha)
                chosen.feature = folded
            report.merges.append(record)
        else:
            if counts[tracklet.entry_frame] <= cap:
                report.flagged_new_identities.append(tracklet.id)
            identities.append(_Identity(tracklet.id, tracklet.exit_frame,
                                        tracklet.exit_point, tracklet.feature,
                                        [tracklet]))

    groups = {ident.label: ident.members for ident in identities}
    return tracklets_to_result(groups), report


def basketball_pipeline(tracklets: Sequence[Tracklet],
                        preset: SportPreset) -> Tuple[SequenceResult, PostprocessReport]:
    return _queue_pipeline(tracklets, preset, use_appearance=True)


def volleyball_pipeline(tracklets: Sequence[Tracklet],
                        preset: SportPreset) -> Tuple[SequenceResult, PostprocessReport]:
    return _queue_pipeline(tracklets, preset, use_appearance=False)


def football_pipeline(tracklets: Sequence[Tracklet],
                      preset: SportPreset) -> Tuple[SequenceResult, PostprocessReport]:
    """Three greedy merge rounds with widening appearance thresholds.

    A pair (earlier, later) is feasible when the later fragment starts after
    the earlier one ends, their exit/entry points sit within the time-gap
    dependent distance gate, and their embedding distance is under the
    round's threshold. The cheapest feasible pair merges first; feasibility
    is recomputed because each merge moves entry/exit points and embeddings.
    """
    report = PostprocessReport()
    working: List[Tracklet] = list(tracklets)

    def pair_metrics(e: Tracklet, l: Tracklet):
        gap = l.entry_frame - e.exit_frame
        if gap < 1:
            return None
        dist = math.hypot(e.exit_point.x - l.entry_point.x,
                          e.exit_point.y - l.entry_point.y)
        if dist >= football_gate(gap):
            return None
        if not e.embedding_sequence() or not l.embedding_sequence():
            return None
        return gap, dist, tracklet_embedding_distance(e, l)

    for round_index, threshold in enumerate(preset.round_thresholds):
        while True:
            best = None
            for e in working:
                for l in working:
                    if e is l:
                        continue
                    metrics = pair_metrics(e, l)
                    if metrics is None or metrics[2] >= threshold:
                        continue
                    key = (metrics[2], e.id, l.id)
                    if best is None or key < best[0]:
                        best = (key, e, l, metrics)
            if best is None:
                break
            _, e, l, (gap, dist, emb_dist) = best
            merged = merge_tracklets(e, l)
            working = [t for t in working if t is not e and t is not l]
            working.append(merged)
            report.merges.append(MergeRecord(
                merged.id, l.id if merged.id == e.id else e.id, gap,
                round_index=round_index, embedding_distance=emb_dist,
                center_dist=dist))

    groups = {t.id: [t] for t in working}
    return tracklets_to_result(groups), report


def linear_interpolate(result: SequenceResult) -> SequenceResult:
    """Fill interior frame gaps of every identity with linearly moving boxes."""
    by_id: Dict[int, Dict[int, BoundingBox]] = {}
    for frame, entries in result.items():
        for track_id, box in entries:
            by_id.setdefault(track_id, {})[frame] = box

    filled: SequenceResult = {}
    for track_id, boxes in by_id.items():
        frames = sorted(boxes)
        for f0, f1 in zip(frames, frames[1:]):
            if f1 - f0 > 1:
                b0, b1 = boxes[f0], boxes[f1]
                span = f1 - f0
                for f in range(f0 + 1, f1):
                    t = (f - f0) / span
                    boxes[f] = BoundingBox(
                        b0.x + (b1.x - b0.x) * t,
                        b0.y + (b1.y - b0.y) * t,
                        b0.w + (b1.w - b0.w) * t,
                        b0.h + (b1.h - b0.h) * t)
        for frame, box in boxes.items():
            filled.setdefault(frame, []).append((track_id, box))
    return sort_result(filled)
