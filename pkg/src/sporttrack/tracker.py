"""Online multi-player tracker: predict, associate, recover, manage lifecycle.

Association runs in three strictly ordered stages per frame: motion cost with
a momentum term on predicted boxes, IoU recovery against each track's last
real observation, then center-distance recovery for whatever is left. A
detection consumed by one stage is never reconsidered by a later one. The
tracker itself is purely motion-driven; appearance embeddings are only
carried through so post-processing can use them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .assignment import (
    FORBIDDEN,
    MotionCandidate,
    build_motion_cost,
    gated_distance_match,
    solve_assignment,
)
from .contracts import Detection, FrameInput, SequenceResult
from .errors import NonMonotonicFrameError
from .geometry import BoundingBox, boxes_to_array, iou_matrix
from .kalman import (
    DEFAULT_PARAMS,
    KalmanParams,
    KalmanState,
    init_state,
    oru_reupdate,
    predict,
    state_box,
    update,
)
from .postprocess import Tracklet


class TrackStatus(Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    LOST = "lost"
    REMOVED = "removed"


@dataclass
class TrackerConfig:
    """Thresholds of the online tracker; defaults follow the reference setup.

    cdr_threshold is the center-distance recovery gate in pixels and depends
    on the sport (basketball 200, football and volleyball 80); 0 disables the
    stage. Detections scoring in [det_conf_thresh, track_thresh) may extend
    existing tracks but never start new ones.
    """

    det_conf_thresh: float = 0.1
    iou_gate: float = 0.3
    track_thresh: float = 0.7
    max_age: int = 30
    cdr_threshold: float = 80.0
    momentum_lambda: float = 0.2
    momentum_delta_t: int = 3
    min_hits: int = 1
    oru_enabled: bool = True
    kalman: KalmanParams = field(default_factory=KalmanParams)

    def __post_init__(self):
        if self.det_conf_thresh > self.track_thresh:
            raise ValueError("det_conf_thresh must not exceed track_thresh")
        if not 0 < self.iou_gate <= 1:
            raise ValueError("iou_gate must lie in (0, 1]")
        if self.max_age < 1 or self.min_hits < 1 or self.momentum_delta_t < 1:
            raise ValueError("max_age, min_hits and momentum_delta_t must be >= 1")
        if self.momentum_lambda < 0 or self.cdr_threshold < 0:
            raise ValueError("momentum_lambda and cdr_threshold must be >= 0")


@dataclass
class Track:
    id: int
    state: KalmanState
    state_at_last_obs: KalmanState
    observations: Dict[int, BoundingBox]
    embeddings: Dict[int, np.ndarray]
    last_obs_frame: int
    time_since_update: int = 0
    hits: int = 1
    status: TrackStatus = TrackStatus.TENTATIVE

    def last_observation(self) -> BoundingBox:
        return self.observations[self.last_obs_frame]


class SportsTracker:
    """Single-sequence tracker; one instance per clip, stepped frame by frame."""

    def __init__(self, config: TrackerConfig = TrackerConfig()):
        self.config = config
        self.tracks: List[Track] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None

    def _momentum_anchor(self, track: Track) -> Optional[BoundingBox]:
        """Observation roughly momentum_delta_t frames before the last one."""
        for back in range(self.config.momentum_delta_t, 0, -1):
            box = track.observations.get(track.last_obs_frame - back)
            if box is not None:
                return box
        return None

    def step(self, frame_input: FrameInput) -> List[Tuple[int, BoundingBox]]:
        cfg = self.config
        frame = frame_input.frame
        if self._last_frame is not None and frame <= self._last_frame:
            raise NonMonotonicFrameError(
                f"frame {frame} after frame {self._last_frame}")
        self._last_frame = frame

        detections = [d for d in frame_input.detections
                      if d.score >= cfg.det_conf_thresh]

        live = [t for t in self.tracks if t.status is not TrackStatus.REMOVED]
        for track in live:
            track.state = predict(track.state, cfg.kalman)
            track.time_since_update += 1

        matched: List[Tuple[Track, Detection]] = []

        # motion association on predicted boxes
        remaining_tracks = live
        remaining_dets = detections
        if remaining_tracks and remaining_dets:
            candidates = [MotionCandidate(predicted=state_box(t.state),
                                          last_obs=t.last_observation(),
                                          prior_obs=self._momentum_anchor(t))
                          for t in remaining_tracks]
            costs = build_motion_cost(candidates,
                                      [d.box for d in remaining_dets],
                                      cfg.momentum_lambda, cfg.iou_gate)
            matching = solve_assignment(costs)
            matched += [(remaining_tracks[i], remaining_dets[j])
                        for i, j in matching.pairs]
            remaining_tracks = [remaining_tracks[i] for i in matching.unmatched_rows]
            remaining_dets = [remaining_dets[j] for j in matching.unmatched_cols]

        # recovery by overlap with the last real observation
        if remaining_tracks and remaining_dets:
            overlap = iou_matrix(
                boxes_to_array([t.last_observation() for t in remaining_tracks]),
                boxes_to_array([d.box for d in remaining_dets]))
            costs = np.where(overlap >= cfg.iou_gate, 1.0 - overlap, FORBIDDEN)
            matching = solve_assignment(costs)
            matched += [(remaining_tracks[i], remaining_dets[j])
                        for i, j in matching.pairs]
            remaining_tracks = [remaining_tracks[i] for i in matching.unmatched_rows]
            remaining_dets = [remaining_dets[j] for j in matching.unmatched_cols]

        # recovery by center distance to the last real observation
        if remaining_tracks and remaining_dets and cfg.cdr_threshold > 0:
            matching = gated_distance_match(
                [t.last_observation() for t in remaining_tracks],
                [d.box for d in remaining_dets], cfg.cdr_threshold)
            matched += [(remaining_tracks[i], remaining_dets[j])
                        for i, j in matching.pairs]
            remaining_tracks = [remaining_tracks[i] for i in matching.unmatched_rows]
            remaining_dets = [remaining_dets[j] for j in matching.unmatched_cols]

        for track, det in matched:
            gap = frame - track.last_obs_frame
            if gap > 1 and cfg.oru_enabled:
                track.state = oru_reupdate(track.state_at_last_obs,
                                           track.last_observation(),
                                           track.last_obs_frame,
                                           det.box, frame, cfg.kalman)
            else:
                track.state = update(track.state, det.box, cfg.kalman)
            track.state_at_last_obs = KalmanState(track.state.mean.copy(),
                                                  track.state.covariance.copy())
            track.observations[frame] = det.box
            if det.embedding is not None:
                track.embeddings[frame] = det.embedding
            track.last_obs_frame = frame
            track.time_since_update = 0
            track.hits += 1
            track.status = (TrackStatus.ACTIVE if track.hits >= cfg.min_hits
                            else TrackStatus.TENTATIVE)

        for det in remaining_dets:
            if det.score >= cfg.track_thresh:
                state = init_state(det.box, cfg.kalman)
                snapshot = KalmanState(state.mean.copy(), state.covariance.copy())
                track = Track(id=self._next_id, state=state,
                              state_at_last_obs=snapshot,
                              observations={frame: det.box},
                              embeddings=({frame: det.embedding}
                                          if det.embedding is not None else {}),
                              last_obs_frame=frame)
                track.status = (TrackStatus.ACTIVE if track.hits >= cfg.min_hits
                                else TrackStatus.TENTATIVE)
                self._next_id += 1
                self.tracks.append(track)

        for track in live:
            if track.time_since_update > cfg.max_age:
                track.status = TrackStatus.REMOVED
            elif track.time_since_update > 0 and track.status is TrackStatus.ACTIVE:
                track.status = TrackStatus.LOST

        emitted = [(t.id, t.observations[frame]) for t in self.tracks
                   if t.time_since_update == 0 and t.last_obs_frame == frame
                   and t.hits >= cfg.min_hits]
        return sorted(emitted, key=lambda entry: entry[0])

    def tracklets(self, emitted: Dict[int, List[int]]) -> List[Tracklet]:
        """Tracklets restricted to the frames each track was actually emitted."""
        out = []
        for track in self.tracks:
            frames = emitted.get(track.id, [])
            if not frames:
                continue
            out.append(Tracklet(
                id=track.id,
                frames=list(frames),
                boxes={f: track.observations[f] for f in frames},
                embeddings={f: track.embeddings[f] for f in frames
                            if f in track.embeddings}))
        return out


def run_sequence(inputs: Iterable[FrameInput],
                 config: TrackerConfig = TrackerConfig()
                 ) -> Tuple[SequenceResult, List[Tracklet]]:
    """Track a whole clip; returns per-frame output plus the raw tracklets."""
    tracker = SportsTracker(config)
    result: SequenceResult = {}
    emitted_frames: Dict[int, List[int]] = {}
    for frame_input in inputs:
        entries = tracker.step(frame_input)
        result[frame_input.frame] = entries
        for track_id, _ in entries:
            emitted_frames.setdefault(track_id, []).append(frame_input.frame)
    return result, tracker.tracklets(emitted_frames)
