"""End-to-end orchestration: tracking, per-sport recovery, interpolation.

Glue between the flat file-loadable configuration and the stage modules.
The sport is taken from the config when set there, otherwise from the
sequence metadata; the two per-sport blanks (central distance threshold,
identity cap) resolve at the same point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .contracts import Detection, FrameInput, SeqInfo, SequenceResult, Sport
from .io_formats import PipelineConfig, attach_embeddings
from .postprocess import (
    PostprocessReport,
    SportPreset,
    Tracklet,
    basketball_pipeline,
    football_pipeline,
    linear_interpolate,
    volleyball_pipeline,
)
from .tracker import TrackerConfig, run_sequence

_SPORT_CDR = {Sport.BASKETBALL: 200.0, Sport.FOOTBALL: 80.0,
              Sport.VOLLEYBALL: 80.0}


def effective_sport(config: PipelineConfig, seqinfo: SeqInfo) -> Sport:
    return config.sport if config.sport is not None else seqinfo.sport


def resolve_tracker_config(config: PipelineConfig, sport: Sport) -> TrackerConfig:
    cdr = config.cdr_threshold
    if cdr is None:
        cdr = _SPORT_CDR[sport]
    return TrackerConfig(
        det_conf_thresh=config.det_conf_thresh,
        iou_gate=config.iou_gate,
        track_thresh=config.track_thresh,
        max_age=config.max_age,
        cdr_threshold=cdr,
        momentum_lambda=config.momentum_lambda,
        momentum_delta_t=config.momentum_delta_t,
        min_hits=config.min_hits,
        oru_enabled=config.oru_enabled,
    )


def resolve_preset(config: PipelineConfig, sport: Sport) -> SportPreset:
    if config.player_cap is not None:
        cap: Optional[int] = config.player_cap
    else:
        cap = SportPreset.for_sport(sport).player_cap
    return SportPreset(sport=sport, player_cap=cap,
                       volleyball_dist=config.volleyball_dist,
                       round_thresholds=config.round_thresholds,
                       ema_alpha=config.ema_alpha)


def frame_stream(detections: Dict[int, List[Detection]],
                 length: int) -> List[FrameInput]:
    """Dense frame sequence 1..N, empty frames included."""
    last = max(detections) if detections else 0
    return [FrameInput(frame=f, detections=detections.get(f, []))
            for f in range(1, max(length, last) + 1)]


@dataclass
class TrackOutput:
    result: SequenceResult
    tracklets: List[Tracklet]


@dataclass
class RunOutput:
    result: SequenceResult
    tracklets: List[Tracklet]
    report: PostprocessReport


def track_stage(detections: Dict[int, List[Detection]],
                embeddings: Dict[Tuple[int, int], np.ndarray],
                seqinfo: SeqInfo, config: PipelineConfig) -> TrackOutput:
    sport = effective_sport(config, seqinfo)
    if embeddings:
        detections = attach_embeddings(detections, embeddings)
    inputs = frame_stream(detections, seqinfo.length)
    result, tracklets = run_sequence(inputs,
                                     resolve_tracker_config(config, sport))
    return TrackOutput(result=result, tracklets=tracklets)


_PIPELINES = {Sport.BASKETBALL: basketball_pipeline,
              Sport.FOOTBALL: football_pipeline,
              Sport.VOLLEYBALL: volleyball_pipeline}


def postprocess_stage(tracklets: List[Tracklet], seqinfo: SeqInfo,
                      config: PipelineConfig
                      ) -> Tuple[SequenceResult, PostprocessReport]:
    sport = effective_sport(config, seqinfo)
    return _PIPELINES[sport](tracklets, resolve_preset(config, sport))


def run_pipeline(detections: Dict[int, List[Detection]],
                 embeddings: Dict[Tuple[int, int], np.ndarray],
                 seqinfo: SeqInfo, config: PipelineConfig) -> RunOutput:
    tracked = track_stage(detections, embeddings, seqinfo, config)
    result, report = postprocess_stage(tracked.tracklets, seqinfo, config)
    if config.interpolation:
        result = linear_interpolate(result)
    return RunOutput(result=result, tracklets=tracked.tracklets,
                     report=report)
