"""Request/response models for the tracking service.

The wire format mirrors the text file formats row for row, so a client can
stream a detection file into a request without restructuring anything.
"""

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from ..contracts import Sport


class DetectionRow(BaseModel):
    frame: int
    x: float
    y: float
    w: float
    h: float
    score: float


class EmbeddingRow(BaseModel):
    frame: int
    det_index: int
    vector: List[float]


class ResultRow(BaseModel):
    frame: int
    track_id: int
    x: float
    y: float
    w: float
    h: float


class TrackletModel(BaseModel):
    """Raw tracklet as produced by the tracking stage, sidecar-compatible."""

    id: int
    frames: List[int]
    boxes: List[List[float]]  # one [x, y, w, h] per frame
    embeddings: List[Tuple[int, List[float]]] = []


class SeqInfoModel(BaseModel):
    name: str = "sequence"
    width: int = 1280
    height: int = 720
    fps: int = 25
    length: int = 500
    sport: Sport = Sport.BASKETBALL


class ConfigModel(BaseModel):
    """Pipeline knobs; anything omitted falls back to the package defaults."""

    model_config = ConfigDict(extra="forbid")

    sport: Optional[Sport] = None
    det_conf_thresh: Optional[float] = None
    iou_gate: Optional[float] = None
    track_thresh: Optional[float] = None
    max_age: Optional[int] = None
    cdr_threshold: Optional[float] = None
    momentum_lambda: Optional[float] = None
    momentum_delta_t: Optional[int] = None
    min_hits: Optional[int] = None
    oru_enabled: Optional[bool] = None
    player_cap: Optional[int] = None
    volleyball_dist: Optional[float] = None
    round_thresholds: Optional[Tuple[float, float, float]] = None
    ema_alpha: Optional[float] = None
    alpha_grid: Optional[List[float]] = None
    interpolation: Optional[bool] = None


class MergeModel(BaseModel):
    kept_id: int
    absorbed_id: int
    time_gap: int
    round_index: Optional[int] = None
    embedding_distance: Optional[float] = None
    cosine_similarity: Optional[float] = None
    center_dist: Optional[float] = None


class TrackRequest(BaseModel):
    detections: List[DetectionRow]
    embeddings: List[EmbeddingRow] = []
    seqinfo: SeqInfoModel = SeqInfoModel()
    config: ConfigModel = ConfigModel()


class TrackResponse(BaseModel):
    result: List[ResultRow]
    tracklets: List[TrackletModel]


class PostprocessRequest(BaseModel):
    tracklets: List[TrackletModel]
    seqinfo: SeqInfoModel = SeqInfoModel()
    config: ConfigModel = ConfigModel()


class PostprocessResponse(BaseModel):
    result: List[ResultRow]
    merges: List[MergeModel]
    flagged_new_identities: List[int]


class InterpolateRequest(BaseModel):
    result: List[ResultRow]


class InterpolateResponse(BaseModel):
    result: List[ResultRow]


class EvalRequest(BaseModel):
    gt: List[ResultRow]
    result: List[ResultRow]
    alpha_grid: Optional[List[float]] = None


class EvalResponse(BaseModel):
    """Scores as plain ratios in [0, 1]; presentation scaling is the
    client's business."""

    hota: float
    det_a: float
    ass_a: float
    mota: float
    idf1: float
    ids: int
    frag: int
    fn: int
    fp: int
    gt_total: int


class SynthRequest(BaseModel):
    preset: str
    seed: int = 0
    duration: Optional[int] = None
    dropout: Optional[float] = None
    det_jitter: Optional[float] = None
    team_beta: Optional[float] = None
    noise_sigma: Optional[float] = None
    name: Optional[str] = None


class SynthResponse(BaseModel):
    gt: List[ResultRow]
    detections: List[DetectionRow]
    embeddings: List[EmbeddingRow]
    seqinfo: SeqInfoModel
    embedding_dim: int


class RunRequest(BaseModel):
    detections: List[DetectionRow]
    embeddings: List[EmbeddingRow] = []
    seqinfo: SeqInfoModel = SeqInfoModel()
    config: ConfigModel = ConfigModel()


class RunResponse(BaseModel):
    result: List[ResultRow]
    merges: List[MergeModel]
    flagged_new_identities: List[int]


class PresetsResponse(BaseModel):
    presets: List[str]


class HealthResponse(BaseModel):
    status: str
