"""File formats: detections, embeddings, results, sequence info, config.

Detection and result files follow the usual MOT text convention; embeddings
use a purpose-built CSV with a `# dim=D` header because no convention
exists. Parsers reject malformed rows with their line number instead of
repairing them; writers are deterministic and emit coordinates with two
fractional digits, so write -> read -> write is byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .contracts import Detection, SeqInfo, SequenceResult, Sport, sort_result
from .errors import (
    ConfigTypeError,
    DimensionMismatchError,
    InvalidBoxError,
    MissingHeaderError,
    ParseError,
    UnknownKeyError,
)
from .geometry import BoundingBox
from .postprocess import Tracklet

PathLike = Union[str, Path]


def _lines(path: PathLike) -> List[str]:
    return Path(path).read_text().splitlines()


def _parse_float(raw: str, what: str, line_no: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"{what} is not a number: {raw!r}", line_no) from None


def _parse_int(raw: str, what: str, line_no: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"{what} is not an integer: {raw!r}", line_no) from None


def _parse_box(parts: Sequence[str], line_no: int) -> BoundingBox:
    x = _parse_float(parts[0], "x", line_no)
    y = _parse_float(parts[1], "y", line_no)
    w = _parse_float(parts[2], "w", line_no)
    h = _parse_float(parts[3], "h", line_no)
    if w <= 0 or h <= 0:
        raise InvalidBoxError(f"box needs positive size, got w={w} h={h}", line_no)
    return BoundingBox(x, y, w, h)


def read_detections(path: PathLike) -> Dict[int, List[Detection]]:
    """Detection rows `frame,-1,x,y,w,h,score,-1,-1,-1`, returned frame-ordered.

    Within a frame, detections keep file order; embedding files refer to
    that order by index.
    """
    per_frame: Dict[int, List[Detection]] = {}
    for line_no, line in enumerate(_lines(path), start=1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 10:
            raise ParseError(f"expected 10 fields, got {len(parts)}", line_no)
        frame = _parse_int(parts[0], "frame", line_no)
        if frame < 1:
            raise ParseError(f"frame must be positive, got {frame}", line_no)
        box = _parse_box(parts[2:6], line_no)
        score = _parse_float(parts[6], "score", line_no)
        per_frame.setdefault(frame, []).append(Detection(box=box, score=score))
    return {frame: per_frame[frame] for frame in sorted(per_frame)}


def write_detections(dets: Dict[int, List[Detection]], path: PathLike) -> None:
    rows = []
    for frame in sorted(dets):
        for d in dets[frame]:
            b = d.box
            rows.append(f"{frame},-1,{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
                        f"{d.score:.4f},-1,-1,-1")
    Path(path).write_text("\n".join(rows) + ("\n" if rows else ""))


def read_embeddings(path: PathLike) -> Dict[Tuple[int, int], np.ndarray]:
    """Embedding rows `frame,det_index,f1,...,fD` under a `# dim=D` header."""
    lines = _lines(path)
    if not lines or not lines[0].replace(" ", "").startswith("#dim="):
        raise MissingHeaderError("embedding file must start with '# dim=D'")
    try:
        dim = int(lines[0].split("=", 1)[1].strip())
    except ValueError:
        raise MissingHeaderError(
            f"embedding dimension is not an integer: {lines[0]!r}") from None
    if dim < 1:
        raise MissingHeaderError(f"embedding dimension must be positive, got {dim}")

    out: Dict[Tuple[int, int], np.ndarray] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 + dim:
            raise DimensionMismatchError(
                f"expected {dim} components, got {len(parts) - 2}", line_no)
        frame = _parse_int(parts[0], "frame", line_no)
        index = _parse_int(parts[1], "detection index", line_no)
        vector = np.array([_parse_float(p, "component", line_no)
                           for p in parts[2:]])
        out[(frame, index)] = vector
    return out


def write_embeddings(embeds: Dict[Tuple[int, int], np.ndarray],
                     dim: int, path: PathLike) -> None:
    rows = [f"# dim={dim}"]
    for frame, index in sorted(embeds):
        vec = embeds[(frame, index)]
        rows.append(f"{frame},{index}," + ",".join(f"{v:.6f}" for v in vec))
    Path(path).write_text("\n".join(rows) + "\n")


def attach_embeddings(dets: Dict[int, List[Detection]],
                      embeds: Dict[Tuple[int, int], np.ndarray]
                      ) -> Dict[int, List[Detection]]:
    """New detection map with embeddings bound by (frame, index); sparse is fine."""
    out: Dict[int, List[Detection]] = {}
    for frame, frame_dets in dets.items():
        out[frame] = [
            replace(d, embedding=embeds.get((frame, i), d.embedding))
            for i, d in enumerate(frame_dets)
        ]
    return out


def write_result(result: SequenceResult, path: PathLike) -> None:
    """Result rows `frame,id,x,y,w,h,1,-1,-1,-1`, sorted by frame then id."""
    rows = []
    for frame, entries in sort_result(result).items():
        for track_id, b in entries:
            rows.append(f"{frame},{track_id},{b.x:.2f},{b.y:.2f},"
                        f"{b.w:.2f},{b.h:.2f},1,-1,-1,-1")
    Path(path).write_text("\n".join(rows) + ("\n" if rows else ""))


def read_result(path: PathLike) -> SequenceResult:
    result: SequenceResult = {}
    for line_no, line in enumerate(_lines(path), start=1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 10:
            raise ParseError(f"expected 10 fields, got {len(parts)}", line_no)
        frame = _parse_int(parts[0], "frame", line_no)
        track_id = _parse_int(parts[1], "id", line_no)
        if track_id < 1:
            raise ParseError(f"id must be positive, got {track_id}", line_no)
        box = _parse_box(parts[2:6], line_no)
        result.setdefault(frame, []).append((track_id, box))
    return sort_result(result)


# ------------------------------------------------------------ tracklet sidecar


def write_tracklets(tracklets: Sequence[Tracklet], path: PathLike) -> None:
    """JSON sidecar carrying raw tracklets (with embeddings) between stages."""
    payload = {"tracklets": [
        {
            "id": t.id,
            "frames": t.frames,
            "boxes": [[t.boxes[f].x, t.boxes[f].y, t.boxes[f].w, t.boxes[f].h]
                      for f in t.frames],
            "embeddings": [[f, [float(v) for v in t.embeddings[f]]]
                           for f in t.frames if f in t.embeddings],
        }
        for t in sorted(tracklets, key=lambda t: t.id)
    ]}
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def read_tracklets(path: PathLike) -> List[Tracklet]:
    try:
        payload = json.loads(Path(path).read_text())
        out = []
        for entry in payload["tracklets"]:
            frames = [int(f) for f in entry["frames"]]
            boxes = {f: BoundingBox(*map(float, row))
                     for f, row in zip(frames, entry["boxes"])}
            embeddings = {int(f): np.array(vec, dtype=float)
                          for f, vec in entry["embeddings"]}
            out.append(Tracklet(id=int(entry["id"]), frames=frames,
                                boxes=boxes, embeddings=embeddings))
        return out
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed tracklet file: {exc}") from None


# ------------------------------------------------------------ key-value files


def _parse_kv(path: PathLike) -> Dict[str, Tuple[str, int]]:
    """`key = value` lines; '#' starts a comment; returns value + line number."""
    out: Dict[str, Tuple[str, int]] = {}
    for line_no, line in enumerate(_lines(path), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", line_no)
        key, value = (part.strip() for part in stripped.split("=", 1))
        out[key] = (value, line_no)
    return out


def _convert(key: str, raw: str, kind, line_no: int):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is Sport:
            return Sport(raw.lower())
        return kind(raw)
    except ValueError:
        raise ConfigTypeError(
            f"line {line_no}: {key} expects {getattr(kind, '__name__', kind)}, "
            f"got {raw!r}") from None


_SEQINFO_KINDS = {"name": str, "width": int, "height": int,
                  "fps": int, "length": int, "sport": Sport}

# broadcast-clip defaults: 720P at 25 FPS, about 500 frames
_SEQINFO_DEFAULTS = dict(name="sequence", width=1280, height=720,
                         fps=25, length=500, sport=Sport.BASKETBALL)


def default_seqinfo() -> SeqInfo:
    return SeqInfo(**_SEQINFO_DEFAULTS)


def read_seqinfo(path: PathLike) -> SeqInfo:
    values = dict(_SEQINFO_DEFAULTS)
    for key, (raw, line_no) in _parse_kv(path).items():
        if key not in _SEQINFO_KINDS:
            raise UnknownKeyError(f"line {line_no}: unknown sequence key {key!r}")
        values[key] = _convert(key, raw, _SEQINFO_KINDS[key], line_no)
    info = SeqInfo(**values)
    for attr in ("width", "height", "fps", "length"):
        if getattr(info, attr) <= 0:
            raise ConfigTypeError(f"{attr} must be positive, got {getattr(info, attr)}")
    return info


def write_seqinfo(info: SeqInfo, path: PathLike) -> None:
    Path(path).write_text(
        f"name = {info.name}\nwidth = {info.width}\nheight = {info.height}\n"
        f"fps = {info.fps}\nlength = {info.length}\nsport = {info.sport.value}\n")


@dataclass
class PipelineConfig:
    """Every knob of the full pipeline in one flat, file-loadable bag.

    sport, cdr_threshold and player_cap default to None meaning "resolve
    from the sequence's sport": central distance 200 for basketball, 80
    otherwise; identity caps 10/12/none.
    """

    sport: Optional[Sport] = None
    det_conf_thresh: float = 0.1
    iou_gate: float = 0.3
    track_thresh: float = 0.7
    max_age: int = 30
    cdr_threshold: Optional[float] = None
    momentum_lambda: float = 0.2
    momentum_delta_t: int = 3
    min_hits: int = 1
    oru_enabled: bool = True
    player_cap: Optional[int] = None
    volleyball_dist: float = 400.0
    round_thresholds: Tuple[float, float, float] = (0.1, 0.2, 0.4)
    ema_alpha: float = 0.9
    alpha_grid: Tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(1, 20))
    interpolation: bool = True


def _parse_float_tuple(key: str, raw: str, line_no: int) -> Tuple[float, ...]:
    try:
        return tuple(float(p.strip()) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigTypeError(
            f"line {line_no}: {key} expects comma-separated numbers, got {raw!r}"
        ) from None


_CONFIG_KINDS = {
    "sport": Sport, "det_conf_thresh": float, "iou_gate": float,
    "track_thresh": float, "max_age": int, "cdr_threshold": float,
    "momentum_lambda": float, "momentum_delta_t": int, "min_hits": int,
    "oru_enabled": bool, "player_cap": int, "volleyball_dist": float,
    "round_thresholds": tuple, "ema_alpha": float, "alpha_grid": tuple,
    "interpolation": bool,
}


def read_config(path: PathLike) -> PipelineConfig:
    """Config from `key = value` lines; anything not set keeps its default."""
    values = {}
    for key, (raw, line_no) in _parse_kv(path).items():
        if key not in _CONFIG_KINDS:
            raise UnknownKeyError(f"line {line_no}: unknown config key {key!r}")
        kind = _CONFIG_KINDS[key]
        if kind is tuple:
            parsed = _parse_float_tuple(key, raw, line_no)
            if key == "round_thresholds" and len(parsed) != 3:
                raise ConfigTypeError(
                    f"line {line_no}: round_thresholds needs exactly 3 values")
            values[key] = parsed
        else:
            values[key] = _convert(key, raw, kind, line_no)
    return PipelineConfig(**values)


def config_fields() -> List[str]:
    return [f.name for f in fields(PipelineConfig)]
