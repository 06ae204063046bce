"""FastAPI service exposing the tracking pipeline stage by stage.

Endpoints operate on in-memory payloads only; reading and writing files is
the client's job. Package errors map to HTTP statuses: bad input 400,
precondition violations 409.
"""

from dataclasses import replace
from typing import Dict, List, Tuple

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..contracts import Detection, SeqInfo, SequenceResult, sort_result
from ..errors import ContractViolationError, InputFormatError, InvalidBoxError
from ..geometry import BoundingBox
from ..io_formats import PipelineConfig
from ..metrics import evaluate
from ..pipeline import postprocess_stage, run_pipeline, track_stage
from ..postprocess import PostprocessReport, Tracklet, linear_interpolate
from ..synth import generate, preset, preset_names
from . import schemas

app = FastAPI(title="sporttrack", version="0.1.0")


@app.exception_handler(InputFormatError)
async def input_format_error(request: Request, exc: InputFormatError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(ContractViolationError)
async def contract_violation(request: Request, exc: ContractViolationError):
    return JSONResponse(status_code=409, content={"detail": str(exc)})


# ------------------------------------------------- wire <-> core conversions


def _detections_in(rows: List[schemas.DetectionRow]
                   ) -> Dict[int, List[Detection]]:
    out: Dict[int, List[Detection]] = {}
    for i, row in enumerate(rows):
        if row.w <= 0 or row.h <= 0:
            raise InvalidBoxError(
                f"detection {i} (frame {row.frame}) has non-positive size")
        box = BoundingBox(row.x, row.y, row.w, row.h)
        out.setdefault(row.frame, []).append(
            Detection(box=box, score=row.score))
    return out


def _embeddings_in(rows: List[schemas.EmbeddingRow]
                   ) -> Dict[Tuple[int, int], np.ndarray]:
    return {(row.frame, row.det_index): np.array(row.vector, dtype=float)
            for row in rows}


def _result_out(result: SequenceResult) -> List[schemas.ResultRow]:
    ordered = sort_result(result)
    return [schemas.ResultRow(frame=frame, track_id=tid,
                              x=box.x, y=box.y, w=box.w, h=box.h)
            for frame in sorted(ordered)
            for tid, box in ordered[frame]]


def _result_in(rows: List[schemas.ResultRow]) -> SequenceResult:
    out: SequenceResult = {}
    for i, row in enumerate(rows):
        if row.w <= 0 or row.h <= 0:
            raise InvalidBoxError(
                f"result row {i} (frame {row.frame}) has non-positive size")
        out.setdefault(row.frame, []).append(
            (row.track_id, BoundingBox(row.x, row.y, row.w, row.h)))
    return out


def _tracklets_out(tracklets: List[Tracklet]) -> List[schemas.TrackletModel]:
    return [schemas.TrackletModel(
        id=t.id, frames=t.frames,
        boxes=[[t.boxes[f].x, t.boxes[f].y, t.boxes[f].w, t.boxes[f].h]
               for f in t.frames],
        embeddings=[(f, [float(v) for v in t.embeddings[f]])
                    for f in t.frames if f in t.embeddings])
        for t in sorted(tracklets, key=lambda t: t.id)]


def _tracklets_in(models: List[schemas.TrackletModel]) -> List[Tracklet]:
    out = []
    for m in models:
        if len(m.boxes) != len(m.frames):
            raise InputFormatError(
                f"tracklet {m.id}: {len(m.frames)} frames "
                f"but {len(m.boxes)} boxes")
        boxes = {}
        for f, row in zip(m.frames, m.boxes):
            if len(row) != 4:
                raise InputFormatError(
                    f"tracklet {m.id}: box for frame {f} needs 4 numbers")
            boxes[f] = BoundingBox(*row)
        try:
            out.append(Tracklet(
                id=m.id, frames=list(m.frames), boxes=boxes,
                embeddings={f: np.array(vec, dtype=float)
                            for f, vec in m.embeddings}))
        except ValueError as exc:
            raise InputFormatError(str(exc)) from None
    return out


def _seqinfo_in(model: schemas.SeqInfoModel) -> SeqInfo:
    return SeqInfo(name=model.name, width=model.width, height=model.height,
                   fps=model.fps, length=model.length, sport=model.sport)


def _config_in(model: schemas.ConfigModel) -> PipelineConfig:
    values = {k: v for k, v in model.model_dump().items() if v is not None}
    if "round_thresholds" in values:
        values["round_thresholds"] = tuple(values["round_thresholds"])
    if "alpha_grid" in values:
        values["alpha_grid"] = tuple(values["alpha_grid"])
    try:
        return PipelineConfig(**values)
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None


def _report_out(report: PostprocessReport) -> List[schemas.MergeModel]:
    return [schemas.MergeModel(**m.__dict__) for m in report.merges]


# ------------------------------------------------------------------ endpoints


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return schemas.HealthResponse(status="ok")


@app.get("/presets", response_model=schemas.PresetsResponse)
def list_presets():
    return schemas.PresetsResponse(presets=preset_names())


@app.post("/track", response_model=schemas.TrackResponse)
def track(req: schemas.TrackRequest):
    try:
        out = track_stage(_detections_in(req.detections),
                          _embeddings_in(req.embeddings),
                          _seqinfo_in(req.seqinfo), _config_in(req.config))
    except ValueError as exc:  # bad knob combinations surface here
        raise InputFormatError(str(exc)) from None
    return schemas.TrackResponse(result=_result_out(out.result),
                                 tracklets=_tracklets_out(out.tracklets))


@app.post("/postprocess", response_model=schemas.PostprocessResponse)
def postprocess(req: schemas.PostprocessRequest):
    try:
        result, report = postprocess_stage(_tracklets_in(req.tracklets),
                                           _seqinfo_in(req.seqinfo),
                                           _config_in(req.config))
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None
    return schemas.PostprocessResponse(
        result=_result_out(result), merges=_report_out(report),
        flagged_new_identities=report.flagged_new_identities)


@app.post("/interpolate", response_model=schemas.InterpolateResponse)
def interpolate(req: schemas.InterpolateRequest):
    filled = linear_interpolate(_result_in(req.result))
    return schemas.InterpolateResponse(result=_result_out(filled))


@app.post("/eval", response_model=schemas.EvalResponse)
def eval_result(req: schemas.EvalRequest):
    kwargs = {}
    if req.alpha_grid is not None:
        kwargs["alpha_grid"] = tuple(req.alpha_grid)
    try:
        report = evaluate(_result_in(req.gt), _result_in(req.result), **kwargs)
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None
    return schemas.EvalResponse(**report.__dict__)


@app.post("/synth", response_model=schemas.SynthResponse)
def synth(req: schemas.SynthRequest):
    spec = preset(req.preset, seed=req.seed)
    overrides = {k: v for k, v in req.model_dump().items()
                 if k not in ("preset", "seed") and v is not None}
    try:
        if overrides:
            spec = replace(spec, **overrides)
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None
    seq = generate(spec)
    dets, embeds = [], []
    for frame in sorted(seq.detections):
        for idx, det in enumerate(seq.detections[frame]):
            dets.append(schemas.DetectionRow(
                frame=frame, x=det.box.x, y=det.box.y, w=det.box.w,
                h=det.box.h, score=det.score))
            if (frame, idx) in seq.embeddings:
                embeds.append(schemas.EmbeddingRow(
                    frame=frame, det_index=idx,
                    vector=[float(v) for v in seq.embeddings[(frame, idx)]]))
    info = seq.seqinfo
    return schemas.SynthResponse(
        gt=_result_out(seq.gt), detections=dets, embeddings=embeds,
        seqinfo=schemas.SeqInfoModel(name=info.name, width=info.width,
                                     height=info.height, fps=info.fps,
                                     length=info.length, sport=info.sport),
        embedding_dim=seq.embedding_dim)


@app.post("/run", response_model=schemas.RunResponse)
def run(req: schemas.RunRequest):
    try:
        out = run_pipeline(_detections_in(req.detections),
                           _embeddings_in(req.embeddings),
                           _seqinfo_in(req.seqinfo), _config_in(req.config))
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None
    return schemas.RunResponse(
        result=_result_out(out.result), merges=_report_out(out.report),
        flagged_new_identities=out.report.flagged_new_identities)
