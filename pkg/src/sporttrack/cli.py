"""Command-line client for the tracking service.

Every subcommand reads local files, calls the HTTP API and writes local
files. By default the service runs in-process, so no server needs to be up;
pass --server to talk to a remote instance instead.

Exit codes: 0 success, 2 unparseable input or bad configuration,
3 contract violation.
"""

import argparse
import asyncio
import sys
from dataclasses import asdict
from typing import Dict, List, Optional, Tuple

import httpx
import numpy as np

from .contracts import SeqInfo, SequenceResult, Sport
from .errors import ContractViolationError, InputFormatError
from .geometry import BoundingBox
from .io_formats import (
    default_seqinfo,
    read_config,
    read_detections,
    read_embeddings,
    read_result,
    read_seqinfo,
    read_tracklets,
    write_detections,
    write_embeddings,
    write_result,
    write_seqinfo,
    write_tracklets,
)
from .metrics import MetricsReport, format_report
from .postprocess import Tracklet

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONTRACT = 3


class _ServiceError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.exit_code = EXIT_CONTRACT if status == 409 else EXIT_INPUT


def _call(server: Optional[str], method: str, path: str,
          payload: Optional[dict] = None) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=120.0) as client:
            resp = client.request(method, path, json=payload)
    else:
        from .service import app as service_app

        async def go():
            transport = httpx.ASGITransport(app=service_app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://sporttrack",
                                         timeout=120.0) as client:
                return await client.request(method, path, json=payload)

        resp = asyncio.run(go())
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise _ServiceError(resp.status_code, str(detail))
    return resp.json()


# ---------------------------------------------------- file <-> wire payloads


def _detection_rows(path: str) -> List[dict]:
    rows = []
    for frame, dets in read_detections(path).items():
        for det in dets:
            rows.append({"frame": frame, "x": det.box.x, "y": det.box.y,
                         "w": det.box.w, "h": det.box.h, "score": det.score})
    return rows


def _embedding_rows(path: str) -> List[dict]:
    return [{"frame": frame, "det_index": idx, "vector": list(map(float, vec))}
            for (frame, idx), vec in read_embeddings(path).items()]


def _seqinfo_payload(path: Optional[str]) -> dict:
    info = read_seqinfo(path) if path else default_seqinfo()
    payload = asdict(info)
    payload["sport"] = info.sport.value
    return payload


def _config_payload(path: Optional[str]) -> dict:
    if not path:
        return {}
    cfg = read_config(path)
    payload = {k: v for k, v in asdict(cfg).items() if v is not None}
    if "sport" in payload:
        payload["sport"] = cfg.sport.value
    if "round_thresholds" in payload:
        payload["round_thresholds"] = list(payload["round_thresholds"])
    if "alpha_grid" in payload:
        payload["alpha_grid"] = list(payload["alpha_grid"])
    return payload


def _result_rows(result: SequenceResult) -> List[dict]:
    rows = []
    for frame in sorted(result):
        for tid, box in result[frame]:
            rows.append({"frame": frame, "track_id": tid, "x": box.x,
                         "y": box.y, "w": box.w, "h": box.h})
    return rows


def _rows_to_result(rows: List[dict]) -> SequenceResult:
    result: SequenceResult = {}
    for row in rows:
        box = BoundingBox(row["x"], row["y"], row["w"], row["h"])
        result.setdefault(row["frame"], []).append((row["track_id"], box))
    return result


def _tracklet_payload(tracklets: List[Tracklet]) -> List[dict]:
    return [{"id": t.id, "frames": t.frames,
             "boxes": [[t.boxes[f].x, t.boxes[f].y, t.boxes[f].w,
                        t.boxes[f].h] for f in t.frames],
             "embeddings": [[f, [float(v) for v in t.embeddings[f]]]
                            for f in t.frames if f in t.embeddings]}
            for t in tracklets]


def _rows_to_tracklets(rows: List[dict]) -> List[Tracklet]:
    out = []
    for entry in rows:
        frames = list(entry["frames"])
        boxes = {f: BoundingBox(*row)
                 for f, row in zip(frames, entry["boxes"])}
        embeddings = {int(f): np.array(vec, dtype=float)
                      for f, vec in entry["embeddings"]}
        out.append(Tracklet(id=entry["id"], frames=frames, boxes=boxes,
                            embeddings=embeddings))
    return out


def _detections_from_rows(rows: List[dict]) -> Dict[int, list]:
    from .contracts import Detection

    out: Dict[int, list] = {}
    for row in rows:
        out.setdefault(row["frame"], []).append(Detection(
            box=BoundingBox(row["x"], row["y"], row["w"], row["h"]),
            score=row["score"]))
    return out


def _embeddings_from_rows(rows: List[dict]
                          ) -> Dict[Tuple[int, int], np.ndarray]:
    return {(row["frame"], row["det_index"]):
            np.array(row["vector"], dtype=float) for row in rows}


# ------------------------------------------------------------------ commands


def _cmd_track(args) -> int:
    payload = {"detections": _detection_rows(args.dets),
               "embeddings": _embedding_rows(args.embeds) if args.embeds else [],
               "seqinfo": _seqinfo_payload(args.seqinfo),
               "config": _config_payload(args.config)}
    body = _call(args.server, "POST", "/track", payload)
    write_result(_rows_to_result(body["result"]), args.out)
    sidecar = args.tracklets or args.out + ".tracklets.json"
    write_tracklets(_rows_to_tracklets(body["tracklets"]), sidecar)
    print(f"tracked {len(body['tracklets'])} tracklets -> {args.out}")
    return EXIT_OK


def _cmd_postprocess(args) -> int:
    read_result(args.raw)  # the raw result must at least parse
    tracklets = read_tracklets(args.tracklets)
    payload = {"tracklets": _tracklet_payload(tracklets),
               "seqinfo": _seqinfo_payload(args.seqinfo),
               "config": _config_payload(args.config)}
    body = _call(args.server, "POST", "/postprocess", payload)
    write_result(_rows_to_result(body["result"]), args.out)
    flagged = body["flagged_new_identities"]
    print(f"{len(body['merges'])} merges, {len(flagged)} flagged -> {args.out}")
    return EXIT_OK


def _cmd_interpolate(args) -> int:
    payload = {"result": _result_rows(read_result(args.infile))}
    body = _call(args.server, "POST", "/interpolate", payload)
    write_result(_rows_to_result(body["result"]), args.out)
    print(f"interpolated -> {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    payload = {"gt": _result_rows(read_result(args.gt)),
               "result": _result_rows(read_result(args.res))}
    body = _call(args.server, "POST", "/eval", payload)
    report = MetricsReport(**body)
    print(format_report(report))
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(format_report(report, machine=True) + "\n")
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.scenario:
        from .synth import read_scenario_values

        payload = read_scenario_values(args.scenario)
    else:
        payload = {"preset": args.preset, "seed": args.seed}
    body = _call(args.server, "POST", "/synth", payload)

    from pathlib import Path

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    info = SeqInfo(**{**body["seqinfo"],
                      "sport": Sport(body["seqinfo"]["sport"])})
    write_result(_rows_to_result(body["gt"]), outdir / "gt.txt")
    write_detections(_detections_from_rows(body["detections"]),
                     outdir / "det.txt")
    write_embeddings(_embeddings_from_rows(body["embeddings"]),
                     body["embedding_dim"], outdir / "embeds.txt")
    write_seqinfo(info, outdir / "seqinfo.txt")
    print(f"wrote gt.txt det.txt embeds.txt seqinfo.txt -> {outdir}")
    return EXIT_OK


def _cmd_run(args) -> int:
    payload = {"detections": _detection_rows(args.dets),
               "embeddings": _embedding_rows(args.embeds) if args.embeds else [],
               "seqinfo": _seqinfo_payload(args.seqinfo),
               "config": _config_payload(args.config)}
    body = _call(args.server, "POST", "/run", payload)
    write_result(_rows_to_result(body["result"]), args.out)
    flagged = body["flagged_new_identities"]
    print(f"{len(body['merges'])} merges, {len(flagged)} flagged -> {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app as service_app

    uvicorn.run(service_app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sporttrack",
        description="Sports player tracking: track, repair, evaluate.")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service "
                             "(default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the online tracker")
    p.add_argument("--dets", required=True, help="detection file")
    p.add_argument("--embeds", help="embedding file")
    p.add_argument("--seqinfo", help="sequence metadata file")
    p.add_argument("--config", help="pipeline config file")
    p.add_argument("--out", required=True, help="raw result file")
    p.add_argument("--tracklets",
                   help="tracklet sidecar path (default: OUT.tracklets.json)")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("postprocess", help="per-sport identity repair")
    p.add_argument("--raw", required=True, help="raw result file")
    p.add_argument("--tracklets", required=True, help="tracklet sidecar")
    p.add_argument("--seqinfo", help="sequence metadata file")
    p.add_argument("--config", help="pipeline config file")
    p.add_argument("--out", required=True, help="repaired result file")
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser("interpolate", help="fill identity gaps linearly")
    p.add_argument("--in", dest="infile", required=True, help="result file")
    p.add_argument("--out", required=True, help="output result file")
    p.set_defaults(func=_cmd_interpolate)

    p = sub.add_parser("eval", help="score a result against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth result file")
    p.add_argument("--res", required=True, help="tracker result file")
    p.add_argument("--report", help="also write a machine-readable report")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--preset", help="scenario preset name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", help="scenario key-value file "
                                      "(overrides --preset/--seed)")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="full pipeline: track, repair, interpolate")
    p.add_argument("--dets", required=True, help="detection file")
    p.add_argument("--embeds", help="embedding file")
    p.add_argument("--seqinfo", help="sequence metadata file")
    p.add_argument("--config", help="pipeline config file")
    p.add_argument("--out", required=True, help="final result file")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth" and not (args.preset or args.scenario):
        parser.error("synth needs --preset or --scenario")
    try:
        return args.func(args)
    except _ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except InputFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContractViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
