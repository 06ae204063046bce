"""Synthetic sequences with known ground truth for desk-scale verification.

Players follow scripted piecewise motion (straight runs, turns, sprints,
jumps), can exit the view and re-enter elsewhere, and drop detections
through random misses or scripted occlusion windows. Appearance embeddings
share a team component so same-team players look alike, the failure mode
the post-processing stages exist for. Everything is a pure function of the
scenario plus its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .contracts import Detection, FrameInput, SeqInfo, SequenceResult, Sport
from .errors import InfeasibleSpecError, UnknownKeyError
from .geometry import BoundingBox
from .io_formats import (
    PathLike,
    _convert,
    _parse_kv,
    write_detections,
    write_embeddings,
    write_result,
    write_seqinfo,
)


@dataclass
class MotionSegment:
    """One motion phase; kinds: linear, turn, sprint, jump.

    turn_rate is radians per frame; accel adds to speed per frame; amplitude
    is the peak vertical excursion of a jump in pixels (the base motion
    keeps running underneath the arc).
    """

    kind: str
    frames: int
    turn_rate: float = 0.0
    accel: float = 0.0
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "turn", "sprint", "jump"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.frames < 1:
            raise ValueError("segment length must be at least 1 frame")


@dataclass
class PlayerSpec:
    start: Tuple[float, float]
    velocity: Tuple[float, float]
    team: int = 0
    size: Tuple[float, float] = (25.0, 45.0)
    segments: List[MotionSegment] = field(default_factory=list)


@dataclass
class ReentryEvent:
    """Player visible through exit_frame, absent in between, back at
    reentry_frame standing at reentry_point."""

    player: int  # 1-based identity
    exit_frame: int
    reentry_frame: int
    reentry_point: Tuple[float, float]


@dataclass
class ScenarioSpec:
    sport: Sport
    players: List[PlayerSpec]
    field_size: Tuple[int, int] = (1280, 720)
    duration: int = 100
    dropout: float = 0.0
    occlusions: List[Tuple[int, int, int]] = field(default_factory=list)
    reentry_events: List[ReentryEvent] = field(default_factory=list)
    det_jitter: float = 0.0
    embedding_dim: int = 16
    team_beta: float = 0.8
    noise_sigma: float = 0.1
    seed: int = 0
    name: str = "synthetic"
    fps: int = 25

    def __post_init__(self):
        if not self.players:
            raise ValueError("scenario needs at least one player")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError(f"dropout must lie in [0, 1], got {self.dropout}")
        if self.duration < 1:
            raise ValueError("duration must be at least 1 frame")
        for event in self.reentry_events:
            if event.reentry_frame <= event.exit_frame:
                raise ValueError(
                    f"player {event.player}: re-entry frame {event.reentry_frame} "
                    f"must come after exit frame {event.exit_frame}")
            if not 1 <= event.player <= len(self.players):
                raise ValueError(f"re-entry names unknown player {event.player}")


@dataclass
class GeneratedSequence:
    gt: SequenceResult
    detections: Dict[int, List[Detection]]
    embeddings: Dict[Tuple[int, int], np.ndarray]
    seqinfo: SeqInfo
    embedding_dim: int

    def frame_inputs(self) -> List[FrameInput]:
        return [FrameInput(frame=f, detections=self.detections.get(f, []))
                for f in range(1, self.seqinfo.length + 1)]

    def write(self, outdir: PathLike) -> Dict[str, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {"gt": outdir / "gt.txt", "dets": outdir / "det.txt",
                 "embeds": outdir / "embeds.txt",
                 "seqinfo": outdir / "seqinfo.txt"}
        write_result(self.gt, paths["gt"])
        write_detections(self.detections, paths["dets"])
        write_embeddings(self.embeddings, self.embedding_dim, paths["embeds"])
        write_seqinfo(self.seqinfo, paths["seqinfo"])
        return paths


def _rotate(vx: float, vy: float, angle: float) -> Tuple[float, float]:
    c, s = math.cos(angle), math.sin(angle)
    return c * vx - s * vy, s * vx + c * vy


def _player_path(player: PlayerSpec, duration: int) -> List[Tuple[float, float]]:
    """Center positions for frames 1..duration, before exit/re-entry edits."""
    x, y = player.start
    vx, vy = player.velocity
    plan: List[MotionSegment] = list(player.segments)
    positions = []
    seg_index, seg_pos = 0, 0
    for _ in range(duration):
        seg = plan[seg_index] if seg_index < len(plan) else None
        offset = 0.0
        if seg is not None and seg.kind == "jump":
            s = (seg_pos + 1) / (seg.frames + 1)
            offset = -4.0 * seg.amplitude * s * (1.0 - s)
        positions.append((x, y + offset))
        x, y = x + vx, y + vy
        if seg is not None:
            if seg.kind == "turn":
                vx, vy = _rotate(vx, vy, seg.turn_rate)
            elif seg.kind == "sprint":
                speed = math.hypot(vx, vy)
                if speed > 0:
                    factor = (speed + seg.accel) / speed
                    vx, vy = vx * factor, vy * factor
            seg_pos += 1
            if seg_pos >= seg.frames:
                seg_index += 1
                seg_pos = 0
    return positions


def _box_at(player: PlayerSpec, cx: float, cy: float,
            field_h: int) -> BoundingBox:
    # players lower in the frame appear mildly larger
    scale = 0.8 + 0.4 * min(max(cy / field_h, 0.0), 1.0)
    w, h = player.size[0] * scale, player.size[1] * scale
    return BoundingBox(cx - w / 2, cy - h / 2, w, h)


def generate(spec: ScenarioSpec) -> GeneratedSequence:
    """Simulate the scenario; raises InfeasibleSpec when a player would leave
    the field on a frame without a scripted exit."""
    rng = np.random.default_rng(spec.seed)
    width, height = spec.field_size
    n = len(spec.players)

    teams = sorted({p.team for p in spec.players})
    team_vecs = {}
    for t in teams:
        v = rng.normal(size=spec.embedding_dim)
        team_vecs[t] = v / np.linalg.norm(v)
    player_means = []
    for _ in range(n):
        v = rng.normal(size=spec.embedding_dim)
        player_means.append(v / np.linalg.norm(v))

    hidden: Dict[int, set] = {i: set() for i in range(1, n + 1)}
    warp: Dict[Tuple[int, int], Tuple[float, float]] = {}
    for event in spec.reentry_events:
        hidden[event.player].update(range(event.exit_frame + 1,
                                          event.reentry_frame))
        warp[(event.player, event.reentry_frame)] = event.reentry_point
    occluded: Dict[int, set] = {i: set() for i in range(1, n + 1)}
    for player, start, end in spec.occlusions:
        occluded[player].update(range(start, end + 1))

    paths = [_player_path(p, spec.duration) for p in spec.players]
    # re-entry teleports: shift the remaining path so it continues from the
    # scripted point with the motion plan's own deltas
    for (player, at_frame) in sorted(warp, key=lambda key: key[1]):
        if at_frame > spec.duration:
            continue  # re-entry scripted past the end: the player never returns
        point = warp[(player, at_frame)]
        path = paths[player - 1]
        base = path[at_frame - 1]
        dx, dy = point[0] - base[0], point[1] - base[1]
        paths[player - 1] = path[:at_frame - 1] + \
            [(x + dx, y + dy) for x, y in path[at_frame - 1:]]

    gt: SequenceResult = {}
    detections: Dict[int, List[Detection]] = {}
    embeddings: Dict[Tuple[int, int], np.ndarray] = {}
    for f in range(1, spec.duration + 1):
        gt[f] = []
        detections[f] = []
        for i, player in enumerate(spec.players, start=1):
            if f in hidden[i]:
                continue
            cx, cy = paths[i - 1][f - 1]
            box = _box_at(player, cx, cy, height)
            if box.x < 0 or box.y < 0 or box.x + box.w > width \
                    or box.y + box.h > height:
                raise InfeasibleSpecError(
                    f"player {i} leaves the field at frame {f} "
                    f"without a scripted exit (box at {cx:.0f},{cy:.0f})")
            gt[f].append((i, box))

            if f in occluded[i] or (spec.dropout > 0
                                    and rng.random() < spec.dropout):
                continue
            if spec.det_jitter > 0:
                jx, jy = rng.normal(0.0, spec.det_jitter, size=2)
            else:
                jx = jy = 0.0
            det_box = BoundingBox(box.x + jx, box.y + jy, box.w, box.h)
            score = float(rng.uniform(0.7, 1.0))
            raw = player_means[i - 1] + spec.team_beta * team_vecs[player.team] \
                + spec.noise_sigma * rng.normal(size=spec.embedding_dim)
            emb = raw / np.linalg.norm(raw)
            index = len(detections[f])
            detections[f].append(Detection(box=det_box, score=score,
                                           embedding=emb))
            embeddings[(f, index)] = emb

    seqinfo = SeqInfo(name=spec.name, width=width, height=height,
                      fps=spec.fps, length=spec.duration, sport=spec.sport)
    return GeneratedSequence(gt=gt, detections=detections,
                             embeddings=embeddings, seqinfo=seqinfo,
                             embedding_dim=spec.embedding_dim)


# ------------------------------------------------------------------- presets


def _orbit_players(count: int, width: int, height: int, speed: float,
                   turn_rate: float, duration: int,
                   margin: float = 170.0) -> List[PlayerSpec]:
    """Players on small circular paths, spread over the field, bounded forever."""
    cols = math.ceil(math.sqrt(count * width / height))
    rows = math.ceil(count / cols)
    players = []
    for i in range(count):
        r, c = divmod(i, cols)
        cx = margin + (width - 2 * margin) * (c + 0.5) / cols
        cy = margin + (height - 2 * margin) * (r + 0.5) / rows
        phase = 2 * math.pi * (i % 4) / 4
        vx, vy = _rotate(speed, 0.0, phase)
        players.append(PlayerSpec(
            start=(cx, cy), velocity=(vx, vy), team=i % 2,
            segments=[MotionSegment("turn", duration, turn_rate=turn_rate)]))
    return players


def _linear_2p(seed: int) -> ScenarioSpec:
    return ScenarioSpec(
        sport=Sport.FOOTBALL, name="linear-2p", duration=100, seed=seed,
        players=[
            PlayerSpec(start=(120.0, 200.0), velocity=(8.0, 1.0)),
            PlayerSpec(start=(120.0, 500.0), velocity=(8.0, -1.0), team=1),
        ])


def _sprint_and_turn(seed: int) -> ScenarioSpec:
    # two players close head-on, vanish for five frames while both turn 90
    # degrees, then reappear offset sideways: recovery by overlap is
    # impossible there, recovery by center distance is well inside 80 px
    quarter = math.pi / 2 / 5
    p1 = PlayerSpec(
        start=(250.0, 330.0), velocity=(13.0, 0.0),
        segments=[MotionSegment("linear", 25),
                  MotionSegment("turn", 5, turn_rate=-quarter),
                  MotionSegment("sprint", 18, accel=0.2)])
    p2 = PlayerSpec(
        start=(790.0, 345.0), velocity=(-13.0, 0.0), team=1,
        segments=[MotionSegment("jump", 10, amplitude=22.0),
                  MotionSegment("linear", 15),
                  MotionSegment("turn", 5, turn_rate=-quarter),
                  MotionSegment("linear", 18)])
    return ScenarioSpec(
        sport=Sport.FOOTBALL, name="sprint-and-turn", duration=48, seed=seed,
        players=[p1, p2], det_jitter=0.8,
        occlusions=[(1, 26, 30), (2, 26, 30)])


def _reentry(players: List[PlayerSpec], duration: int, player: int,
             exit_frame: int, reentry_frame: int,
             shift: Tuple[float, float]) -> ReentryEvent:
    """Re-entry standing a controlled offset from where the exit happened."""
    path = _player_path(players[player - 1], duration)
    ex, ey = path[exit_frame - 1]
    return ReentryEvent(player=player, exit_frame=exit_frame,
                        reentry_frame=reentry_frame,
                        reentry_point=(ex + shift[0], ey + shift[1]))


def _basketball_reentry_10p(seed: int) -> ScenarioSpec:
    players = _orbit_players(10, 1280, 720, speed=3.0, turn_rate=0.12,
                             duration=350, margin=150.0)
    # the second re-entry faces a queue holding two same-team identities,
    # so only appearance can resolve it
    events = [
        _reentry(players, 350, player=2, exit_frame=80, reentry_frame=145,
                 shift=(25.0, 25.0)),
        _reentry(players, 350, player=5, exit_frame=120, reentry_frame=200,
                 shift=(-25.0, 25.0)),
        _reentry(players, 350, player=9, exit_frame=160, reentry_frame=265,
                 shift=(25.0, -25.0)),
    ]
    return ScenarioSpec(
        sport=Sport.BASKETBALL, name="basketball-reentry-10p", duration=350,
        seed=seed, players=players, reentry_events=events, det_jitter=0.5)


def _football_fragments_22p(seed: int) -> ScenarioSpec:
    players = _orbit_players(22, 1280, 720, speed=3.0, turn_rate=0.2,
                             duration=700, margin=120.0)
    # one fragment pair per band of the time-gap gate; each re-entry lands a
    # known distance from its exit point, inside that band's gate but (for
    # the longer gaps) outside the tighter ones
    events = [
        _reentry(players, 700, player=16, exit_frame=100, reentry_frame=150,
                 shift=(0.0, 60.0)),        # gap 50  -> gate 100, dist 60
        _reentry(players, 700, player=18, exit_frame=120, reentry_frame=420,
                 shift=(-113.0, 113.0)),    # gap 300 -> gate 250, dist ~160
        _reentry(players, 700, player=20, exit_frame=60, reentry_frame=660,
                 shift=(-230.0, 160.0)),    # gap 600 -> gate 400, dist ~280
    ]
    return ScenarioSpec(
        sport=Sport.FOOTBALL, name="football-fragments-22p", duration=700,
        seed=seed, players=players, reentry_events=events, det_jitter=0.5)


def _volleyball_12p(seed: int) -> ScenarioSpec:
    players = _orbit_players(12, 1280, 720, speed=2.5, turn_rate=0.12,
                             duration=300, margin=150.0)
    # staggered windows: each re-entry sees exactly one absent identity
    events = [
        _reentry(players, 300, player=2, exit_frame=70, reentry_frame=120,
                 shift=(50.0, 10.0)),
        _reentry(players, 300, player=7, exit_frame=140, reentry_frame=200,
                 shift=(-45.0, 25.0)),
        _reentry(players, 300, player=12, exit_frame=220, reentry_frame=270,
                 shift=(30.0, -40.0)),
    ]
    return ScenarioSpec(
        sport=Sport.VOLLEYBALL, name="volleyball-12p", duration=300,
        seed=seed, players=players, reentry_events=events, det_jitter=0.5)


_PRESETS = {
    "linear-2p": _linear_2p,
    "sprint-and-turn": _sprint_and_turn,
    "basketball-reentry-10p": _basketball_reentry_10p,
    "football-fragments-22p": _football_fragments_22p,
    "volleyball-12p": _volleyball_12p,
}


def preset_names() -> List[str]:
    return list(_PRESETS)


def presets(seed: int = 0) -> Dict[str, ScenarioSpec]:
    return {name: build(seed) for name, build in _PRESETS.items()}


def preset(name: str, seed: int = 0) -> ScenarioSpec:
    if name not in _PRESETS:
        raise UnknownKeyError(
            f"unknown preset {name!r}; choose from {', '.join(_PRESETS)}")
    return _PRESETS[name](seed)


_SCENARIO_KINDS = {"preset": str, "seed": int, "duration": int,
                   "dropout": float, "det_jitter": float, "team_beta": float,
                   "noise_sigma": float, "name": str}


def read_scenario_values(path: PathLike) -> Dict[str, object]:
    """Preset name plus overrides from a `key = value` file, unapplied."""
    values: Dict[str, object] = {}
    for key, (raw, line_no) in _parse_kv(path).items():
        if key not in _SCENARIO_KINDS:
            raise UnknownKeyError(f"line {line_no}: unknown scenario key {key!r}")
        values[key] = _convert(key, raw, _SCENARIO_KINDS[key], line_no)
    if "preset" not in values:
        raise UnknownKeyError("scenario file must name a preset")
    return values


def read_scenario(path: PathLike) -> ScenarioSpec:
    """Scenario from a `key = value` file: a preset name plus overrides."""
    values = read_scenario_values(path)
    spec = preset(values.pop("preset"), seed=values.pop("seed", 0))
    return replace(spec, **values) if values else spec
