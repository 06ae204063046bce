"""Shared data contracts passed between the tracker, post-processing and I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from .geometry import BoundingBox


class Sport(str, Enum):
    BASKETBALL = "basketball"
    FOOTBALL = "football"
    VOLLEYBALL = "volleyball"


@dataclass
class Detection:
    """One observed box in one frame, with confidence and optional appearance."""

    box: BoundingBox
    score: float
    embedding: Optional[np.ndarray] = None


@dataclass
class FrameInput:
    """All detections of a single frame, in detector output order."""

    frame: int
    detections: List[Detection] = field(default_factory=list)


# frame -> list of (identity, box); within a frame identities are unique
SequenceResult = Dict[int, List[Tuple[int, BoundingBox]]]


@dataclass
class SeqInfo:
    """Static metadata of one sequence."""

    name: str
    width: int
    height: int
    fps: int
    length: int
    sport: Sport


def sort_result(result: SequenceResult) -> SequenceResult:
    """Canonical ordering: frames ascending, entries by identity within a frame."""
    return {
        frame: sorted(result[frame], key=lambda entry: entry[0])
        for frame in sorted(result)
    }


def result_identities(result: SequenceResult) -> List[int]:
    """Sorted distinct identities appearing anywhere in a result."""
    seen = set()
    for entries in result.values():
        for track_id, _ in entries:
            seen.add(track_id)
    return sorted(seen)
