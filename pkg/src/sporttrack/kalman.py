"""Constant-velocity Kalman filter over box center, area and aspect ratio.

State layout is a 7-vector (u, v, s, r, du, dv, ds): center position, box
area, aspect ratio w/h, and per-frame velocities of the first three. Aspect
ratio carries no velocity. Measurements are (u, v, s, r).

Noise magnitudes scale with the box dimension d = sqrt(s): position terms in
units of d, area terms in units of d^2, aspect treated as a small constant.
The weights are configuration values with documented defaults, not hidden
literals; see KalmanParams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import InvalidGapError
from .geometry import BoundingBox

F = np.eye(7)
F[0, 4] = F[1, 5] = F[2, 6] = 1.0

H = np.zeros((4, 7))
H[0, 0] = H[1, 1] = H[2, 2] = H[3, 3] = 1.0


@dataclass
class KalmanParams:
    """Noise configuration; all stds are relative to box scale d = sqrt(area).

    measurement_std_weight: measurement noise std as a fraction of d.
    process_position_std_weight: per-step process noise std on position, fraction of d.
    process_velocity_std_weight: per-step process noise std on velocity, fraction of d.
    initial_velocity_variance_scale: inflation of the velocity variance at init,
        reflecting that a single box says nothing about motion.
    aspect_measurement_std / aspect_process_std: absolute stds for the (dimensionless)
        aspect ratio.
    """

    measurement_std_weight: float = 1.0 / 20
    process_position_std_weight: float = 1.0 / 20
    process_velocity_std_weight: float = 1.0 / 160
    initial_velocity_variance_scale: float = 1000.0
    aspect_measurement_std: float = 1e-1
    aspect_process_std: float = 1e-2


DEFAULT_PARAMS = KalmanParams()


@dataclass
class KalmanState:
    """Mean (7,) and covariance (7, 7); covariance stays symmetric positive definite."""

    mean: np.ndarray
    covariance: np.ndarray


def box_to_measurement(box: BoundingBox) -> np.ndarray:
    return np.array([box.x + box.w / 2, box.y + box.h / 2, box.w * box.h, box.w / box.h])


def measurement_to_box(z: np.ndarray) -> BoundingBox:
    s = max(float(z[2]), 1e-9)
    r = max(float(z[3]), 1e-9)
    w = math.sqrt(s * r)
    h = s / w
    return BoundingBox(float(z[0]) - w / 2, float(z[1]) - h / 2, w, h)


def state_box(state: KalmanState) -> BoundingBox:
    return measurement_to_box(state.mean[:4])


def _scale(mean: np.ndarray) -> float:
    return math.sqrt(max(float(mean[2]), 1e-9))


def _measurement_noise(d: float, p: KalmanParams) -> np.ndarray:
    stds = [p.measurement_std_weight * d,
            p.measurement_std_weight * d,
            p.measurement_std_weight * d * d,
            p.aspect_measurement_std]
    return np.diag(np.square(stds))


def _process_noise(d: float, p: KalmanParams) -> np.ndarray:
    stds = [p.process_position_std_weight * d,
            p.process_position_std_weight * d,
            p.process_position_std_weight * d * d,
            p.aspect_process_std,
            p.process_velocity_std_weight * d,
            p.process_velocity_std_weight * d,
            p.process_velocity_std_weight * d * d]
    return np.diag(np.square(stds))


def init_state(box: BoundingBox, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    """State for a freshly observed box: measured values, zero velocities."""
    z = box_to_measurement(box)
    mean = np.zeros(7)
    mean[:4] = z
    d = _scale(mean)
    p = params
    stds = [2 * p.measurement_std_weight * d,
            2 * p.measurement_std_weight * d,
            2 * p.measurement_std_weight * d * d,
            p.aspect_measurement_std,
            p.process_velocity_std_weight * d,
            p.process_velocity_std_weight * d,
            p.process_velocity_std_weight * d * d]
    covariance = np.diag(np.square(stds))
    covariance[4:, 4:] *= p.initial_velocity_variance_scale
    return KalmanState(mean, covariance)


def predict(state: KalmanState, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    """Advance one frame under constant velocity; aspect ratio stays put.

    If the area velocity would drive the area non-positive it is zeroed
    first, so a shrinking box bottoms out instead of inverting.
    """
    mean = state.mean.copy()
    if mean[2] + mean[6] <= 0:
        mean[6] = 0.0
    d = _scale(mean)
    mean = F @ mean
    covariance = F @ state.covariance @ F.T + _process_noise(d, params)
    return KalmanState(mean, covariance)


def update(state: KalmanState, box: BoundingBox,
           params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    return _update_measurement(state, box_to_measurement(box), params)


def _update_measurement(state: KalmanState, z: np.ndarray,
                        params: KalmanParams) -> KalmanState:
    d = _scale(state.mean)
    R = _measurement_noise(d, params)
    P = state.covariance
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    mean = state.mean + K @ (z - H @ state.mean)
    # Joseph form keeps the covariance symmetric positive definite over long runs.
    IKH = np.eye(7) - K @ H
    covariance = IKH @ P @ IKH.T + K @ R @ K.T
    covariance = (covariance + covariance.T) / 2
    return KalmanState(mean, covariance)


def virtual_measurements(last_obs: BoundingBox, new_obs: BoundingBox,
                         t0: int, t1: int) -> List[np.ndarray]:
    """Measurement-space interpolation at the whole frames strictly between t0 and t1."""
    z0 = box_to_measurement(last_obs)
    z1 = box_to_measurement(new_obs)
    gap = t1 - t0
    return [z0 + (z1 - z0) * ((t - t0) / gap) for t in range(t0 + 1, t1)]


def oru_reupdate(state: KalmanState, last_obs: BoundingBox, t0: int,
                 new_obs: BoundingBox, t1: int,
                 params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    """Re-run the filter across an observation gap along a straight virtual path.

    state must be the state as of the last real observation at frame t0. The
    frames strictly between t0 and t1 get linearly interpolated measurements,
    then the real box at t1 is applied. The returned state (mean and
    covariance) replaces whatever accumulated during the gap.
    """
    if t1 <= t0 + 1:
        raise InvalidGapError(
            f"re-update needs a gap of at least one frame, got t0={t0}, t1={t1}")
    current = state
    for z in virtual_measurements(last_obs, new_obs, t0, t1):
        current = predict(current, params)
        current = update(current, measurement_to_box(z), params)
    current = predict(current, params)
    current = update(current, new_obs, params)
    return current
