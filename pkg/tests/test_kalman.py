from __future__ import annotations

import math

import numpy as np
import pytest

from sporttrack.errors import InvalidGapError
from sporttrack.geometry import BoundingBox
from sporttrack.kalman import (
    DEFAULT_PARAMS,
    box_to_measurement,
    init_state,
    measurement_to_box,
    oru_reupdate,
    predict,
    state_box,
    update,
    virtual_measurements,
)


def centered_box(cx, cy, w=20.0, h=40.0):
    return BoundingBox(cx - w / 2, cy - h / 2, w, h)


def test_init_state_means():
    s = init_state(BoundingBox(0, 0, 10, 10))
    assert np.allclose(s.mean, [5, 5, 100, 1, 0, 0, 0])
    s = init_state(BoundingBox(2, 4, 6, 8))
    assert np.allclose(s.mean, [5, 8, 48, 0.75, 0, 0, 0])


def test_init_state_covariance_matches_documented_defaults():
    p = DEFAULT_PARAMS
    s = init_state(BoundingBox(0, 0, 10, 10))
    d = 10.0  # sqrt(area) of a 10x10 box
    expected = np.diag(np.square([
        2 * p.measurement_std_weight * d,
        2 * p.measurement_std_weight * d,
        2 * p.measurement_std_weight * d * d,
        p.aspect_measurement_std,
        p.process_velocity_std_weight * d,
        p.process_velocity_std_weight * d,
        p.process_velocity_std_weight * d * d,
    ]))
    expected[4:, 4:] *= p.initial_velocity_variance_scale
    assert np.allclose(s.covariance, expected)


def test_predict_zero_velocity_keeps_position():
    s = init_state(BoundingBox(0, 0, 10, 10))
    out = predict(s)
    assert np.allclose(out.mean[:4], [5, 5, 100, 1])


def test_predict_one_euler_step():
    s = init_state(BoundingBox(0, 0, 10, 10))
    s.mean[:] = [0, 0, 100, 1, 2, 3, 0]
    out = predict(s)
    assert np.allclose(out.mean, [2, 3, 100, 1, 2, 3, 0])


def test_predict_clamps_area_velocity():
    s = init_state(BoundingBox(0, 0, 10, 10))
    s.mean[:] = [0, 0, 100, 1, 0, 0, -150]
    out = predict(s)
    assert out.mean[2] == 100  # shrink rate zeroed before it inverts the box
    assert out.mean[6] == 0


def test_predict_inflates_covariance_trace():
    rng = np.random.default_rng(7)
    s = init_state(BoundingBox(0, 0, 20, 40))
    for _ in range(50):
        out = predict(s)
        assert np.trace(out.covariance) > np.trace(s.covariance)
        s = update(out, centered_box(*(rng.uniform(0, 100, size=2))))


def test_update_zero_innovation_keeps_position():
    box = BoundingBox(10, 10, 20, 40)
    s = init_state(box)
    out = update(s, box)
    assert np.allclose(out.mean[:4], s.mean[:4])


def test_update_converges_monotonically_to_repeated_observation():
    s = init_state(BoundingBox(0, 0, 20, 40))
    target = centered_box(50, 30)
    tz = box_to_measurement(target)
    initial = math.hypot(s.mean[0] - tz[0], s.mean[1] - tz[1])
    prev = math.inf
    for _ in range(30):
        s = update(s, target)
        residual = math.hypot(s.mean[0] - tz[0], s.mean[1] - tz[1])
        assert residual < prev or residual == 0
        prev = residual
    assert prev < initial / 20


def test_update_shrinks_position_variance():
    s = predict(init_state(BoundingBox(0, 0, 20, 40)))
    out = update(s, BoundingBox(1, 1, 20, 40))
    for i in range(4):
        assert out.covariance[i, i] <= s.covariance[i, i]


def test_covariance_stays_symmetric_pd_through_random_cycles():
    rng = np.random.default_rng(1234)
    s = init_state(BoundingBox(0, 0, 20, 40))
    for i in range(10_000):
        s = predict(s)
        if rng.random() < 0.8:
            cx, cy = rng.uniform(0, 1000, size=2)
            w = rng.uniform(5, 80)
            h = rng.uniform(5, 80)
            s = update(s, centered_box(cx, cy, w, h))
        if i % 500 == 0 or i == 9999:
            assert np.abs(s.covariance - s.covariance.T).max() < 1e-9
            np.linalg.cholesky(s.covariance)  # raises if not positive definite


def test_noiseless_constant_velocity_prediction_converges():
    vx, vy = 4.0, -2.0
    s = init_state(centered_box(100, 100))
    for k in range(1, 21):
        s = predict(s)
        truth = centered_box(100 + vx * k, 100 + vy * k)
        error = math.hypot(s.mean[0] - (100 + vx * k), s.mean[1] - (100 + vy * k))
        s = update(s, truth)
    assert error < 0.5


def test_virtual_measurements_midpoint():
    a = BoundingBox(0, 0, 10, 10)
    b = BoundingBox(10, 0, 10, 10)
    (z,) = virtual_measurements(a, b, t0=3, t1=5)
    za, zb = box_to_measurement(a), box_to_measurement(b)
    assert np.allclose(z, (za + zb) / 2)


def test_virtual_measurements_constant_when_observation_repeats():
    a = BoundingBox(5, 5, 12, 24)
    za = box_to_measurement(a)
    for z in virtual_measurements(a, a, t0=0, t1=7):
        assert np.allclose(z, za)


def test_oru_rejects_consecutive_frames():
    a = BoundingBox(0, 0, 10, 10)
    with pytest.raises(InvalidGapError):
        oru_reupdate(init_state(a), a, 4, a, 5)
    with pytest.raises(InvalidGapError):
        oru_reupdate(init_state(a), a, 5, a, 4)


def test_oru_single_gap_equals_manual_midpoint_path():
    last = centered_box(50, 50)
    new = centered_box(70, 58)
    base = update(predict(init_state(centered_box(46, 48))), last)

    via_oru = oru_reupdate(base, last, t0=10, new_obs=new, t1=12)

    mid = box_to_measurement(last) + (box_to_measurement(new) - box_to_measurement(last)) / 2
    manual = update(predict(update(predict(base), measurement_to_box(mid))), new)
    assert np.array_equal(via_oru.mean, manual.mean)


def test_oru_beats_blind_prediction_after_a_turn():
    # Moving +x for 10 frames, then hidden for 9 frames while moving +y.
    s = init_state(centered_box(0, 100))
    for k in range(1, 11):
        s = predict(s)
        s = update(s, centered_box(6.0 * k, 100))
    last = centered_box(60, 100)
    new = centered_box(60, 154)  # reappears below after the turn

    blind = s
    for _ in range(10):
        blind = predict(blind)
    blind = update(blind, new)

    smoothed = oru_reupdate(s, last, t0=10, new_obs=new, t1=20)

    nz = box_to_measurement(new)
    blind_residual = math.hypot(blind.mean[0] - nz[0], blind.mean[1] - nz[1])
    oru_residual = math.hypot(smoothed.mean[0] - nz[0], smoothed.mean[1] - nz[1])
    assert oru_residual < blind_residual


def test_state_box_round_trip():
    box = BoundingBox(3, 7, 14, 35)
    out = state_box(init_state(box))
    assert out.x == pytest.approx(box.x)
    assert out.y == pytest.approx(box.y)
    assert out.w == pytest.approx(box.w)
    assert out.h == pytest.approx(box.h)
