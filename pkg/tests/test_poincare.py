import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgembed import poincare as pb
from kgembed.linalg import mat_vec


def ball_points(rng, n, d, c=1.0, max_radius=0.95):
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    radius = max_radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return v * radius / math.sqrt(c)


def test_conformal_factor_values(rng):
    assert pb.conformal_factor(np.zeros(3)) == 2.0
    assert abs(pb.conformal_factor([0.5]) - 8.0 / 3.0) <= 1e-15
    assert np.all(pb.conformal_factor(ball_points(rng, 100, 4)) >= 2.0)


def test_mobius_add_1d_velocity_oracle():
    assert abs(pb.mobius_add([0.3], [0.4])[0] - (0.3 + 0.4) / (1 + 0.3 * 0.4)) <= 1e-15
    assert abs(pb.mobius_add([0.3], [0.4])[0] - 0.625) <= 1e-15


def test_distance_and_maps_1d():
    assert abs(pb.distance([0.0], [0.5]) - 2.0 * math.atanh(0.5)) <= 1e-12
    assert abs(pb.distance([0.0], [0.5]) - 1.0986123) <= 1e-7
    assert abs(pb.exp_map([0.0], [0.5])[0] - math.tanh(0.5)) <= 1e-15
    assert abs(pb.exp0([0.5])[0] - 0.4621172) <= 1e-7
    assert abs(pb.log_map([0.0], [math.tanh(0.5)])[0] - 0.5) <= 1e-12
    assert abs(pb.log0([math.tanh(0.5)])[0] - 0.5) <= 1e-12


def test_distance_uses_inverse_of_first_argument():
    x, y = np.array([0.3, -0.1]), np.array([0.3, -0.1])
    assert pb.distance(x, y) == 0.0


def test_mismatch_raises():
    with pytest.raises(ValueError):
        pb.mobius_add([0.1, 0.2], [0.1])
    with pytest.raises(ValueError):
        pb.distance([0.1], [0.1, 0.0])
    with pytest.raises(ValueError):
        pb.mobius_add([0.1], [0.1], c=0.0)
    with pytest.raises(ValueError):
        pb.mobius_matvec(np.eye(3), [0.1, 0.2])


def test_project_to_ball():
    np.testing.assert_array_equal(pb.project_to_ball(np.zeros(4)), np.zeros(4))
    v = np.array([2.0, 0.0])
    assert abs(np.linalg.norm(pb.project_to_ball(v)) - (1 - 1e-5)) <= 1e-15
    w = np.array([0.3, 0.4])
    np.testing.assert_array_equal(pb.project_to_ball(w), w)
    assert abs(np.linalg.norm(pb.project_to_ball(v, c=4.0)) - (1 - 1e-5) / 2) <= 1e-15


def test_maps_at_zero_tangent_are_exact():
    x = np.array([0.2, -0.4])
    np.testing.assert_array_equal(pb.exp_map(x, np.zeros(2)), x)
    np.testing.assert_array_equal(pb.log_map(x, x), np.zeros(2))


def test_mobius_matvec(rng):
    x = ball_points(rng, 1, 5)[0]
    np.testing.assert_allclose(pb.mobius_matvec(np.eye(5), x), x, atol=1e-9)
    np.testing.assert_array_equal(pb.mobius_matvec(rng.normal(size=(5, 5)), np.zeros(5)), np.zeros(5))
    for _ in range(20):
        m = np.diag(rng.uniform(-2, 2, size=5))
        x = ball_points(rng, 1, 5, max_radius=0.9)[0]
        composed = pb.exp_map(np.zeros(5), mat_vec(m, pb.log_map(np.zeros(5), x)))
        np.testing.assert_allclose(pb.mobius_matvec(m, x), composed, rtol=0, atol=1e-12)


@pytest.mark.parametrize("d", [2, 5, 40])
def test_identity_suite(d):
    rng = np.random.default_rng(d)
    n = 1000
    x = ball_points(rng, n, d)
    y = ball_points(rng, n, d)
    z = ball_points(rng, n, d)
    zero = np.zeros_like(x)
    np.testing.assert_allclose(pb.mobius_add(x, zero), x, atol=1e-12)
    np.testing.assert_allclose(pb.mobius_add(zero, x), x, atol=1e-12)
    np.testing.assert_allclose(pb.mobius_add(-x, x), zero, atol=1e-12)
    np.testing.assert_array_equal(pb.distance(x, x), 0.0)
    dxy = pb.distance(x, y)
    np.testing.assert_allclose(dxy, pb.distance(y, x), rtol=1e-9)
    assert np.all(pb.distance(x, z) <= dxy + pb.distance(y, z) + 1e-9)
    v = pb.log_map(x, y)
    np.testing.assert_allclose(pb.exp_map(x, v), y, atol=1e-9)
    # keep sqrt(c) * lambda_x * |v| / 2 <= 1 so the image is not clipped by projection
    tangent = rng.normal(size=(n, d))
    tangent *= rng.uniform(size=(n, 1)) * 2.0 / (pb.conformal_factor(x)[:, None] * np.linalg.norm(tangent, axis=1, keepdims=True))
    np.testing.assert_allclose(pb.log_map(x, pb.exp_map(x, tangent)), tangent, atol=1e-9)
    for out in (pb.mobius_add(x, y), pb.exp_map(x, tangent * 1e3), pb.exp0(tangent * 1e3), pb.mobius_add(x, -y)):
        assert pb.in_ball(out)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=3, max_size=3),
    st.lists(st.floats(-50, 50), min_size=3, max_size=3),
    st.sampled_from([0.5, 1.0, 2.0]),
)
def test_outputs_stay_in_ball(a, b, c):
    x = pb.project_to_ball(np.array(a), c)
    y = pb.project_to_ball(np.array(b), c)
    assert pb.in_ball(x, c) and pb.in_ball(y, c)
    assert pb.in_ball(pb.mobius_add(x, y, c), c)
    assert pb.in_ball(pb.exp_map(x, np.array(b), c), c)
    assert np.isfinite(pb.distance(x, y, c))
    assert np.all(np.isfinite(pb.log_map(x, y, c)))


@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
def test_vjps_match_finite_differences(c):
    rng = np.random.default_rng(7)
    h = 1e-6
    x = ball_points(rng, 1, 4, c, 0.7)[0]
    y = ball_points(rng, 1, 4, c, 0.7)[0]
    g = rng.normal(size=4)

    def fd(fn, at):
        out = np.zeros_like(at)
        for i in range(len(at)):
            e = np.zeros_like(at)
            e[i] = h
            out[i] = (fn(at + e) - fn(at - e)) / (2 * h)
        return out

    gx, gy = pb.mobius_add_vjp(x, y, g, c)
    np.testing.assert_allclose(gx, fd(lambda t: g @ pb.mobius_add(t, y, c), x), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(gy, fd(lambda t: g @ pb.mobius_add(x, t, c), y), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(
        pb.sqdist_vjp(y, c),
        fd(lambda t: (2 / math.sqrt(c) * math.atanh(math.sqrt(c) * np.linalg.norm(t))) ** 2, y),
        rtol=1e-6,
    )
    v = rng.normal(size=4)
    np.testing.assert_allclose(pb.exp0_vjp(v, g, c), fd(lambda t: g @ pb.exp0(t, c), v), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(pb.log0_vjp(y, g, c), fd(lambda t: g @ pb.log0(t, c), y), rtol=1e-6, atol=1e-8)


def test_ratio_series_agree_with_closed_form():
    for t in [1e-3, 2e-4, 1.01e-4]:
        assert abs(pb.tanh_ratio(np.array(t)) - math.tanh(t) / t) < 1e-14
        assert abs(pb.atanh_ratio(np.array(t)) - math.atanh(t) / t) < 1e-14
    for t in [9.9e-5, 1e-7]:
        assert abs(pb.tanh_ratio(np.array(t)) - math.tanh(t) / t) < 1e-14
        assert abs(pb.atanh_ratio(np.array(t)) - math.atanh(t) / t) < 1e-14
