import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from petransport.net import Network, length
from petransport.oracle import recursive_trace
from petransport.signals import StepSignal, make_random_pe
from petransport.solver import (
    InitialData,
    Segment,
    TraceField,
    bump,
    bump_comb,
    check_compatibility,
    distance,
    gauss_nodes,
    poly,
    zero_data,
)

ZERO = StepSignal.constant(0.0)
ONE = StepSignal.constant(1.0)


def smooth_data(net):
    """Polynomial data with distinct pieces on every circle."""
    circles = []
    for i, Li in enumerate(net.L):
        h = Li / 2
        circles.append((poly(0, h, 0.3 + 0.1 * i, 1.0, -0.5), poly(h, Li, 0.7, -0.2 * i, 0.4)))
    return InitialData(tuple(circles))


def test_gauss_nodes_exact_for_polynomials():
    x, w = gauss_nodes(np.array([0.0, 0.3, 2.0]), 0.25)
    assert np.sum(w) == pytest.approx(2.0, rel=1e-14)
    assert np.sum(w * x**9) == pytest.approx(2.0**10 / 10, rel=1e-13)


def test_initial_data_validation(two_circle):
    assert smooth_data(two_circle).validate(two_circle) == []
    bad = InitialData(((poly(0, 0.5),), (poly(0, math.sqrt(2)),)))
    assert any("cover" in p for p in bad.validate(two_circle))
    gap = InitialData(((poly(0, 0.4), poly(0.5, 1.0)), (poly(0, math.sqrt(2)),)))
    assert any("gap" in p for p in gap.validate(two_circle))
    assert any("circles" in p for p in InitialData(((poly(0, 1),),)).validate(two_circle))


def test_initial_data_json_round_trip(two_circle):
    z0 = InitialData(((bump(0, 0.6, 2.0), poly(0.6, 1.0, 1, 2)), (poly(0, math.sqrt(2), 0.5),)))
    back = InitialData.from_json(z0.to_json())
    xs = np.linspace(0, 1, 17)
    np.testing.assert_array_equal(back.evaluate(0, xs), z0.evaluate(0, xs))
    with pytest.raises(ValueError):
        Segment(0, 1, "callable", fn=np.sin).to_json()


def test_bump_comb():
    segs = bump_comb(3.0, 1.0, 0.1, 0.4)
    z = InitialData((segs,))
    xs = np.array([0.25, 1.25, 2.25, 0.05, 1.7])
    v = z.evaluate(0, xs)
    assert v[0] == pytest.approx(v[1]) == pytest.approx(v[2])
    assert v[0] > 0 and v[3] == 0 and v[4] == 0
    with pytest.raises(ValueError):
        bump_comb(2.5, 1.0, 0.1, 0.4)


def test_compatibility_examples(two_circle):
    const = InitialData(((poly(0, 1, 0.7),), (poly(0, math.sqrt(2), 0.7),)))
    assert check_compatibility(const, two_circle) == pytest.approx(0.0, abs=1e-15)
    comb = InitialData((bump_comb(2, 1, 0.1, 0.4), bump_comb(3, 1, 0.1, 0.4)))
    rational = Network.build([length(2), length(3)], [[0.5, 0.5], [0.5, 0.5]])
    assert check_compatibility(comb, rational) == 0.0
    # one nonzero endpoint value: at x = L it enters through m_00 = 1/2, at x = 0 it is the defect itself
    at_end = InitialData(((poly(0, 0.5), poly(0.5, 1.0, 0.0, 2.0)), (poly(0, math.sqrt(2)),)))
    assert check_compatibility(at_end, two_circle) == pytest.approx(0.5)
    at_start = InitialData(((poly(0, 0.5, 1.0, -2.0), poly(0.5, 1)), (poly(0, math.sqrt(2)),)))
    assert check_compatibility(at_start, two_circle) == pytest.approx(1.0)


def test_short_time_trace(two_circle):
    z0 = smooth_data(two_circle)
    tf = TraceField(two_circle, [ZERO], z0, 2.0)
    for t in (0.1, 0.5, 0.93):
        ends = np.array([z0.evaluate(j, two_circle.L[j] - t) for j in range(2)])
        np.testing.assert_allclose(tf.traces([t])[:, 0], two_circle.M @ ends, rtol=1e-14)


def test_single_circle_rotation():
    net = Network.build([length(1)], [[1.0]], [(0.0, 0.5)])
    z0 = InitialData(((poly(0, 0.3, 0.0, 1.0), poly(0.3, 1.0, 0.5, -0.2)),))
    tf = TraceField(net, [ZERO], z0, 12.0)
    for t in (0.25, 1.6, 7.3, 11.95):
        expect = z0.evaluate(0, 1.0 - (t % 1.0))
        assert tf.boundary_trace(0, t) == pytest.approx(float(expect), abs=1e-13)
        assert tf.lp_norm(0, t, 2) == pytest.approx(tf.lp_norm(0, 0.0, 2), rel=1e-12)


def test_field_at_time_zero(three_circle):
    z0 = smooth_data(three_circle)
    tf = TraceField(three_circle, [make_random_pe(2, 0.5, 1), ONE], z0, 3.0)
    for i in range(3):
        xs = np.linspace(0, three_circle.L[i], 11)
        np.testing.assert_allclose(tf.field(i, 0.0, xs), z0.evaluate(i, xs), rtol=0, atol=1e-15)


def test_always_damped_period_factor():
    net = Network.build([length(1)], [[1.0]], [(0.2, 0.6)])
    tf = TraceField(net, [ONE], smooth_data(net), 10.0)
    for t in (1.3, 4.7, 8.1):
        ratio = tf.lp_norm(0, t + 1.0) / tf.lp_norm(0, t)
        assert ratio == pytest.approx(math.exp(-0.4), rel=1e-10)


def test_matches_recursive_oracle_at_t7(two_circle):
    sig = [make_random_pe(2, 0.5, 4)]
    z0 = smooth_data(two_circle)
    tf = TraceField(two_circle, sig, z0, 8.0)
    for t in (7.0, 7.0137):
        for i in range(2):
            ref = recursive_trace(two_circle, sig, z0, i, t)
            assert tf.boundary_trace(i, t) == pytest.approx(ref, rel=1e-10, abs=1e-14)


@given(t=st.floats(0.01, 9.9))
def test_junction_identity(three_circle, t):
    sig = [make_random_pe(2, 0.5, 8), make_random_pe(3, 1.0, 9)]
    tf = TraceField(three_circle, sig, smooth_data(three_circle), 10.0)
    ends = np.array([tf.field(j, t, three_circle.L[j]) for j in range(3)])
    np.testing.assert_allclose(tf.traces([t])[:, 0], three_circle.M @ ends, rtol=0, atol=1e-10)


def test_cocycle_via_restart(two_circle):
    sig = [make_random_pe(2, 0.5, 13)]
    tf = TraceField(two_circle, sig, smooth_data(two_circle), 9.0)
    for s in (1.7, 3.05):
        tr = tf.restart(s)
        for t in (4.4, 8.2):
            for i in range(2):
                xs = np.linspace(0.0123, two_circle.L[i] - 0.0371, 9)
                np.testing.assert_allclose(tr.field(i, t - s, xs), tf.field(i, t, xs), rtol=0, atol=1e-9)


def test_mass_conservation_undamped(two_circle):
    tf = TraceField(two_circle, [ZERO], smooth_data(two_circle), 15.0)
    m0 = tf.mass(0.0)
    for t in np.linspace(0.5, 15.0, 9):
        assert tf.mass(t) == pytest.approx(m0, abs=1e-10)


def test_l1_contraction(three_circle):
    sig = [make_random_pe(2, 0.5, 30), make_random_pe(2, 0.5, 31)]
    tf = TraceField(three_circle, sig, smooth_data(three_circle), 12.0)
    norms = [tf.total_norm(t, 1) for t in np.linspace(0, 12, 25)]
    assert all(b <= a + 1e-10 for a, b in zip(norms, norms[1:]))


def test_polynomial_l2_exact(two_circle):
    z0 = InitialData(((poly(0, 1, 1.0, 2.0),), (poly(0, math.sqrt(2), 0.0, 0.0, 3.0),)))
    tf = TraceField(two_circle, [ZERO], z0, 1.0)
    # int_0^1 (1 + 2x)^2 = 13/3 ; int_0^L 9x^4 = 9 L^5 / 5
    assert tf.lp_norm(0, 0.0, 2) == pytest.approx(math.sqrt(13 / 3), rel=1e-12)
    assert tf.lp_norm(1, 0.0, 2) == pytest.approx(math.sqrt(9 * math.sqrt(2) ** 5 / 5), rel=1e-12)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_trace_bound(two_circle, p):
    sig = [make_random_pe(2, 0.5, 40)]
    tf = TraceField(two_circle, sig, smooth_data(two_circle), 9.0)
    for t in (3.3, 6.1, 8.9):
        for i in range(2):
            x, w = tf.quadrature(i, t)
            rhs = float(np.sum(w * np.abs(tf.traces(t - x)[i]) ** p)) ** (1 / p)
            lhs = tf.lp_norm(i, t, p)
            if i < two_circle.n_d:
                assert lhs <= rhs * (1 + 1e-12)
            else:
                assert lhs == pytest.approx(rhs, rel=1e-12)


def test_distance_between_identical_states(two_circle):
    tf = TraceField(two_circle, [make_random_pe(2, 0.5, 2)], smooth_data(two_circle), 5.0)
    assert distance(tf, 3.2, tf, 3.2) == 0.0
    assert distance(tf, 0.0, tf, 4.0) > 0.0


def test_zero_data_stays_zero(three_circle):
    tf = TraceField(three_circle, [ONE, ZERO], zero_data(three_circle), 6.0)
    assert tf.total_norm(5.5, 2) == 0.0


def test_rejects_bad_input(two_circle):
    with pytest.raises(ValueError):
        TraceField(two_circle, [ZERO], InitialData(((poly(0, 1),),)), 2.0)
    tf = TraceField(two_circle, [ZERO], smooth_data(two_circle), 2.0)
    with pytest.raises(ValueError):
        tf.quadrature(0, 1.0, 0)
