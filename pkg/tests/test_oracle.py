import math

import numpy as np
import pytest

from petransport.net import Network, length
from petransport.oracle import (
    recursive_field,
    recursive_trace,
    recursive_traces,
    upwind_init,
    upwind_solve,
    upwind_step,
    upwind_traces,
)
from petransport.signals import StepSignal, make_random_pe
from petransport.solver import InitialData, Segment, TraceField, poly

ZERO = StepSignal.constant(0.0)
ONE = StepSignal.constant(1.0)


def sine_data(net):
    return InitialData(
        tuple((Segment(0.0, L, "callable", fn=(lambda L: lambda x: 1 + 0.5 * np.sin(2 * np.pi * x / L))(L)),) for L in net.L)
    )


def test_short_time(two_circle):
    sig = [make_random_pe(2, 0.5, 1)]
    z0 = InitialData(((poly(0, 1, 0.2, 1.0),), (poly(0, math.sqrt(2), 1.0, -0.3),)))
    t = 0.37
    eps0 = math.exp(-sig[0].integral(max(0.0, t - 1 + 0.1), t - 1 + 0.4)) if t - 1 + 0.4 > 0 else 1.0
    ends = np.array([eps0 * float(z0.evaluate(0, 1 - t)), float(z0.evaluate(1, math.sqrt(2) - t))])
    np.testing.assert_allclose(recursive_traces(two_circle, sig, z0, t), two_circle.M @ ends, rtol=1e-15)


def test_always_damped_single_circle():
    net = Network.build([length(1)], [[1.0]], [(0.2, 0.7)])
    z0 = InitialData(((poly(0, 1, 1.0),),))
    for k in range(1, 8):
        assert recursive_trace(net, [ONE], z0, 0, float(k)) == pytest.approx(math.exp(-0.5 * k), rel=1e-13)


def test_recursive_field_matches_solver(three_circle):
    sig = [make_random_pe(2, 0.5, 2), make_random_pe(1.5, 0.4, 3)]
    z0 = sine_data(three_circle)
    tf = TraceField(three_circle, sig, z0, 6.0)
    for t, x in [(0.3, 0.8), (2.71, 0.05), (5.9, 1.3)]:
        for i in range(3):
            x_i = min(x, three_circle.L[i])
            assert recursive_field(three_circle, sig, z0, i, t, x_i) == pytest.approx(tf.field(i, t, x_i), rel=1e-10)


def test_rejects_negative_time(two_circle):
    with pytest.raises(ValueError):
        recursive_traces(two_circle, [ZERO], sine_data(two_circle), -0.1)


def test_deep_recursion(two_circle):
    # many traversals of the short circle; the guard must not fire
    val = recursive_trace(two_circle, [ZERO], sine_data(two_circle), 0, 60.0)
    assert 0.5 <= val <= 1.5


def test_unit_cfl_exact_shift():
    net = Network.build([length(2)], [[1.0]], [(0.3, 0.9)])
    z0 = sine_data(net)
    st0 = upwind_init(net, z0, 64)
    st = upwind_solve(net, [ZERO], z0, 2.0, 64)
    np.testing.assert_allclose(st.cells[0], st0.cells[0], rtol=0, atol=1e-14)


def test_upwind_mass_conserved(two_circle):
    st = upwind_init(two_circle, sine_data(two_circle), 50)
    m0 = st.mass()
    dt = 0.7 * st.h.min()
    for _ in range(200):
        st = upwind_step(st, two_circle, [ZERO], dt)
        assert st.mass() == pytest.approx(m0, abs=1e-10)


def test_cfl_violation(two_circle):
    st = upwind_init(two_circle, sine_data(two_circle), 10)
    with pytest.raises(ValueError):
        upwind_step(st, two_circle, [ZERO], 2 * st.h.min())


def test_upwind_first_order(two_circle):
    sig = [make_random_pe(2, 0.5, 3)]
    z0 = sine_data(two_circle)
    tf = TraceField(two_circle, sig, z0, 3.0)
    errs = []
    for n in (100, 200, 400, 800):
        st = upwind_solve(two_circle, sig, z0, 2.5, n)
        errs.append(sum(h * np.abs(c - tf.field(i, 2.5, st.centers(i))).sum() for i, (h, c) in enumerate(zip(st.h, st.cells))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders >= 0.8) & (orders <= 1.2))


def test_upwind_traces_close_to_exact(two_circle):
    sig = [make_random_pe(2, 0.5, 5)]
    z0 = sine_data(two_circle)
    tf = TraceField(two_circle, sig, z0, 4.0)
    ts = np.array([0.5, 1.7, 3.9])
    approx = upwind_traces(two_circle, sig, z0, ts, 800)
    assert np.abs(approx - tf.traces(ts)).max() < 0.02
