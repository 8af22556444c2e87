import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from petransport.analysis import (
    bound_audit,
    check_interval_lemma,
    denominator_condition,
    distance_to_constant,
    entropy_scan,
    envelope_rate,
    find_rho,
    fit_decay,
    fit_decay_after_transient,
    log_binom,
    mixing_nu,
    norm_samples,
    pe_quantities,
    two_circle_functionals,
)
from petransport.coeff import build_theta
from petransport.net import Network, length
from petransport.signals import StepSignal, make_random_pe, make_single_circle_escape
from petransport.solver import InitialData, Segment, TraceField

ZERO = StepSignal.constant(0.0)
ONE = StepSignal.constant(1.0)


def sine_data(net):
    return InitialData(
        tuple((Segment(0.0, L, "callable", fn=(lambda L: lambda x: 1 + 0.5 * np.sin(2 * np.pi * x / L))(L)),) for L in net.L)
    )


def test_fit_decay_exact():
    ts = np.linspace(0, 10, 20)
    fit = fit_decay([(t, 3 * math.exp(-0.7 * t)) for t in ts])
    assert fit.C == pytest.approx(3.0, rel=1e-12)
    assert fit.gamma == pytest.approx(0.7, rel=1e-12)
    assert fit.residual < 1e-12
    assert abs(fit_decay([(t, 2.0) for t in ts]).gamma) < 1e-14


def test_fit_decay_rejects():
    with pytest.raises(ValueError):
        fit_decay([(t, 1.0) for t in range(5)])
    with pytest.raises(ValueError):
        fit_decay([(t, 1.0 - t) for t in range(10)])


def test_fit_after_transient_drops_early_samples():
    samples = [(t, 100.0 if t < 2 else math.exp(-t)) for t in np.arange(0.0, 12.0, 0.5)]
    fit = fit_decay_after_transient(samples, 1.0)
    assert fit.gamma == pytest.approx(1.0, rel=1e-12)


def test_always_damped_rate():
    net = Network.build([length(1)], [[1.0]], [(0.2, 0.6)])
    tf = TraceField(net, [ONE], sine_data(net), 41.0)
    fit = fit_decay(norm_samples(tf, np.arange(2, 41, 1.0)))
    assert fit.gamma == pytest.approx(0.4, rel=0.01)


def test_mixing_nu():
    assert mixing_nu(np.full((2, 2), 0.5)) == 0.5
    M = np.array([[0.3, -0.2, 0.25], [0.35, 0.4, -0.3], [-0.25, 0.3, 0.4]])
    nu = mixing_nu(M)
    assert 0 < nu < 1
    with pytest.raises(ValueError):
        mixing_nu([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        mixing_nu([[0.9, 0.5], [0.5, 0.5]])


def test_mixing_nu_approaches_one():
    nus = [mixing_nu([[1 - d, 0.5], [d, 0.5]]) for d in (0.1, 0.01, 0.001)]
    assert nus == sorted(nus) and nus[-1] == pytest.approx(1.0, abs=2e-3)


def test_pe_quantities():
    q = pe_quantities(2.0, 1.0, 0.0, 0.5)
    assert (q.rho_j, q.ell_j) == (0.125, 0.125)
    q = pe_quantities(1.5, 1.5, 0.0, 3.0)
    assert (q.rho_j, q.ell_j) == (1.5, 1.5)
    assert pe_quantities(2.0, 0.8, 0.1, 0.6).rho_j == pytest.approx(2 * pe_quantities(2.0, 0.4, 0.1, 0.6).rho_j)
    with pytest.raises(ValueError):
        pe_quantities(1.0, 2.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        pe_quantities(1.0, 0.5, 0.5, 0.5)


def test_interval_lemma_examples():
    res = check_interval_lemma(ONE, 1.0, 1.0, 0.1, 0.6, 3.3)
    assert res.ok and res.interval == pytest.approx((3.3, 4.3))
    esc = make_single_circle_escape(1.0, 0.5)
    assert check_interval_lemma(esc, 1.0, 0.25, 0.0, 0.5, 0.7).ok
    with pytest.raises(ValueError):
        check_interval_lemma(esc, 1.0, 0.5, 0.0, 0.5, 0.0)


@given(seed=st.integers(0, 10_000), t=st.floats(-10, 10), a=st.floats(0, 1), w=st.floats(0.05, 2))
def test_interval_lemma_fuzz(seed, t, a, w):
    sig = make_random_pe(2.0, 0.5, seed)
    res = check_interval_lemma(sig, 2.0, 0.5, a, a + w, t)
    assert res.ok
    lo, hi = res.interval
    taus = np.linspace(lo, hi, 7)[1:-1]
    assert np.all(sig.integral(taus + a, taus + a + w) >= res.rho - 1e-12)


def test_denominator_condition():
    assert denominator_condition(1, 15, 1.0, 1.0, 1.0, 0.0, 0.5)
    assert not denominator_condition(1, 14, 1.0, 1.0, 1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        denominator_condition(2, 14, 1.0, 1.0, 1.0, 0.0, 0.5)
    assert not denominator_condition(1, 15, 1.0, 4.0, 1.0, 0.0, 0.5)


def test_find_rho_half():
    est = find_rho(0.5)
    assert 0.105 <= est.rho <= 0.115
    grid = np.arange(1e-4, 0.5, 1e-4)
    H = -grid * np.log(grid) - (1 - grid) * np.log1p(-grid)
    scan_rho = grid[np.argmax(H >= 0.5 * math.log(2))]
    assert abs(est.rho - scan_rho) <= 1e-4
    assert est.gamma == pytest.approx(0.25 * math.log(2))
    assert entropy_scan(est, 0.5) <= 1.0


@pytest.mark.parametrize("nu", [0.2, 0.6, 0.9, 0.999])
def test_find_rho_valid(nu):
    est = find_rho(nu, n_max=2000)
    assert 0 < est.rho < 0.5
    assert entropy_scan(est, nu, n_max=2000) <= 1.0


def test_find_rho_shrinks_near_one():
    assert find_rho(0.999, 100).rho < find_rho(0.9, 100).rho < find_rho(0.5, 100).rho


def test_log_binom():
    assert math.exp(log_binom(10, 3)) == pytest.approx(120)


def test_bound_audit_clean(three_circle):
    sig = [make_random_pe(2, 0.5, 1), make_random_pe(2, 0.5, 2)]
    tab = build_theta(three_circle, sig, 10.0)
    rep = bound_audit(tab, three_circle, mixing_nu(three_circle.M))
    assert rep.ok
    assert rep.n_entries == 9 * len(tab.nodes)


def test_bound_audit_contractive_rate():
    net = Network.build([length(1), length(1, "SQRT2")], [[0.4, 0.3], [0.5, 0.6]], [(0.0, 0.5)])
    tab = build_theta(net, [ZERO], 30 * math.sqrt(2))
    rep = bound_audit(tab, net)
    assert rep.ok
    assert rep.envelope_rate >= -math.log(0.9) * 0.95


def test_bound_audit_reports_violation(two_circle):
    tab = build_theta(two_circle, [ZERO], 5.0)
    tab.values[3] *= 10
    rep = bound_audit(tab, two_circle, 0.5)
    assert not rep.ok
    assert {v["bound"] for v in rep.violations} >= {"unit"}


def test_envelope_rate_needs_points():
    assert envelope_rate([(0, 1.0), (1, 0.5)]) is None
    assert envelope_rate([(m, math.exp(-0.3 * m)) for m in range(6)]) == pytest.approx(0.3)


def test_two_circle_functionals(two_circle):
    net = Network.build([length(1), length(1, "SQRT2")], [[0.5, 0.5], [0.5, 0.5]])
    tf = TraceField(net, [], sine_data(net), 20.0)
    U0 = two_circle_functionals(tf, 0.0).U
    for t in (0.7, 4.1, 13.3, 19.0):
        st_ = two_circle_functionals(tf, t)
        assert st_.U == pytest.approx(U0, abs=1e-10)
        h = 1e-4
        fd = (two_circle_functionals(tf, t + h).V - two_circle_functionals(tf, t - h).V) / (2 * h)
        assert st_.Vdot == pytest.approx(fd, abs=1e-6)
    # data equal at both circle ends gives Vdot = 0 at t = 0
    assert two_circle_functionals(tf, 0.0).Vdot == 0.0
    assert distance_to_constant(tf, 0.0, U0) > 0
    with pytest.raises(ValueError):
        two_circle_functionals(TraceField(two_circle, [ZERO], sine_data(two_circle), 1.0), 0.5)
