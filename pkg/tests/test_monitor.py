"""Stepsize-monitor shape, bound, and gradient checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_langevin import (
    audit_criteria,
    bayes_posterior,
    constant_monitor,
    monitor_2d_channel,
    monitor_bayes,
    monitor_g1,
    monitor_g2,
    monitor_g3,
    psi,
    psi_prime,
    two_pathway,
)

from conftest import finite_difference_grad


def lower_bound(m, M):
    return m * M / (m + M)


def test_psi_at_zero_equals_upper_cap():
    for m, M in [(0.001, 2.0), (0.1, 1.1), (0.1, 1.0)]:
        assert psi(0.0, m, M) == pytest.approx(M)


def test_psi_limits_and_bounds():
    u = np.concatenate([np.linspace(0, 10, 200), [1e3, 1e6]])
    for m, M, r, alpha in [(0.001, 2.0, 1.0, 1), (0.1, 1.1, 1.0, 1),
                           (0.1, 1.0, 2.0, 2)]:
        vals = psi(u, m, M, r, alpha)
        lo = lower_bound(m, M)
        assert np.all(vals <= M * (1 + 1e-12))
        assert np.all(vals >= lo * (1 - 1e-12))
        assert vals[-1] == pytest.approx(lo, rel=1e-4)


def test_psi_monotone_decreasing_in_magnitude():
    u = np.linspace(0.0, 50.0, 500)
    vals = psi(u, 0.1, 1.1, 1.0, 1)
    assert np.all(np.diff(vals) <= 1e-15)
    # even in u
    np.testing.assert_allclose(psi(-u, 0.1, 1.1), psi(u, 0.1, 1.1))


def test_psi_prime_matches_finite_differences():
    u = np.linspace(-5.0, 5.0, 41)
    u = u[np.abs(u) > 1e-3]
    eps = 1e-6
    for m, M, r, alpha in [(0.001, 2.0, 1.0, 1), (0.1, 1.0, 2.0, 2)]:
        fd = (psi(u + eps, m, M, r, alpha) - psi(u - eps, m, M, r, alpha)) / (2 * eps)
        got = psi_prime(u, m, M, r, alpha)
        np.testing.assert_allclose(got, fd, rtol=1e-5, atol=1e-8)


def test_psi_prime_zero_at_origin():
    assert psi_prime(0.0, 0.1, 1.0, 2.0, 2) == 0.0
    assert psi_prime(0.0, 0.001, 2.0, 1.0, 1) == 0.0


@settings(max_examples=50, deadline=None)
@given(
    u=st.floats(-100.0, 100.0),
    m=st.floats(1e-3, 1.0),
    M=st.floats(0.5, 5.0),
    alpha=st.integers(1, 3),
)
def test_psi_bounds_property(u, m, M, alpha):
    v = float(psi(u, m, M, 1.0, alpha))
    assert lower_bound(m, M) - 1e-12 <= v <= M + 1e-12


def _check_monitor_gradient(mon, xs, rtol=1e-5, eps=1e-6):
    xs = np.atleast_2d(xs)
    fd = finite_difference_grad(mon.eval_g, xs, eps=eps)
    got = mon.eval_gradg(xs)
    scale = np.maximum(np.abs(fd), 1e-3)
    assert np.max(np.abs(got - fd) / scale) < rtol


def test_monitor_g3_gradient_and_bounds(sharp_well, sharp_monitor):
    xs = np.linspace(-3.0, 3.5, 101)[:, None]
    g = sharp_monitor.eval_g(xs)
    assert np.all(g <= 2.0 + 1e-12)
    assert np.all(g >= lower_bound(0.001, 2.0) - 1e-12)
    _check_monitor_gradient(sharp_monitor, xs)


def test_monitor_g2_gradient(sharp_well):
    mon = monitor_g2(sharp_well, m=0.001, Mcap=2.0)
    _check_monitor_gradient(mon, np.linspace(-2.0, 3.0, 51)[:, None])


def test_monitor_g1_gradient_loose(sharp_well):
    # g1's chain rule uses internal finite differences, so compare loosely.
    mon = monitor_g1(sharp_well, m=0.001, Mcap=2.0)
    xs = np.linspace(-2.0, 3.0, 51)
    xs = xs[np.abs(xs) > 0.3][:, None]  # keep away from the force zero
    _check_monitor_gradient(mon, xs, rtol=5e-2, eps=1e-5)


def test_monitor_bayes_gradient_and_bounds():
    mon = monitor_bayes(y_mean=1.65, a=2.0, m=0.1, Mcap=1.0, r=2.0, alpha=2)
    xs = np.linspace(-1.0, 4.0, 101)[:, None]
    g = mon.eval_g(xs)
    assert np.all((g >= lower_bound(0.1, 1.0) - 1e-12) & (g <= 1.0 + 1e-12))
    _check_monitor_gradient(mon, xs)


def test_monitor_2d_channel_small_near_channel_large_far():
    mon = monitor_2d_channel(m=0.2, Mcap=1.0, reduce_near_channel=True)
    on_channel = np.array([[0.0, 4.0], [1.0, 3.0]])     # y = 4 - x^2
    far = np.array([[0.0, 0.0], [0.0, -4.0], [3.0, 0.0]])
    g_on = mon.eval_g(on_channel)
    g_far = mon.eval_g(far)
    assert np.all(g_on < 0.35)          # near the floor m*M/(m+M) = 1/6
    assert np.all(g_far > 0.9)          # near the cap away from the channel
    rng = np.random.default_rng(3)
    xs = rng.uniform(-3, 3, size=(60, 2))
    _check_monitor_gradient(mon, xs, rtol=1e-4)


def test_constant_monitor_gradient_is_zero():
    mon = constant_monitor(0.7, dim=2)
    xs = np.ones((5, 2))
    np.testing.assert_array_equal(mon.eval_g(xs), 0.7)
    np.testing.assert_array_equal(mon.eval_gradg(xs), 0.0)


def test_audit_criteria_pass_for_valid_monitors(sharp_well, sharp_monitor):
    rep = audit_criteria(sharp_monitor, sharp_well, lo=-3.0, hi=3.5)
    assert rep.passed, rep.to_csv()
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0] == "criterion,estimate,bound,pass"
    assert len(rep.rows) >= 3  # bounds, smoothness, gradient consistency


def test_audit_criteria_pass_for_bayes_monitor():
    y = np.array([1.5, 1.8, 1.6])
    pot = bayes_posterior(y, K=4, a=2.0)
    mon = monitor_bayes(y_mean=float(y.mean()), a=2.0, m=0.1, Mcap=1.0)
    rep = audit_criteria(mon, pot, lo=-1.0, hi=4.0)
    assert rep.passed, rep.to_csv()


def test_audit_criteria_pass_for_channel_monitor():
    pot = two_pathway()
    mon = monitor_2d_channel(m=0.2, Mcap=1.0)
    rep = audit_criteria(mon, pot, lo=[-3.0, -5.0], hi=[3.0, 5.0], n_grid=41)
    assert rep.passed, rep.to_csv()
