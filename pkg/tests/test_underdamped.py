"""Splitting integrators: sub-steps, compositions, and reduction laws."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_langevin import (
    SamplerConfig,
    SchemeId,
    constant_monitor,
    gaussian_init,
    harmonic,
    make_stepper,
    modified_harmonic,
    monitor_g3,
    run_ensemble,
    step_A_implicit,
    step_B_hat,
    step_B_tilde,
    step_O_hat,
    step_O_tilde,
)
from adaptive_langevin.underdamped import (
    ADAPTIVE_SCHEMES,
    FixedSplittingStepper,
    SplittingStepper,
)

BETA_INV = 1.0


@pytest.fixture(scope="module")
def well():
    return modified_harmonic(a=2.75, b=0.1, c=0.1, x0=0.5)


@pytest.fixture(scope="module")
def well_monitor(well):
    return monitor_g3(well, m=0.1, Mcap=1.1)


def test_velocity_verlet_oracle():
    # One BAOAB step with gamma = 0 and zero noise is velocity Verlet:
    # V = x^2/2, x = 1, p = 0, h = 0.1:
    #   p_half = -0.05, x' = 0.995, p' = -0.09975
    pot = harmonic(1.0)
    stepper = FixedSplittingStepper("BAOAB", pot, beta_inv=1.0, gamma=0.0)

    class ZeroRng:
        def standard_normal(self, shape):
            return np.zeros(shape)

    x = np.array([[1.0]])
    p = np.array([[0.0]])
    x1, p1, _ = stepper.step(x, p, ZeroRng(), 0.1)
    assert x1[0, 0] == pytest.approx(0.995, abs=1e-15)
    assert p1[0, 0] == pytest.approx(-0.09975, abs=1e-15)


def test_kick_steps_agree_up_to_gradient_term(well, well_monitor):
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, size=(16, 1))
    p = rng.standard_normal((16, 1))
    h = 0.1
    hat = step_B_hat(x, p, h, well, well_monitor, BETA_INV)
    tilde = step_B_tilde(x, p, h, well, well_monitor)
    np.testing.assert_array_equal(hat.x, x)
    np.testing.assert_array_equal(tilde.x, x)
    np.testing.assert_allclose(
        hat.p - tilde.p,
        h * BETA_INV * well_monitor.eval_gradg(x),
        rtol=1e-12,
    )


def test_thermostat_preserves_maxwellian_variance(well, well_monitor):
    # Exact Ornstein-Uhlenbeck update: starting from the Maxwellian, the
    # momentum variance beta_inv is left invariant for any stepsize.
    rng = np.random.default_rng(1)
    n = 200000
    x = np.full((n, 1), 1.3)
    p = np.sqrt(BETA_INV) * rng.standard_normal((n, 1))
    z = rng.standard_normal((n, 1))
    rec = step_O_hat(x, p, 2.0, z, gamma=0.7, beta_inv=BETA_INV,
                     mon=well_monitor)
    assert rec.p.var() == pytest.approx(BETA_INV, rel=0.02)
    np.testing.assert_array_equal(rec.x, x)


def test_thermostat_decay_rate_uses_monitor(well, well_monitor):
    # Deterministic part of the thermostat decays like exp(-gamma g(x) h).
    x = np.array([[0.5], [3.0]])
    p = np.array([[1.0], [1.0]])
    z = np.zeros((2, 1))
    gamma, h = 0.7, 0.3
    rec = step_O_hat(x, p, h, z, gamma=gamma, beta_inv=BETA_INV,
                     mon=well_monitor)
    g = well_monitor.eval_g(x)
    np.testing.assert_allclose(rec.p[:, 0], np.exp(-gamma * g * h), rtol=1e-12)


def test_corrected_thermostat_requires_friction(well, well_monitor):
    x = np.ones((1, 1))
    p = np.ones((1, 1))
    z = np.zeros((1, 1))
    with pytest.raises(ValueError):
        step_O_tilde(x, p, 0.1, z, gamma=0.0, beta_inv=BETA_INV,
                     mon=well_monitor)


def test_drift_step_constant_monitor_is_exact():
    mon = constant_monitor(0.5)
    x = np.array([[1.0], [-2.0]])
    p = np.array([[3.0], [1.0]])
    rec = step_A_implicit(x, p, 0.2, mon)
    np.testing.assert_allclose(rec.x, x + 0.2 * p * 0.5, rtol=1e-15)
    assert np.all(rec.fp_iters >= 0)
    assert np.max(np.abs(rec.fp_iters)) <= 2


def test_drift_step_solves_midpoint_equation(well, well_monitor):
    rng = np.random.default_rng(2)
    x = rng.uniform(-2, 2, size=(64, 1))
    p = rng.standard_normal((64, 1))
    h = 0.2
    rec = step_A_implicit(x, p, h, well_monitor, fp_tol=1e-13)
    mid = well_monitor.eval_g((x + rec.x) / 2.0)[:, None]
    np.testing.assert_allclose(rec.x, x + h * p * mid, atol=1e-12)
    assert np.all(rec.fp_iters > 0)


def test_drift_step_flags_nonconvergence():
    # Entries whose iteration budget runs out before reaching the tolerance
    # must come back with negative counts, not silently accepted iterates.
    # At this stepsize the midpoint map is non-contractive for part of the
    # batch, so the same call exercises both outcomes.
    pot = modified_harmonic(a=10.0, b=0.1, c=0.1, x0=0.5)
    mon = monitor_g3(pot, m=0.001, Mcap=2.0)
    x = np.linspace(-0.5, 1.5, 32)[:, None]
    p = np.full((32, 1), 3.0)
    rec = step_A_implicit(x, p, 0.5, mon, fp_tol=1e-10, fp_max_iter=500)
    assert np.any(rec.fp_iters < 0)
    assert np.any(rec.fp_iters > 0)
    tight = step_A_implicit(x, p, 0.5, mon, fp_tol=1e-10, fp_max_iter=2)
    assert np.all(tight.fp_iters < 0)


REDUCTION_CASES = [
    (SchemeId.BAOAB_HAT, "BAOAB"),
    (SchemeId.BAOAB_TILDE, "BAOAB"),
    (SchemeId.ABOBA_HAT, "ABOBA"),
    (SchemeId.ABOBA_TILDE, "ABOBA"),
    (SchemeId.OBABO_HAT, "OBABO"),
    (SchemeId.OBABO_TILDE, "OBABO"),
    (SchemeId.SPV_IP, "SPV"),
]


@pytest.mark.parametrize("scheme,letters", REDUCTION_CASES)
def test_unit_monitor_reduces_to_fixed_scheme_bitwise(scheme, letters, well):
    # With g = 1 every adaptive scheme must reproduce its fixed-stepsize
    # counterpart exactly (bitwise), not merely to rounding accuracy.
    mon = constant_monitor(1.0)
    adaptive = SplittingStepper(scheme, well, mon, BETA_INV, gamma=0.4)
    fixed = FixedSplittingStepper(letters, well, BETA_INV, gamma=0.4)
    rng_a = np.random.default_rng(123)
    rng_b = np.random.default_rng(123)
    x = np.array([[0.3], [-1.2], [2.0]])
    p = np.array([[0.5], [0.0], [-1.5]])
    xa, pa = x, p
    xb, pb = x, p
    for _ in range(25):
        xa, pa, _ = adaptive.step(xa, pa, rng_a, 0.21)
        xb, pb, _ = fixed.step(xb, pb, rng_b, 0.21)
        np.testing.assert_array_equal(xa, xb)
        np.testing.assert_array_equal(pa, pb)


@pytest.mark.parametrize("pair", [
    (SchemeId.BAOAB_HAT, SchemeId.BAOAB_TILDE),
    (SchemeId.ABOBA_HAT, SchemeId.ABOBA_TILDE),
    (SchemeId.OBABO_HAT, SchemeId.OBABO_TILDE),
])
def test_hat_and_tilde_agree_for_constant_monitor(pair, well):
    # For constant g the gradient correction vanishes, so the two correction
    # placements coincide bitwise.
    mon = constant_monitor(0.8)
    a = SplittingStepper(pair[0], well, mon, BETA_INV, gamma=0.4)
    b = SplittingStepper(pair[1], well, mon, BETA_INV, gamma=0.4)
    rng_a = np.random.default_rng(7)
    rng_b = np.random.default_rng(7)
    x = np.array([[0.3], [-1.2]])
    p = np.array([[0.5], [0.0]])
    xa, pa = x, p
    xb, pb = x, p
    for _ in range(25):
        xa, pa, _ = a.step(xa, pa, rng_a, 0.17)
        xb, pb, _ = b.step(xb, pb, rng_b, 0.17)
        np.testing.assert_array_equal(xa, xb)
        np.testing.assert_array_equal(pa, pb)


@pytest.mark.parametrize("scheme", sorted(ADAPTIVE_SCHEMES,
                                          key=lambda s: s.name))
def test_adaptive_schemes_sample_gibbs_on_harmonic(scheme, well_monitor, well):
    # Harmonic target with a nonconstant monitor taken from another
    # potential: every adaptive scheme must still produce m2 ~ beta_inv.
    pot = harmonic(1.0)
    mon = monitor_g3(well, m=0.1, Mcap=1.1)
    cfg = SamplerConfig(h=0.1, beta_inv=1.0, gamma=0.5, t_final=20.0,
                        n_traj=2000, seed=4, avg_window=10.0)
    stepper = make_stepper(scheme, pot, mon, cfg.beta_inv, cfg.gamma,
                           cfg.fp_tol, cfg.fp_max_iter)
    rep = run_ensemble(stepper, cfg, gaussian_init(0.0, 1.0, momentum=True),
                       monitor=mon)
    assert rep.escaped == 0
    assert rep.moments[1] == pytest.approx(1.0, abs=0.05)


def test_fp_statistics_are_reported(well, well_monitor):
    cfg = SamplerConfig(h=0.3, beta_inv=1.0, gamma=0.1, t_final=10.0,
                        n_traj=256, seed=6, fp_tol=1e-12)
    stepper = make_stepper(SchemeId.BAOAB_TILDE, well, well_monitor,
                           cfg.beta_inv, cfg.gamma, cfg.fp_tol,
                           cfg.fp_max_iter)
    rep = run_ensemble(stepper, cfg, gaussian_init(0.5, 1.0, momentum=True))
    assert rep.fp_iters_mean > 0
    assert rep.fp_iters_max >= rep.fp_iters_mean


@settings(max_examples=20, deadline=None)
@given(h=st.floats(1e-3, 0.4), seed=st.integers(0, 10_000))
def test_reduction_property_random_h_and_seed(h, seed):
    pot = modified_harmonic(a=2.75, b=0.1, c=0.1, x0=0.5)
    mon = constant_monitor(1.0)
    adaptive = SplittingStepper(SchemeId.BAOAB_HAT, pot, mon, 1.0, gamma=0.2)
    fixed = FixedSplittingStepper("BAOAB", pot, 1.0, gamma=0.2)
    rng_a = np.random.default_rng(seed)
    rng_b = np.random.default_rng(seed)
    x = np.array([[0.4]])
    p = np.array([[-0.3]])
    xa, pa, _ = adaptive.step(x, p, rng_a, h)
    xb, pb, _ = fixed.step(x, p, rng_b, h)
    np.testing.assert_array_equal(xa, xb)
    np.testing.assert_array_equal(pa, pb)
