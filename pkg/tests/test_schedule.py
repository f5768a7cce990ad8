"""Schedule construction and forward-process tests, including the
high-precision product oracle and Monte Carlo moment checks."""

import mpmath
import numpy as np
import pytest

from glyphdiff.errors import ConfigError, ShapeMismatch
from glyphdiff.schedule import NoiseSchedule, build_linear_schedule, forward_marginal, single_step


def test_endpoints_exact():
    s = build_linear_schedule(1000, 1e-4, 0.02)
    assert s.betas[0] == 1e-4
    assert s.betas[-1] == 0.02
    assert s.timesteps == 1000


def test_single_point_schedule():
    s = build_linear_schedule(1, 0.007, 0.007)
    np.testing.assert_array_equal(s.betas, [0.007])


def test_alpha_bar_against_high_precision_product():
    # independent oracle: exact product of the same 1000 linearly spaced
    # alphas evaluated at 50 decimal digits
    s = build_linear_schedule(1000, 1e-4, 0.02)
    with mpmath.workdps(50):
        start, end = mpmath.mpf("1e-4"), mpmath.mpf("0.02")
        prod = mpmath.mpf(1)
        for i in range(1000):
            beta = start + (end - start) * i / mpmath.mpf(999)
            prod *= 1 - beta
        oracle = float(prod)
    assert abs(s.alpha_bars[-1] - oracle) / oracle < 1e-10
    assert oracle == pytest.approx(4.0e-5, rel=0.02)


def test_running_product_consistency():
    s = build_linear_schedule(500, 1e-4, 0.02)
    running = 1.0
    for t in range(1, 501):
        running *= s.alpha(t)
        assert abs(s.alpha_bar(t) - running) <= 1e-12 * abs(running)


def test_monotonicity_and_first_step():
    s = build_linear_schedule(100, 1e-4, 0.02)
    assert np.all(np.diff(s.betas) >= 0)
    assert np.all(np.diff(s.alpha_bars) < 0)
    assert s.alpha_bar(1) == 1 - s.beta(1)
    assert np.all((s.betas > 0) & (s.betas < 1))


@pytest.mark.parametrize("kwargs,field", [
    (dict(timesteps=0, beta_start=1e-4, beta_end=0.02), "timesteps"),
    (dict(timesteps=10, beta_start=0.0, beta_end=0.02), "beta_start"),
    (dict(timesteps=10, beta_start=0.03, beta_end=0.02), "beta_start"),
    (dict(timesteps=10, beta_start=1e-4, beta_end=1.0), "beta_end"),
])
def test_bounds_rejected(kwargs, field):
    with pytest.raises(ConfigError, match=field):
        build_linear_schedule(**kwargs)


def test_marginal_pure_cases():
    s = build_linear_schedule(100, 1e-4, 0.02)
    x0 = np.random.default_rng(0).standard_normal((4, 5))
    zero = np.zeros_like(x0)
    t = 37
    np.testing.assert_array_equal(forward_marginal(x0, t, zero, s), x0 * np.sqrt(s.alpha_bar(t)))
    np.testing.assert_array_equal(forward_marginal(zero, t, x0, s), x0 * np.sqrt(1 - s.alpha_bar(t)))
    with pytest.raises(ValueError, match="range"):
        forward_marginal(x0, 101, zero, s)
    with pytest.raises(ShapeMismatch):
        forward_marginal(x0, t, np.zeros(3), s)


def test_marginal_linearity_superposition():
    s = build_linear_schedule(100, 1e-4, 0.02)
    rng = np.random.default_rng(1)
    x1, x2 = rng.standard_normal((2, 3, 4))
    e1, e2 = rng.standard_normal((2, 3, 4))
    a, b = 0.375, -1.25  # exactly representable scalars
    lhs = forward_marginal(a * x1 + b * x2, 50, a * e1 + b * e2, s)
    rhs = a * forward_marginal(x1, 50, e1, s) + b * forward_marginal(x2, 50, e2, s)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_marginal_monte_carlo_moments():
    s = build_linear_schedule(100, 1e-4, 0.02)
    t = 50
    rng = np.random.default_rng(42)
    x0 = rng.uniform(-1, 1, size=(4, 4))
    n = 20000
    eps = rng.standard_normal((n,) + x0.shape)
    xt = forward_marginal(np.broadcast_to(x0, eps.shape).copy(), t, eps, s)
    expected_mean = np.sqrt(s.alpha_bar(t)) * x0
    sigma = np.sqrt(1 - s.alpha_bar(t))
    assert np.all(np.abs(xt.mean(axis=0) - expected_mean) < 4 * sigma / np.sqrt(n))
    var = xt.var(axis=0).mean()
    assert abs(var - sigma ** 2) / sigma ** 2 < 0.02


def test_single_step_limits():
    s = NoiseSchedule(np.full(3, 1e-12), "linear", 1e-12, 1e-12)
    x = np.random.default_rng(2).standard_normal((3, 3))
    out = single_step(x, 2, np.ones_like(x), s)
    assert np.max(np.abs(out - x)) < 1e-5

    s2 = build_linear_schedule(100, 1e-4, 0.02)
    unit = np.ones((2, 2))
    np.testing.assert_array_equal(
        single_step(np.zeros((2, 2)), 7, unit, s2), unit * np.sqrt(s2.beta(7))
    )


def test_composition_matches_marginal_moments():
    # iterate the one-step kernel from x0 and compare the resulting sample
    # moments with the closed-form marginal at the same t
    s = build_linear_schedule(100, 1e-4, 0.02)
    k = 50
    rng = np.random.default_rng(9)
    x0 = rng.uniform(-1, 1, size=6)
    n = 20000
    x = np.broadcast_to(x0, (n, 6)).copy()
    for t in range(1, k + 1):
        x = single_step(x, t, rng.standard_normal((n, 6)), s)
    want_mean = np.sqrt(s.alpha_bar(k)) * x0
    want_var = 1 - s.alpha_bar(k)
    got_var = x.var(axis=0).mean()  # pooled over pixels
    assert np.all(np.abs(x.mean(axis=0) - want_mean) < 4 * np.sqrt(want_var / n))
    assert abs(got_var - want_var) / want_var < 0.02
