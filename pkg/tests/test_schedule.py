import math

import numpy as np
import pytest

from segexpand.schedule import COSINE_T_MAX, NoiseSchedule, noise_to_score

LINEAR = NoiseSchedule(kind="linear-VP")
COSINE = NoiseSchedule(kind="cosine-VP")
GRID = np.linspace(1e-3, 1.0, 1000)


def grid_for(sched):
    # cosine times clamp at COSINE_T_MAX, so strictness holds below it
    hi = COSINE_T_MAX if sched.kind == "cosine-VP" else 1.0
    return np.linspace(1e-3, hi, 1000)


def test_alpha_sigma_endpoints():
    a0, s0 = LINEAR.alpha_sigma(0.0)
    assert a0 == 1.0
    assert s0 == LINEAR.sigma_floor  # floored, not exactly zero
    a1, _ = LINEAR.alpha_sigma(1.0)
    # analytic integral of the linear beta ramp: alpha(1) = exp(-(bmin+bmax)/4)
    np.testing.assert_allclose(a1, math.exp(-5.025), rtol=1e-12)


def test_alpha_sigma_range_check():
    with pytest.raises(ValueError, match="in \\[0, 1\\]"):
        LINEAR.alpha_sigma(1.5)
    with pytest.raises(ValueError):
        LINEAR.alpha_sigma(-0.1)


@pytest.mark.parametrize("sched", [LINEAR, COSINE], ids=["linear", "cosine"])
def test_monotone_and_variance_preserving(sched):
    alphas, sigmas = zip(*(sched.alpha_sigma(t) for t in grid_for(sched)))
    alphas, sigmas = np.array(alphas), np.array(sigmas)
    assert np.all(np.diff(alphas) < 0)
    assert np.all(np.diff(sigmas) >= 0)
    np.testing.assert_allclose(alphas ** 2 + sigmas ** 2, 1.0, atol=2e-8)


@pytest.mark.parametrize("sched", [LINEAR, COSINE], ids=["linear", "cosine"])
def test_log_snr_strictly_decreasing(sched):
    lams = np.array([sched.log_snr(t) for t in grid_for(sched)])
    assert np.all(np.diff(lams) < 0)


def test_linear_drift_closed_form():
    for t in (0.1, 0.5, 0.9):
        f, g2 = LINEAR.drift_diffusion(t)
        beta = 0.1 + t * (20.0 - 0.1)
        np.testing.assert_allclose(f, -0.5 * beta, rtol=1e-15)
        np.testing.assert_allclose(g2, beta, rtol=1e-15)


@pytest.mark.parametrize("sched", [LINEAR, COSINE], ids=["linear", "cosine"])
def test_drift_matches_finite_difference_of_log_alpha(sched):
    h = 1e-6
    hi = COSINE_T_MAX if sched.kind == "cosine-VP" else 1.0
    worst = 0.0
    for t in np.linspace(2e-3, hi - h, 1000):
        f, _ = sched.drift_diffusion(t)
        fd = (sched.log_alpha(t + h) - sched.log_alpha(t - h)) / (2 * h)
        worst = max(worst, abs(f - fd) / max(1.0, abs(fd)))
    assert worst <= 1e-6


@pytest.mark.parametrize("sched", [LINEAR, COSINE], ids=["linear", "cosine"])
def test_g2_matches_finite_difference_identity(sched):
    # g2 = d sigma^2/dt - 2 f sigma^2, checked against FD of sigma^2
    h = 1e-6
    hi = COSINE_T_MAX if sched.kind == "cosine-VP" else 1.0
    worst = 0.0
    for t in np.linspace(2e-3, hi - h, 1000):
        f, g2 = sched.drift_diffusion(t)
        s2 = lambda u: sched.alpha_sigma(u)[1] ** 2
        ds2 = (s2(t + h) - s2(t - h)) / (2 * h)
        ref = ds2 - 2 * f * s2(t)
        worst = max(worst, abs(g2 - ref) / max(1.0, abs(ref)))
    assert worst <= 1e-6


@pytest.mark.parametrize("sched", [LINEAR, COSINE], ids=["linear", "cosine"])
def test_g2_nonnegative(sched):
    assert all(sched.drift_diffusion(t)[1] >= 0 for t in GRID)


def test_time_of_log_snr_inverts():
    for sched in (LINEAR, COSINE):
        for t in (0.01, 0.2, 0.5, 0.8, 0.99):
            t_eff = min(t, COSINE_T_MAX) if sched.kind == "cosine-VP" else t
            lam = sched.log_snr(t_eff)
            np.testing.assert_allclose(sched.time_of_log_snr(lam), t_eff, atol=1e-9)


def test_forward_diffuse_identity_at_zero():
    x0 = np.linspace(-1, 1, 16).reshape(4, 4)
    eps = np.zeros_like(x0)
    np.testing.assert_allclose(LINEAR.forward_diffuse(x0, 0.0, eps), x0, atol=1e-12)


def test_forward_diffuse_zero_signal():
    eps = np.random.default_rng(0).standard_normal((4, 4))
    t = 0.3
    _, s = LINEAR.alpha_sigma(t)
    np.testing.assert_allclose(LINEAR.forward_diffuse(np.zeros((4, 4)), t, eps), s * eps, rtol=1e-15)


def test_forward_diffuse_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        LINEAR.forward_diffuse(np.zeros((2, 2)), 0.5, np.zeros((3,)))


def test_forward_diffuse_monte_carlo_variance():
    rng = np.random.default_rng(7)
    t = 0.6
    a, s = LINEAR.alpha_sigma(t)
    x0 = np.full(1, 0.37)
    n = 10_000
    draws = np.array([LINEAR.forward_diffuse(x0, t, rng.standard_normal(1))[0] for _ in range(n)])
    sample_var = draws.var(ddof=1)
    se = s ** 2 * math.sqrt(2.0 / (n - 1))
    assert abs(sample_var - s ** 2) <= 3 * se
    np.testing.assert_allclose(draws.mean(), a * 0.37, atol=3 * s / math.sqrt(n))


def test_noise_to_score_point_mass_identity():
    rng = np.random.default_rng(3)
    x0 = rng.standard_normal((3, 3))
    eps = rng.standard_normal((3, 3))
    t = 0.4
    a, s = LINEAR.alpha_sigma(t)
    x_t = LINEAR.forward_diffuse(x0, t, eps)
    # with the true noise as the estimate, score = -(x_t - a x0)/s^2 exactly
    np.testing.assert_allclose(noise_to_score(eps, s), -(x_t - a * x0) / s ** 2, rtol=1e-12)


def test_noise_to_score_zero_and_errors():
    np.testing.assert_array_equal(noise_to_score(np.zeros(4), 0.5), np.zeros(4))
    with pytest.raises(ValueError, match="positive"):
        noise_to_score(np.ones(2), 0.0)


def test_noise_to_score_gaussian_optimal_estimator():
    # data x0 ~ N(m, v): optimal noise prediction gives score -(x - a m)/(a^2 v + s^2)
    m, v = 0.4, 0.8
    t = 0.5
    a, s = LINEAR.alpha_sigma(t)
    x = np.linspace(-2, 2, 9)
    opt_eps = s * (x - a * m) / (a * a * v + s * s)
    np.testing.assert_allclose(noise_to_score(opt_eps, s), -(x - a * m) / (a * a * v + s * s), rtol=1e-12)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="unknown schedule kind"):
        NoiseSchedule(kind="sigmoid")
