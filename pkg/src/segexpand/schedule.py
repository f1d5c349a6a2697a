"""Variance-preserving noise schedules and the continuous-time coefficients.

A schedule defines the forward corruption x_t = alpha(t) * x0 + sigma(t) * eps
for t in [0, 1], with alpha^2 + sigma^2 = 1 (VP family). Two kinds:

  linear-VP:  log alpha(t) = -t^2 (beta_max - beta_min)/4 - t beta_min/2,
              i.e. the integral of the linear beta ramp.
  cosine-VP:  alpha(t) = cos(pi/2 (t+s)/(1+s)) / cos(pi/2 s/(1+s)), s = 0.008.

Drift f(t) = d log alpha / dt and squared diffusion g2(t) = d sigma^2/dt
- 2 f sigma^2 are closed forms (for VP, g2 = -2 f). The half-log-SNR
lambda(t) = log(alpha/sigma) is strictly decreasing, so its inverse is well
defined; DPM-style solvers step uniformly in lambda.

The cosine kind degenerates at t=1 (alpha -> 0), so its times are clamped to
COSINE_T_MAX; both kinds clamp below at t_min and floor sigma at sigma_floor
to keep score conversions finite near t=0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

COSINE_S = 0.008
COSINE_T_MAX = 0.9946


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str = "linear-VP"
    T: int = 1000
    beta_min: float = 0.1
    beta_max: float = 20.0
    t_min: float = 1e-3
    sigma_floor: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("linear-VP", "cosine-VP"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.T < 1:
            raise ValueError(f"T must be positive, got {self.T}")

    # -- time handling ------------------------------------------------------

    def t_hat(self, t_discrete: int) -> float:
        """Discrete step t in {0..T} to continuous time t/T."""
        return t_discrete / self.T

    def _eff(self, t: float) -> float:
        if self.kind == "cosine-VP":
            return min(t, COSINE_T_MAX)
        return t

    # -- core coefficients --------------------------------------------------

    def log_alpha(self, t: float) -> float:
        t = self._eff(t)
        if self.kind == "linear-VP":
            return -0.25 * t * t * (self.beta_max - self.beta_min) - 0.5 * t * self.beta_min
        c = math.pi / 2.0 / (1.0 + COSINE_S)
        return math.log(math.cos(c * (t + COSINE_S))) - math.log(math.cos(c * COSINE_S))

    def alpha_sigma(self, t: float) -> tuple[float, float]:
        """(alpha_t, sigma_t); sigma is floored at sigma_floor."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {t}")
        la = self.log_alpha(t)
        alpha = math.exp(la)
        sigma = math.sqrt(max(0.0, -math.expm1(2.0 * la)))
        return alpha, max(sigma, self.sigma_floor)

    def beta(self, t: float) -> float:
        """Instantaneous noise rate beta(t) = -2 d log alpha / dt."""
        t = self._eff(t)
        if self.kind == "linear-VP":
            return self.beta_min + t * (self.beta_max - self.beta_min)
        c = math.pi / 2.0 / (1.0 + COSINE_S)
        return 2.0 * c * math.tan(c * (t + COSINE_S))

    def drift_diffusion(self, t: float) -> tuple[float, float]:
        """(f(t), g^2(t)) in closed form; t=0 is clamped to t_min."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {t}")
        t = max(t, self.t_min)
        b = self.beta(t)
        return -0.5 * b, b

    def log_snr(self, t: float) -> float:
        """lambda(t) = log(alpha/sigma), strictly decreasing."""
        a, s = self.alpha_sigma(t)
        return math.log(a) - math.log(s)

    def time_of_log_snr(self, lam: float) -> float:
        """Inverse of log_snr, clamped to [t_min, 1] (or cosine max)."""
        hi = COSINE_T_MAX if self.kind == "cosine-VP" else 1.0
        if self.kind == "linear-VP":
            # solve -2 log_alpha = log(1 + e^(-2 lam)) for t (quadratic in t)
            tmp = 2.0 * (self.beta_max - self.beta_min) * np.logaddexp(-2.0 * lam, 0.0)
            disc = self.beta_min ** 2 + tmp
            t = tmp / (math.sqrt(disc) + self.beta_min) / (self.beta_max - self.beta_min)
        else:
            lo_t, hi_t = self.t_min, hi
            for _ in range(200):
                mid = 0.5 * (lo_t + hi_t)
                if self.log_snr(mid) > lam:
                    lo_t = mid
                else:
                    hi_t = mid
            t = 0.5 * (lo_t + hi_t)
        return min(max(t, self.t_min), hi)

    # -- forward process ----------------------------------------------------

    def forward_diffuse(self, x0: np.ndarray, t: float, eps: np.ndarray) -> np.ndarray:
        """alpha_t * x0 + sigma_t * eps."""
        x0 = np.asarray(x0, dtype=np.float64)
        eps = np.asarray(eps, dtype=np.float64)
        if x0.shape != eps.shape:
            raise ValueError(f"shape mismatch: x0 {x0.shape} vs eps {eps.shape}")
        a, s = self.alpha_sigma(t)
        return a * x0 + s * eps


def noise_to_score(eps_hat: np.ndarray, sigma: float) -> np.ndarray:
    """Score estimate eps_hat / (-sigma)."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return np.asarray(eps_hat, dtype=np.float64) / (-sigma)
