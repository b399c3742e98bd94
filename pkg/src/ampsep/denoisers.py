"""Bernoulli-Gaussian scalar denoiser, its derivative, and EM updates.

The denoiser is the MMSE (posterior-mean) estimator of ``x`` from
``r = x + n`` with ``n ~ N(0, 1/gamma)`` and
``x ~ rho * N(mu, sigma2) + (1 - rho) * delta_0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .errors import ContractViolation

GAMMA_W_MIN = 1e-12
GAMMA_W_MAX = 1e12


@dataclass(frozen=True)
class BgPrior:
    rho: float = 0.6
    mu: float = 0.0
    sigma2: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ContractViolation(f"rho must lie in [0, 1], got {self.rho}")
        if not self.sigma2 > 0:
            raise ContractViolation(f"sigma2 must be positive, got {self.sigma2}")
        if not np.isfinite(self.mu):
            raise ContractViolation(f"mu must be finite, got {self.mu}")

    @property
    def second_moment(self) -> float:
        return self.rho * (self.mu**2 + self.sigma2)


@dataclass
class DenoiserOutput:
    xhat: np.ndarray
    dxdr: np.ndarray


def _slab_posterior(prior, r, gamma):
    prec = gamma + 1.0 / prior.sigma2
    m = (gamma * r + prior.mu / prior.sigma2) / prec
    return m, 1.0 / prec, gamma / prec


def _activity_logit(prior, r, gamma):
    """Log-odds of the slab given r; also returns its derivative in r."""
    v_slab = prior.sigma2 + 1.0 / gamma
    logit = (
        np.log(prior.rho) - np.log1p(-prior.rho)
        - 0.5 * np.log(v_slab * gamma)
        - 0.5 * (r - prior.mu) ** 2 / v_slab
        + 0.5 * gamma * r**2
    )
    dlogit = -(r - prior.mu) / v_slab + gamma * r
    return logit, dlogit


def activity_probability(prior: BgPrior, r, gamma) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if prior.rho == 0.0:
        return np.zeros_like(r)
    if prior.rho == 1.0:
        return np.ones_like(r)
    return expit(_activity_logit(prior, r, gamma)[0])


def bg_denoise(prior: BgPrior, r, gamma) -> DenoiserOutput:
    if not gamma > 0:
        raise ContractViolation(f"denoiser precision must be positive, got {gamma}")
    r = np.asarray(r, dtype=float)
    m, _, a = _slab_posterior(prior, r, gamma)
    if prior.rho == 0.0:
        return DenoiserOutput(np.zeros_like(r), np.zeros_like(r))
    if prior.rho == 1.0:
        return DenoiserOutput(m, np.full_like(r, a))
    logit, dlogit = _activity_logit(prior, r, gamma)
    pi = expit(logit)
    # pi * (1 - pi) without cancellation in either tail
    dpi = expit(logit) * expit(-logit) * dlogit
    return DenoiserOutput(pi * m, dpi * m + pi * a)


def bg_denoise_derivative_check(prior: BgPrior, r: float, gamma: float) -> tuple[float, float]:
    """Analytic derivative and a central finite difference at one point."""
    h = 1e-6 * max(1.0, abs(r))
    analytic = float(bg_denoise(prior, np.array([r]), gamma).dxdr[0])
    hi = bg_denoise(prior, np.array([r + h]), gamma).xhat[0]
    lo = bg_denoise(prior, np.array([r - h]), gamma).xhat[0]
    return analytic, float((hi - lo) / (2 * h))


@dataclass(frozen=True)
class BgDenoiser:
    """Callable ``(r, gamma) -> DenoiserOutput`` bound to a prior."""

    prior: BgPrior

    def __call__(self, r, gamma) -> DenoiserOutput:
        return bg_denoise(self.prior, r, gamma)

    def em_update(self, r, gamma, learn_mean=False, learn_var=False) -> "BgDenoiser":
        if not (learn_mean or learn_var):
            return self
        return BgDenoiser(em_update_prior(self.prior, r, gamma, learn_mean, learn_var))


def em_update_prior(prior: BgPrior, r, gamma, learn_mean=False, learn_var=False) -> BgPrior:
    """EM M-step for the slab mean/variance; rho stays fixed."""
    r = np.asarray(r, dtype=float)
    pi = activity_probability(prior, r, gamma)
    weight = pi.sum()
    if weight <= 0:
        return prior
    m, v, _ = _slab_posterior(prior, r, gamma)
    mu = float(np.dot(pi, m) / weight) if learn_mean else prior.mu
    sigma2 = prior.sigma2
    if learn_var:
        sigma2 = float(np.dot(pi, (m - mu) ** 2 + v) / weight)
        sigma2 = max(sigma2, 1e-12)
    return replace(prior, mu=mu, sigma2=sigma2)


def em_update_noise_precision(y, op, xhat, tau_p) -> float:
    """EM M-step for the noise precision: ``M / (||y - A xhat||^2 + M tau_p)``."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ContractViolation("empty observation vector")
    if tau_p < 0:
        raise ContractViolation(f"tau_p must be nonnegative, got {tau_p}")
    resid2 = float(np.sum((y - op.forward(xhat)) ** 2))
    return _clamp_gamma_w(y.size, resid2 + y.size * tau_p)


def _clamp_gamma_w(count, denom):
    if denom <= 0:
        return GAMMA_W_MAX
    return float(np.clip(count / denom, GAMMA_W_MIN, GAMMA_W_MAX))


def init_noise_precision(prior: BgPrior, M_hat: int, N_hat: int, snr_db: float) -> float:
    """Noise precision giving the requested SNR under the prior's signal power.

    ``gamma_w = (M/N) * 10**(snr_db/10) / (rho * (mu^2 + sigma2))``.
    """
    if prior.rho <= 0:
        raise ContractViolation("rho must be positive to relate SNR to noise precision")
    power = prior.mu**2 + prior.sigma2
    if power <= 0:
        raise ContractViolation("prior signal power must be positive")
    return (M_hat / N_hat) * 10.0 ** (snr_db / 10.0) / (prior.rho * power)
