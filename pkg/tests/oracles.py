"""Independent reference computations shared by the test modules."""

import math
import warnings

import numpy as np
from scipy import integrate


def gauss(x, mean, var):
    return math.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)


def bg_posterior_mean_quad(rho, mu, sigma2, r, gamma):
    """Posterior mean of a spike-and-slab variable by numerical integration.

    The slab integrals run over mu +/- 12 sigma; the spike at zero
    contributes only to the normaliser.
    """
    sd = math.sqrt(sigma2)
    lo, hi = mu - 12 * sd, mu + 12 * sd
    lik = lambda x: gauss(r, x, 1.0 / gamma)  # noqa: E731
    pts = [p for p in (r, mu, r * gamma * sigma2 / (gamma * sigma2 + 1)) if lo < p < hi]
    opts = dict(points=pts, epsabs=0.0, epsrel=1e-13, limit=400)
    with warnings.catch_warnings():
        # quad flags roundoff when it reaches machine precision before epsrel
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        num = integrate.quad(lambda x: x * gauss(x, mu, sigma2) * lik(x), lo, hi, **opts)[0]
        den_slab = integrate.quad(lambda x: gauss(x, mu, sigma2) * lik(x), lo, hi, **opts)[0]
    den = (1 - rho) * lik(0.0) + rho * den_slab
    return rho * num / den


def lmmse(A_dense, y, gamma_w, sigma2, mu=0.0):
    N = A_dense.shape[1]
    H = gamma_w * A_dense.T @ A_dense + np.eye(N) / sigma2
    return np.linalg.solve(H, gamma_w * A_dense.T @ y + mu / sigma2 * np.ones(N))


def projection_metrics_gram(est, refs, j):
    """SDR/SIR/SAR of estimate j via explicit Gram-matrix least squares."""
    e = est[j]
    G = refs @ refs.T
    c = np.linalg.solve(G, refs @ e)
    p_all = c @ refs
    target = (e @ refs[j]) / (refs[j] @ refs[j]) * refs[j]
    interf = p_all - target
    artif = e - p_all
    def db(a, b):
        # same +-200 dB cap as the metric under test
        with np.errstate(divide="ignore"):
            return float(np.clip(10 * np.log10(a / b), -200.0, 200.0))

    return (db(target @ target, (interf + artif) @ (interf + artif)),
            db(target @ target, interf @ interf),
            db(p_all @ p_all, artif @ artif))
