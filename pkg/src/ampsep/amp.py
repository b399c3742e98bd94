"""AMP with damping over a linear operator with forward/adjoint products."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .denoisers import _clamp_gamma_w, em_update_noise_precision
from .errors import ContractViolation, DivergenceError

DIVERGENCE_GROWTH = 1e6


@dataclass(frozen=True)
class AmpConfig:
    theta: float = 1.0
    max_iter: int = 30
    tol: float = 1e-6
    gamma_w: float = 1.0
    em_noise: bool = False
    em_mean: bool = False
    em_var: bool = False
    # None -> prior precision 1/(rho (mu^2 + sigma2)) when the denoiser has a prior
    gamma0: Optional[float] = None
    r0: Literal["zero", "matched_filter"] = "zero"
    gamma_update: Literal["printed", "precision_consistent"] = "precision_consistent"
    # "plain": M / (||y - A xhat||^2 + M tau_p); "posterior": same M-step on the
    # posterior output mean/variance of z = A x given y
    em_noise_rule: Literal["plain", "posterior"] = "posterior"

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ContractViolation(f"theta must lie in (0, 1], got {self.theta}")
        if self.max_iter < 1:
            raise ContractViolation(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ContractViolation(f"tol must be >= 0, got {self.tol}")
        if not self.gamma_w > 0:
            raise ContractViolation(f"gamma_w must be positive, got {self.gamma_w}")
        if self.gamma_update not in ("printed", "precision_consistent"):
            raise ContractViolation(f"unknown gamma_update {self.gamma_update!r}")
        if self.em_noise_rule not in ("plain", "posterior"):
            raise ContractViolation(f"unknown em_noise_rule {self.em_noise_rule!r}")
        if self.r0 not in ("zero", "matched_filter"):
            raise ContractViolation(f"unknown r0 {self.r0!r}")


@dataclass(frozen=True)
class AmpState:
    xhat: np.ndarray
    s: np.ndarray
    r: np.ndarray
    gamma: float
    tau_p: float
    gamma_w: float
    iter: int = 0


@dataclass
class AmpDiagnostics:
    residual: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    tau_p: list = field(default_factory=list)
    gamma_w: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def default_gamma0(denoiser) -> float:
    prior = getattr(denoiser, "prior", None)
    if prior is None or prior.second_moment <= 0:
        return 1.0
    return 1.0 / prior.second_moment


def _check_dims(op, y):
    y = np.asarray(y, dtype=float)
    Mh, _ = op.shape
    if y.shape != (Mh,):
        raise ContractViolation(f"observation must have length {Mh}, got shape {y.shape}")
    return y


def amp_init(op, y, cfg: AmpConfig, denoiser=None) -> AmpState:
    y = _check_dims(op, y)
    Mh, Nh = op.shape
    gamma0 = cfg.gamma0 if cfg.gamma0 is not None else default_gamma0(denoiser)
    if cfg.r0 == "matched_filter":
        r = op.adjoint(y) * (Nh / max(op.fro_norm2(), np.finfo(float).tiny))
    else:
        r = np.zeros(Nh)
    return AmpState(np.zeros(Nh), np.zeros(Mh), r, float(gamma0), 0.0, float(cfg.gamma_w), 0)


def amp_step(state: AmpState, op, y, denoiser, cfg: AmpConfig) -> AmpState:
    y = np.asarray(y, dtype=float)
    Mh, Nh = op.shape
    theta = cfg.theta
    t = state.iter

    g = denoiser(state.r, state.gamma)
    xhat = theta * g.xhat + (1 - theta) * state.xhat
    tau_p = (Nh / Mh) / state.gamma * float(np.mean(g.dxdr))
    v_out = 1.0 / state.gamma_w + tau_p
    if not v_out > 0:
        raise DivergenceError(f"non-positive output variance at iteration {t}", iteration=t)
    s = theta / v_out * (y - op.forward(xhat) + tau_p * state.s) + (1 - theta) * state.s

    gamma_w = state.gamma_w
    if cfg.em_noise:
        if cfg.em_noise_rule == "plain":
            gamma_w = em_update_noise_precision(y, op, xhat, tau_p)
        else:
            # y - zhat = psi * (y - p)/v_out and var(z | y) = tau_p psi / v_out
            psi = 1.0 / state.gamma_w
            z_resid = psi / v_out * (y - op.forward(xhat) + tau_p * state.s)
            gamma_w = _clamp_gamma_w(Mh, float(z_resid @ z_resid) + Mh * tau_p * psi / v_out)
        v_out = 1.0 / gamma_w + tau_p

    if cfg.gamma_update == "printed":
        gamma = theta / v_out + (1 - theta) / state.gamma
    else:
        gamma = theta / v_out + (1 - theta) * state.gamma
    r = xhat + op.adjoint(s) / gamma

    if not (np.isfinite(gamma) and gamma > 0 and np.all(np.isfinite(r)) and np.all(np.isfinite(s))):
        raise DivergenceError(f"AMP produced non-finite state at iteration {t}", iteration=t)
    return AmpState(xhat, s, r, float(gamma), float(tau_p), float(gamma_w), t + 1)


def amp_run(op, y, denoiser, cfg: AmpConfig, state: Optional[AmpState] = None):
    """Iterate AMP until ``max_iter`` steps or relative change below ``tol``.

    Returns ``(xhat, diagnostics)``.  A :class:`DivergenceError` raised here
    carries the diagnostics gathered so far.
    """
    y = _check_dims(op, y)
    if state is None:
        state = amp_init(op, y, cfg, denoiser)
    diag = AmpDiagnostics()
    y_norm = float(np.linalg.norm(y))
    resid0 = None
    eps = np.finfo(float).tiny
    for _ in range(cfg.max_iter):
        prev = state.xhat
        try:
            state = amp_step(state, op, y, denoiser, cfg)
        except DivergenceError as exc:
            exc.diagnostics = diag
            raise
        resid = float(np.linalg.norm(y - op.forward(state.xhat)))
        diag.residual.append(resid)
        diag.gamma.append(state.gamma)
        diag.tau_p.append(state.tau_p)
        diag.gamma_w.append(state.gamma_w)
        diag.iterations = state.iter
        if resid0 is None:
            resid0 = max(resid, y_norm)
        if resid0 > 0 and resid > DIVERGENCE_GROWTH * resid0:
            raise DivergenceError(
                f"AMP residual grew by more than {DIVERGENCE_GROWTH:g}x at iteration {state.iter - 1}",
                iteration=state.iter - 1, diagnostics=diag,
            )
        if cfg.em_mean or cfg.em_var:
            denoiser = denoiser.em_update(state.r, state.gamma, cfg.em_mean, cfg.em_var)
        change = np.linalg.norm(state.xhat - prev) / max(np.linalg.norm(state.xhat), eps)
        # the first step from a zero start can legitimately return zero
        if state.iter > 1 and change < cfg.tol:
            diag.converged = True
            break
    return state.xhat, diag
