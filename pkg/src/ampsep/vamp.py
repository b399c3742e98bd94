"""VAMP with damping in SVD form, using the structured economy SVD."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .amp import default_gamma0
from .denoisers import _clamp_gamma_w
from .errors import ContractViolation, DegeneracyError, DivergenceError, RefusalError
from .operators import SvdFactors

ALPHA_CLAMP = 1e-11
DIVERGENCE_GROWTH = 1e6


@dataclass(frozen=True)
class VampConfig:
    theta: float = 1.0
    max_iter: int = 10
    tol: float = 1e-6
    gamma_w: float = 1.0
    em_noise: bool = False
    em_mean: bool = False
    em_var: bool = False
    # "ratio": gamma (1-alpha)/alpha; "printed": gamma (1-alpha) alpha
    gamma_tilde_form: Literal["printed", "ratio"] = "ratio"
    # "inverse": Diag(s)^-1 U^T y; "printed": Diag(s) U^T y
    y_tilde_form: Literal["printed", "inverse"] = "inverse"
    gamma0: Optional[float] = None
    r0: Literal["zero", "matched_filter"] = "matched_filter"

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ContractViolation(f"theta must lie in (0, 1], got {self.theta}")
        if self.max_iter < 1:
            raise ContractViolation(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ContractViolation(f"tol must be >= 0, got {self.tol}")
        if not self.gamma_w > 0:
            raise ContractViolation(f"gamma_w must be positive, got {self.gamma_w}")
        if self.gamma_tilde_form not in ("printed", "ratio"):
            raise ContractViolation(f"unknown gamma_tilde_form {self.gamma_tilde_form!r}")
        if self.y_tilde_form not in ("printed", "inverse"):
            raise ContractViolation(f"unknown y_tilde_form {self.y_tilde_form!r}")
        if self.r0 not in ("zero", "matched_filter"):
            raise ContractViolation(f"unknown r0 {self.r0!r}")


@dataclass(frozen=True)
class VampPrecomputed:
    svd: SvdFactors
    y_tilde: np.ndarray
    uty: np.ndarray
    y_norm2: float
    M_hat: int
    N_hat: int
    y_tilde_form: str = "inverse"

    @property
    def R(self) -> int:
        return self.svd.R

    def matched_filter(self) -> np.ndarray:
        """``A^T y`` computed through the factors."""
        return self.svd.V(self.svd.s * self.uty)

    def residual_norm2(self, xhat) -> float:
        """``||y - A xhat||^2`` without touching the expanded operator."""
        fit = self.uty - self.svd.s * self.svd.Vt(xhat)
        return max(self.y_norm2 - float(self.uty @ self.uty), 0.0) + float(fit @ fit)


@dataclass(frozen=True)
class VampState:
    xhat: np.ndarray
    r: np.ndarray
    gamma: float
    gamma_w: float
    alpha: float = float("nan")
    r_tilde: Optional[np.ndarray] = None
    gamma_tilde: float = float("nan")
    d: Optional[np.ndarray] = None
    iter: int = 0
    alpha_clamped: bool = False


@dataclass
class VampDiagnostics:
    alpha: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    gamma_tilde: list = field(default_factory=list)
    gamma_w: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    alpha_clamped: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def vamp_precompute(op, y, y_tilde_form: str = "inverse", svd: Optional[SvdFactors] = None) -> VampPrecomputed:
    y = np.asarray(y, dtype=float)
    Mh, Nh = op.shape
    if y.shape != (Mh,):
        raise ContractViolation(f"observation must have length {Mh}, got shape {y.shape}")
    svd = op.svd() if svd is None else svd
    if svd.R == 0:
        raise RefusalError("operator has rank 0; no signal reaches the observations")
    uty = svd.Ut(y)
    s = svd.s
    if y_tilde_form == "printed":
        y_tilde = s * uty
    elif y_tilde_form == "inverse":
        y_tilde = uty / s
    else:
        raise ContractViolation(f"unknown y_tilde_form {y_tilde_form!r}")
    return VampPrecomputed(svd, y_tilde, uty, float(y @ y), Mh, Nh, y_tilde_form)


def vamp_init(pre: VampPrecomputed, cfg: VampConfig, denoiser=None) -> VampState:
    gamma0 = cfg.gamma0 if cfg.gamma0 is not None else default_gamma0(denoiser)
    if cfg.r0 == "matched_filter":
        scale = pre.N_hat / max(float(np.sum(pre.svd.s**2)), np.finfo(float).tiny)
        r = pre.matched_filter() * scale
    else:
        r = np.zeros(pre.N_hat)
    return VampState(np.zeros(pre.N_hat), r, float(gamma0), float(cfg.gamma_w))


def vamp_step(state: VampState, pre: VampPrecomputed, denoiser, cfg: VampConfig) -> VampState:
    theta = cfg.theta
    Nh, R = pre.N_hat, pre.R
    s2 = pre.svd.s**2
    t = state.iter

    g = denoiser(state.r, state.gamma)
    xhat = theta * g.xhat + (1 - theta) * state.xhat
    alpha = float(np.mean(g.dxdr))
    if not np.isfinite(alpha):
        raise DegeneracyError(f"denoiser divergence {alpha!r} at iteration {t}", iteration=t)
    # a saturated or prior-mismatched denoiser can push the average slightly
    # past 1; clamp and flag rather than fail the block
    clamped = not ALPHA_CLAMP <= alpha <= 1 - ALPHA_CLAMP
    alpha = min(max(alpha, ALPHA_CLAMP), 1 - ALPHA_CLAMP)
    r_tilde = (xhat - alpha * state.r) / (1 - alpha)
    if cfg.gamma_tilde_form == "printed":
        gamma_tilde = state.gamma * (1 - alpha) * alpha
    else:
        gamma_tilde = state.gamma * (1 - alpha) / alpha

    gamma_w = state.gamma_w
    d = gamma_w * s2 / (gamma_w * s2 + gamma_tilde)
    vt_r = pre.svd.Vt(r_tilde)
    if cfg.em_noise:
        # LMMSE estimate restricted to the row space of A, then the EM M-step
        z2 = vt_r + d * (pre.uty / pre.svd.s - vt_r)
        fit = pre.uty - pre.svd.s * z2
        resid2 = max(pre.y_norm2 - float(pre.uty @ pre.uty), 0.0) + float(fit @ fit)
        gamma_w = _clamp_gamma_w(pre.M_hat, resid2 + float(np.sum(d)) / gamma_w)
        d = gamma_w * s2 / (gamma_w * s2 + gamma_tilde)

    d_mean = float(np.mean(d))
    denom = Nh - R * d_mean
    if not abs(denom) >= 1e-12 * Nh or d_mean == 0:
        raise DegeneracyError(f"LMMSE normalisation vanished at iteration {t}", iteration=t)
    gamma = theta * gamma_tilde * R * d_mean / denom + (1 - theta) * state.gamma
    r = r_tilde + (Nh / R) * pre.svd.V((d / d_mean) * (pre.y_tilde - vt_r))

    if not (np.isfinite(gamma) and gamma > 0 and np.all(np.isfinite(r)) and np.all(np.isfinite(xhat))):
        raise DivergenceError(f"VAMP produced non-finite state at iteration {t}", iteration=t)
    return VampState(xhat, r, float(gamma), float(gamma_w), alpha, r_tilde, float(gamma_tilde), d, t + 1, clamped)


def vamp_run(pre: VampPrecomputed, denoiser, cfg: VampConfig, state: Optional[VampState] = None):
    """Iterate VAMP; same termination contract as :func:`ampsep.amp.amp_run`."""
    if cfg.y_tilde_form != pre.y_tilde_form:
        raise ContractViolation(
            f"precomputation built with y_tilde_form={pre.y_tilde_form!r}, config asks {cfg.y_tilde_form!r}"
        )
    if state is None:
        state = vamp_init(pre, cfg, denoiser)
    diag = VampDiagnostics()
    resid0 = None
    eps = np.finfo(float).tiny
    for _ in range(cfg.max_iter):
        prev = state.xhat
        try:
            state = vamp_step(state, pre, denoiser, cfg)
        except (DivergenceError, DegeneracyError) as exc:
            exc.diagnostics = diag
            raise
        resid = float(np.sqrt(pre.residual_norm2(state.xhat)))
        diag.alpha.append(state.alpha)
        diag.gamma.append(state.gamma)
        diag.gamma_tilde.append(state.gamma_tilde)
        diag.gamma_w.append(state.gamma_w)
        diag.residual.append(resid)
        diag.alpha_clamped.append(state.alpha_clamped)
        diag.iterations = state.iter
        if resid0 is None:
            resid0 = max(resid, np.sqrt(pre.y_norm2))
        if resid0 > 0 and resid > DIVERGENCE_GROWTH * resid0:
            raise DivergenceError(
                f"VAMP residual grew by more than {DIVERGENCE_GROWTH:g}x at iteration {state.iter - 1}",
                iteration=state.iter - 1, diagnostics=diag,
            )
        if cfg.em_mean or cfg.em_var:
            denoiser = denoiser.em_update(state.r, state.gamma, cfg.em_mean, cfg.em_var)
        change = np.linalg.norm(state.xhat - prev) / max(np.linalg.norm(state.xhat), eps)
        if state.iter > 1 and change < cfg.tol:
            diag.converged = True
            break
    return state.xhat, diag
