"""Approximate message passing (AMP, VAMP) for underdetermined audio source separation."""

from .amp import AmpConfig, AmpState, amp_init, amp_run, amp_step
from .denoisers import (
    BgDenoiser,
    BgPrior,
    DenoiserOutput,
    bg_denoise,
    bg_denoise_derivative_check,
    em_update_noise_precision,
    init_noise_precision,
)
from .errors import ContractViolation, DegeneracyError, DivergenceError, RefusalError
from .operators import BlockOperator, MixingModel, SvdFactors, apply_adjoint, apply_forward, economy_svd, materialize_dense
from .pipeline import SeparationConfig, SeparationResult, separate
from .stft import PackedSpectrogram, StftConfig, analyze, synthesize
from .vamp import VampConfig, VampPrecomputed, VampState, vamp_init, vamp_precompute, vamp_run, vamp_step

__version__ = "0.1.0"
