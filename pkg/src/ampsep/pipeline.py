"""Underdetermined separation of instantaneous mixtures in the STFT domain."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .amp import AmpConfig, amp_run
from .denoisers import BgDenoiser, BgPrior, init_noise_precision
from .errors import ContractViolation, DegeneracyError, DivergenceError, RefusalError
from .operators import BlockOperator, MixingModel
from .stft import PackedSpectrogram, StftConfig, analyze, synthesize
from .vamp import VampConfig, vamp_precompute, vamp_run

log = logging.getLogger(__name__)

DEFAULT_MAX_ITER = {"amp": 30, "vamp": 10}


@dataclass(frozen=True)
class SeparationConfig:
    algo: Literal["amp", "vamp"] = "amp"
    stft: StftConfig = field(default_factory=StftConfig)
    prior: BgPrior = field(default_factory=BgPrior)
    theta: float = 1.0
    max_iter: Optional[int] = None
    tol: float = 0.0
    em_noise: bool = True
    em_mean: bool = False
    em_var: bool = False
    snr_db: float = 40.0
    block_size: Optional[int] = None
    parallel_frames: int = 1
    gamma_update: str = "precision_consistent"
    gamma_tilde_form: str = "ratio"
    y_tilde_form: str = "inverse"

    def __post_init__(self):
        if self.algo not in ("amp", "vamp"):
            raise ContractViolation(f"algo must be 'amp' or 'vamp', got {self.algo!r}")
        if self.block_size is not None and self.block_size < 1:
            raise ContractViolation(f"block_size must be >= 1, got {self.block_size}")
        if self.parallel_frames < 1:
            raise ContractViolation("parallel_frames must be >= 1")
        # validate solver knobs eagerly
        self.solver_config(1.0)

    @property
    def T(self) -> int:
        return self.block_size if self.block_size is not None else self.stft.trunc_len

    @property
    def iterations(self) -> int:
        return self.max_iter if self.max_iter is not None else DEFAULT_MAX_ITER[self.algo]

    def solver_config(self, gamma_w: float):
        common = dict(
            theta=self.theta, max_iter=self.iterations, tol=self.tol, gamma_w=gamma_w,
            em_noise=self.em_noise, em_mean=self.em_mean, em_var=self.em_var,
        )
        if self.algo == "amp":
            return AmpConfig(gamma_update=self.gamma_update, **common)
        return VampConfig(gamma_tilde_form=self.gamma_tilde_form, y_tilde_form=self.y_tilde_form, **common)


@dataclass
class SeparationResult:
    sources: np.ndarray
    per_frame_diagnostics: list
    timing: float
    spectrograms: list = field(default_factory=list, repr=False)

    @property
    def failures(self) -> int:
        return sum(1 for d in self.per_frame_diagnostics if d["failed"])

    def write_diagnostics(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.per_frame_diagnostics:
                fh.write(json.dumps(rec) + "\n")


def make_block_solver(op: BlockOperator, cfg: SeparationConfig) -> Callable:
    """Return ``solve(y_block) -> (x_block, diagnostics)`` for one block."""
    denoiser = BgDenoiser(cfg.prior)
    scfg = cfg.solver_config(op.base.gamma_w)
    if cfg.algo == "amp":
        def solve(y):
            return amp_run(op, y, denoiser, scfg)
    else:
        svd = op.svd()

        def solve(y):
            return vamp_run(vamp_precompute(op, y, scfg.y_tilde_form, svd=svd), denoiser, scfg)
    return solve


def to_blocks(streams: np.ndarray, T: int) -> np.ndarray:
    """``(channels, length)`` -> ``(num_blocks, channels*T)``, zero padding the tail."""
    C, n = streams.shape
    nb = -(-n // T)
    padded = np.zeros((C, nb * T))
    padded[:, :n] = streams
    return padded.reshape(C, nb, T).transpose(1, 0, 2).reshape(nb, C * T)


def from_blocks(blocks: np.ndarray, channels: int, T: int, length: int) -> np.ndarray:
    nb = blocks.shape[0]
    return blocks.reshape(nb, channels, T).transpose(1, 0, 2).reshape(channels, nb * T)[:, :length]


def separate_spectrograms(mix_specs, model: MixingModel, cfg: SeparationConfig, solver=None, order=None):
    """Solve the block problems on packed spectrograms.

    ``mix_specs`` is a list of M :class:`PackedSpectrogram`.  Returns the N
    source spectrograms and per-block diagnostics records.  ``solver`` may
    replace the message-passing solve (``solver(y_block, index)``), which
    tests use to isolate the STFT/blocking path.
    """
    M, N = model.M, model.N
    if len(mix_specs) != M:
        raise ContractViolation(f"mixing matrix expects {M} channels, got {len(mix_specs)}")
    F, W = mix_specs[0].frames.shape
    T = cfg.T
    streams = np.stack([s.frames.ravel() for s in mix_specs])
    Y = to_blocks(streams, T)
    nb = Y.shape[0]

    if solver is None:
        gamma_w = init_noise_precision(cfg.prior, M * T, N * T, cfg.snr_db)
        op = BlockOperator(MixingModel(model.A, gamma_w), T)
        solve_block = make_block_solver(op, cfg)
        solver = lambda y, b: solve_block(y)  # noqa: E731

    def run(b):
        y = Y[b]
        rec = {"frame": int(b), "iterations": 0, "residual": None, "failed": False}
        try:
            x, diag = solver(y, b)
            if diag is not None:
                rec["iterations"] = int(diag.iterations)
                rec["residual"] = float(diag.residual[-1]) if diag.residual else None
        except (DivergenceError, DegeneracyError, RefusalError) as exc:
            log.warning("block %d failed: %s", b, exc)
            x = np.zeros(N * T)
            rec.update(failed=True, error=str(exc))
            diag = getattr(exc, "diagnostics", None)
            if diag is not None:
                rec["iterations"] = int(diag.iterations)
        return x, rec

    indices = list(range(nb)) if order is None else list(order)
    if sorted(indices) != list(range(nb)):
        raise ContractViolation("order must be a permutation of the block indices")
    if cfg.parallel_frames > 1:
        with ThreadPoolExecutor(cfg.parallel_frames) as pool:
            results = dict(zip(indices, pool.map(run, indices)))
    else:
        results = {b: run(b) for b in indices}

    X = np.stack([results[b][0] for b in range(nb)])
    records = [results[b][1] for b in range(nb)]
    src_streams = from_blocks(X, N, T, F * W)
    specs = [
        PackedSpectrogram(src_streams[j].reshape(F, W), mix_specs[0].config, mix_specs[0].original_len)
        for j in range(N)
    ]
    return specs, records


def separate(mixtures, model: MixingModel, cfg: SeparationConfig = SeparationConfig(), solver=None, order=None):
    t0 = time.perf_counter()
    mixtures = [np.asarray(m, dtype=float) for m in mixtures]
    if len({m.shape for m in mixtures}) != 1 or mixtures[0].ndim != 1:
        raise ContractViolation("mixture channels must be 1-D and of equal length")
    if len(mixtures) != model.M:
        raise ContractViolation(f"mixing matrix has {model.M} rows but {len(mixtures)} channels were given")
    mix_specs = [analyze(m, cfg.stft) for m in mixtures]
    specs, records = separate_spectrograms(mix_specs, model, cfg, solver=solver, order=order)
    sources = np.stack([synthesize(s) for s in specs])
    return SeparationResult(sources, records, time.perf_counter() - t0, specs)
