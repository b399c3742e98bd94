"""STFT analysis/synthesis with real-coefficient packing.

Each frame of ``L`` samples is windowed (periodic Hann) and mapped to ``L``
real numbers by an orthonormal real DFT: the non-redundant bins
``0..L/2`` are kept and split into real and imaginary parts.  Coefficients
are stored frequency-interleaved,

    Re b0, Re b_{L/2}, Re b1, Im b1, Re b2, Im b2, ...

so truncating a frame to its first ``trunc_len`` values drops whole
high-frequency bins.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 1024
    overlap: float = 0.70
    trunc_len: int = 720

    def __post_init__(self):
        L = self.frame_len
        if int(L) != L or L < 8 or L % 2:
            raise ContractViolation(f"frame_len must be an even integer >= 8, got {L}")
        if not 0 <= self.overlap < 1:
            raise ContractViolation(f"overlap must lie in [0, 1), got {self.overlap}")
        if not 1 <= self.trunc_len <= L:
            raise ContractViolation(f"trunc_len must lie in [1, {L}], got {self.trunc_len}")
        if self.hop < 1:
            raise ContractViolation("overlap too large: hop rounds to zero")

    @property
    def hop(self) -> int:
        return int(round((1 - self.overlap) * self.frame_len))

    def num_frames(self, n_samples: int) -> int:
        return 1 + (n_samples - self.frame_len) // self.hop


@dataclass
class PackedSpectrogram:
    frames: np.ndarray
    config: StftConfig
    original_len: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.config.trunc_len:
            raise ContractViolation(
                f"frames must be (num_frames, {self.config.trunc_len}), got {self.frames.shape}"
            )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def hann(L: int) -> np.ndarray:
    """Periodic (DFT-even) Hann window."""
    n = np.arange(L)
    return 0.5 - 0.5 * np.cos(2 * np.pi * n / L)


@lru_cache(maxsize=16)
def _packing(L: int):
    half = L // 2
    # canonical order: Re b0..Re b_{L/2}, Im b1..Im b_{L/2-1}
    # interleaved position k holds canonical index order[k]
    order = [0, half]
    for b in range(1, half):
        order += [b, half + b]
    order = np.array(order)
    scale = np.full(half + 1, np.sqrt(2.0 / L))
    scale[0] = scale[half] = np.sqrt(1.0 / L)
    return order, np.argsort(order), scale


def pack(spectrum: np.ndarray, L: int) -> np.ndarray:
    """Rows of half-spectra (``L/2 + 1`` complex bins) to canonical real packing."""
    _, _, scale = _packing(L)
    half = L // 2
    spec = spectrum * scale
    return np.concatenate([spec.real, spec[..., 1:half].imag], axis=-1)


def unpack(packed: np.ndarray, L: int) -> np.ndarray:
    _, _, scale = _packing(L)
    half = L // 2
    spec = packed[..., : half + 1].astype(complex)
    spec[..., 1:half] += 1j * packed[..., half + 1 :]
    return spec / scale


def interleave(canonical: np.ndarray, L: int) -> np.ndarray:
    order, _, _ = _packing(L)
    return canonical[..., order]


def deinterleave(interleaved: np.ndarray, L: int) -> np.ndarray:
    _, inverse, _ = _packing(L)
    return interleaved[..., inverse]


def frame_signal(signal: np.ndarray, cfg: StftConfig) -> np.ndarray:
    L, H = cfg.frame_len, cfg.hop
    starts = np.arange(cfg.num_frames(signal.size)) * H
    return signal[starts[:, None] + np.arange(L)]


def analyze(signal, cfg: StftConfig = StftConfig()) -> PackedSpectrogram:
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ContractViolation(f"signal must be 1-D, got shape {x.shape}")
    if x.size < cfg.frame_len:
        raise ContractViolation(f"signal has {x.size} samples, need at least one frame of {cfg.frame_len}")
    L = cfg.frame_len
    frames = frame_signal(x, cfg) * hann(L)
    coeffs = interleave(pack(np.fft.rfft(frames, axis=-1), L), L)
    return PackedSpectrogram(coeffs[:, : cfg.trunc_len].copy(), cfg, x.size)


def synthesize(spec: PackedSpectrogram) -> np.ndarray:
    cfg = spec.config
    L, H = cfg.frame_len, cfg.hop
    full = np.zeros((spec.num_frames, L))
    full[:, : cfg.trunc_len] = spec.frames
    frames = np.fft.irfft(unpack(deinterleave(full, L), L), n=L, axis=-1)
    w = hann(L)
    out_len = max(spec.original_len, (spec.num_frames - 1) * H + L)
    out = np.zeros(out_len)
    wsum = np.zeros(out_len)
    for n in range(spec.num_frames):
        out[n * H : n * H + L] += frames[n] * w
        wsum[n * H : n * H + L] += w**2
    nz = wsum >= 1e-8
    out[nz] /= wsum[nz]
    out[~nz] = 0.0
    return out[: spec.original_len]


def interior_slice(n_samples: int, cfg: StftConfig) -> slice:
    """Samples covered by full frame overlap (edge frames excluded)."""
    last_start = (cfg.num_frames(n_samples) - 1) * cfg.hop
    return slice(cfg.frame_len, max(cfg.frame_len, last_start))
