"""WAV reading/writing for PCM16 and float32 files."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .errors import ContractViolation


def read_wav(path) -> tuple[int, np.ndarray]:
    """Return ``(rate, data)`` with data shaped ``(channels, samples)`` in float64.

    PCM16 is scaled to [-1, 1); float files are passed through.
    """
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise ContractViolation(f"{path}: cannot read WAV ({exc})") from None
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        data = data.astype(np.float64)
    else:
        raise ContractViolation(f"{path}: unsupported sample format {data.dtype} (need PCM16 or float32)")
    if data.ndim == 1:
        data = data[:, None]
    return int(rate), np.ascontiguousarray(data.T)


def write_wav(path, rate: int, data, fmt: str = "float32") -> None:
    """Write ``data`` shaped ``(samples,)`` or ``(channels, samples)``."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        data = data.T
    if fmt == "float32":
        out = data.astype(np.float32)
    elif fmt == "pcm16":
        out = np.clip(np.round(data * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ContractViolation(f"unknown WAV format {fmt!r}")
    wavfile.write(path, rate, out)
