import json
import logging
from dataclasses import replace

import numpy as np
import pytest

from ampsep.denoisers import BgPrior
from ampsep.errors import ContractViolation, DivergenceError
from ampsep.harness import compute_metrics, draw_bg, mixing_matrix
from ampsep.operators import MixingModel
from ampsep.pipeline import SeparationConfig, from_blocks, separate, separate_spectrograms, to_blocks
from ampsep.stft import PackedSpectrogram, StftConfig, analyze, interior_slice, synthesize

STFT = StftConfig()


@pytest.fixture(autouse=True)
def quiet():
    logging.disable(logging.WARNING)
    yield
    logging.disable(logging.NOTSET)


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestConfig:
    def test_defaults(self):
        cfg = SeparationConfig()
        assert cfg.T == 720 and cfg.iterations == 30 and cfg.snr_db == 40.0
        assert cfg.prior == BgPrior(0.6, 0.0, 5.0)
        assert replace(cfg, algo="vamp").iterations == 10

    @pytest.mark.parametrize("kw", [dict(algo="ista"), dict(block_size=0), dict(parallel_frames=0), dict(theta=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ContractViolation):
            SeparationConfig(**kw)


def test_block_layout_roundtrip(rng):
    streams = rng.normal(size=(3, 1000))
    blocks = to_blocks(streams, 64)
    assert blocks.shape == (16, 3 * 64)
    # channel-major then coefficient within each block
    np.testing.assert_array_equal(blocks[2, 64:128], streams[1, 128:192])
    np.testing.assert_array_equal(from_blocks(blocks, 3, 64, 1000), streams)


def test_identity_mixing_recovers_low_passed_mixtures(rng):
    # noiseless: the solver is told a noise level far below the signal
    x = rng.normal(size=(2, 8000))
    res = separate(x, MixingModel(np.eye(2)), SeparationConfig(algo="vamp", snr_db=120.0))
    ref = np.stack([synthesize(analyze(m)) for m in x])
    sl = interior_slice(8000, STFT)
    assert res.failures == 0
    assert rel_err(res.sources[:, sl], ref[:, sl]) <= 1e-6


@pytest.mark.parametrize("algo", ["amp", "vamp"])
def test_single_source_least_squares(rng, algo):
    x = rng.normal(size=(2, 8000))
    mix = np.stack([x[0], x[0] + 0.01 * x[1]])
    cfg = SeparationConfig(algo=algo, snr_db=100.0, em_noise=False, max_iter=100)
    res = separate(mix, MixingModel(np.array([[1.0], [1.0]])), cfg)
    # least squares for A = [1, 1]^T is the channel average, frame by frame
    ref = synthesize(analyze(mix.mean(axis=0)))
    sl = interior_slice(8000, STFT)
    assert rel_err(res.sources[0][sl], ref[sl]) <= 1e-6


def test_oracle_solver_reaches_truncation_floor(rng):
    n = 9000
    truth = rng.laplace(size=(3, n))
    A = mixing_matrix(2, 3, "unit_column_mixing", rng)
    packed = to_blocks(np.stack([analyze(s).frames.ravel() for s in truth]), 720)
    res = separate(A @ truth, MixingModel(A), SeparationConfig(), solver=lambda y, b: (packed[b], None))
    low = np.stack([synthesize(analyze(s)) for s in truth])
    np.testing.assert_allclose(res.sources, low, rtol=0, atol=1e-12)
    # the remaining error against the true sources is the truncation low-pass alone
    sl = interior_slice(n, STFT)
    full = StftConfig(trunc_len=1024)
    assert rel_err(np.stack([synthesize(analyze(s, full)) for s in truth])[:, sl], truth[:, sl]) <= 1e-10
    assert rel_err(res.sources[:, sl], truth[:, sl]) > 0.1


def test_order_and_parallel_independence(rng):
    A = mixing_matrix(2, 3, "unit_column_mixing", rng)
    mix = A @ rng.laplace(size=(3, 6000))
    base = separate(mix, MixingModel(A), SeparationConfig())
    nb = len(base.per_frame_diagnostics)
    rev = separate(mix, MixingModel(A), SeparationConfig(), order=list(range(nb))[::-1])
    par = separate(mix, MixingModel(A), SeparationConfig(parallel_frames=4))
    np.testing.assert_array_equal(base.sources, rev.sources)
    np.testing.assert_array_equal(base.sources, par.sources)
    assert base.per_frame_diagnostics == par.per_frame_diagnostics


def test_bad_order():
    with pytest.raises(ContractViolation):
        separate(np.zeros((2, 4000)), MixingModel(np.ones((2, 3))), SeparationConfig(), order=[0, 0, 1])


@pytest.mark.parametrize("n", [1024, 3001, 48000])
def test_output_lengths(rng, n):
    A = mixing_matrix(2, 3, "unit_column_mixing", rng)
    res = separate(rng.normal(size=(2, n)), MixingModel(A), SeparationConfig())
    assert res.sources.shape == (3, n)
    assert len(res.per_frame_diagnostics) == STFT.num_frames(n)


def test_channel_checks():
    model = MixingModel(np.ones((2, 3)))
    with pytest.raises(ContractViolation):
        separate([np.zeros(4000), np.zeros(3999)], model)
    with pytest.raises(ContractViolation):
        separate([np.zeros(4000)] * 3, model)


def test_failed_frames_emit_zeros(tmp_path, rng):
    A = mixing_matrix(2, 3, "unit_column_mixing", rng)
    mix = A @ rng.normal(size=(3, 4000))

    def flaky(y, b):
        if b == 1:
            raise DivergenceError("boom", iteration=4)
        return np.ones(3 * 720), None

    specs, recs = separate_spectrograms([analyze(m) for m in mix], MixingModel(A), SeparationConfig(), solver=flaky)
    assert [r["failed"] for r in recs] == [False, True] + [False] * (len(recs) - 2)
    assert not specs[0].frames[1].any() and specs[0].frames[0].all()
    res = separate(mix, MixingModel(A), SeparationConfig(), solver=flaky)
    res.write_diagnostics(tmp_path / "d.jsonl")
    lines = [json.loads(l) for l in (tmp_path / "d.jsonl").read_text().splitlines()]
    assert len(lines) == len(recs) and lines[1]["failed"] and lines[1]["frame"] == 1
    assert {"frame", "iterations", "residual", "failed"} <= set(lines[0])


def test_deterministic(rng):
    A = mixing_matrix(2, 3, "unit_column_mixing", rng)
    mix = A @ rng.laplace(size=(3, 5000))
    a = separate(mix, MixingModel(A), SeparationConfig(algo="vamp", theta=0.95))
    b = separate(mix, MixingModel(A), SeparationConfig(algo="vamp", theta=0.95))
    np.testing.assert_array_equal(a.sources, b.sources)


@pytest.mark.slow
def test_three_source_stereo_sdr():
    """Sparse packed-domain sources through the full path; median SDR over 5 seeds."""
    n = 48000
    F = STFT.num_frames(n)
    sdr = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        srcs = np.stack([synthesize(PackedSpectrogram(draw_bg(BgPrior(), (F, 720), rng), STFT, n)) for _ in range(3)])
        A = mixing_matrix(2, 3, "unit_column_mixing", rng)
        res = separate(A @ srcs, MixingModel(A), SeparationConfig())
        sl = slice(STFT.frame_len, n - STFT.frame_len)
        sdr += list(compute_metrics(res.sources[:, sl], srcs[:, sl]).per_source_sdr)
    assert np.median(sdr) >= 5.0
