"""Command-line entry point: ``ampsep separate | bench | info | synth``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .denoisers import BgPrior
from .errors import ContractViolation, RefusalError
from .operators import MixingModel, read_matrix_csv, write_matrix_csv
from .pipeline import SeparationConfig, separate
from .stft import StftConfig

log = logging.getLogger("ampsep")

EXIT_OK, EXIT_USAGE, EXIT_PROCESSING = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _on_off(value: str) -> bool:
    v = value.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


# (flag, type, config key); defaults come from SeparationConfig
SOLVER_FLAGS = [
    ("--algo", str, "algo"),
    ("--theta", float, "theta"),
    ("--max-iter", int, "max_iter"),
    ("--tol", float, "tol"),
    ("--rho", float, "rho"),
    ("--mu", float, "mu"),
    ("--sigma2", float, "sigma2"),
    ("--snr-db", float, "snr_db"),
    ("--frame-len", int, "frame_len"),
    ("--overlap", float, "overlap"),
    ("--trunc-len", int, "trunc_len"),
    ("--block-size", int, "block_size"),
    ("--em-noise", _on_off, "em_noise"),
    ("--parallel-frames", int, "parallel_frames"),
    ("--gamma-update", str, "gamma_update"),
    ("--gamma-tilde-form", str, "gamma_tilde_form"),
    ("--y-tilde-form", str, "y_tilde_form"),
]
KEY_TYPES = {key: typ for _, typ, key in SOLVER_FLAGS}


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes in keys allowed."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractViolation(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in KEY_TYPES:
                raise ContractViolation(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = KEY_TYPES[key](value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ContractViolation(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def build_config(values: dict) -> SeparationConfig:
    base = SeparationConfig()
    prior = BgPrior(
        values.get("rho", base.prior.rho), values.get("mu", base.prior.mu), values.get("sigma2", base.prior.sigma2)
    )
    stft = StftConfig(
        values.get("frame_len", base.stft.frame_len),
        values.get("overlap", base.stft.overlap),
        values.get("trunc_len", base.stft.trunc_len),
    )
    direct = {k: v for k, v in values.items()
              if k not in ("rho", "mu", "sigma2", "frame_len", "overlap", "trunc_len")}
    return replace(base, prior=prior, stft=stft, **direct)


def resolve_config(args) -> SeparationConfig:
    values = read_config_file(args.config) if args.config else {}
    for _, _, key in SOLVER_FLAGS:
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    try:
        return build_config(values)
    except ContractViolation as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _add_solver_flags(p):
    p.add_argument("--config", help="flat key = value config file; flags override it")
    for flag, typ, key in SOLVER_FLAGS:
        p.add_argument(flag, type=typ, dest=key, default=None)
    p.add_argument("--seed", type=int, default=0)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ampsep", description="AMP/VAMP separation of instantaneous audio mixtures")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("separate", help="separate an M-channel WAV given its mixing matrix")
    p.add_argument("--mix", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--diagnostics", help="JSON-lines output (default: OUT_DIR/diagnostics.jsonl)")
    _add_solver_flags(p)

    p = sub.add_parser("info", help="print the resolved configuration")
    _add_solver_flags(p)

    p = sub.add_parser("bench", help="sweep theta / max_iter on synthetic instances and write CSV")
    p.add_argument("--algo", choices=("amp", "vamp", "both"), default="both")
    p.add_argument("--sweep", choices=("theta", "max_iter", "grid"), default="theta")
    p.add_argument("--thetas", type=float, nargs="+")
    p.add_argument("--max-iters", type=int, nargs="+")
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--T", type=int, default=720)
    p.add_argument("--rho", type=float, default=0.6)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=5.0)
    p.add_argument("--snr-db", type=float, default=40.0)
    p.add_argument("--matrix-kind", choices=("iid_gaussian", "unit_column_mixing"), default="unit_column_mixing")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--em-noise", type=_on_off, default=True)
    p.add_argument("--dataset-dir", help="run on mixtures laid out as DIR/<name>/{mix.wav,A.csv,src_*.wav}")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("synth", help="write a synthetic mixture in the dataset layout")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--samples", type=int, default=48000)
    p.add_argument("--rate", type=int, default=16000)
    p.add_argument("--rho", type=float, default=0.6)
    p.add_argument("--sigma2", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("float32", "pcm16"), default="float32")
    return parser


def cmd_separate(args) -> int:
    from .wavio import read_wav, write_wav

    cfg = resolve_config(args)
    rate, mix = read_wav(args.mix)
    A = read_matrix_csv(args.matrix)
    if A.shape[0] != mix.shape[0]:
        raise ContractViolation(f"matrix has {A.shape[0]} rows but {args.mix} has {mix.shape[0]} channels")
    res = separate(mix, MixingModel(A), cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for j, src in enumerate(res.sources, 1):
        write_wav(out / f"source_{j}.wav", rate, src)
    res.write_diagnostics(args.diagnostics or out / "diagnostics.jsonl")
    n = len(res.per_frame_diagnostics)
    log.info("separated %d sources, %d/%d frames failed, %.2f s", len(res.sources), res.failures, n, res.timing)
    if n and res.failures == n:
        print(f"ampsep: every frame failed to converge ({n} frames)", file=sys.stderr)
        return EXIT_PROCESSING
    return EXIT_OK


def cmd_info(args) -> int:
    cfg = resolve_config(args)
    flat = asdict(cfg)
    flat["block_size"] = cfg.T
    flat["max_iter"] = cfg.iterations
    flat["hop"] = cfg.stft.hop
    flat["seed"] = args.seed
    for key in sorted(flat):
        print(f"{key} = {flat[key]}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .harness import MAX_ITER_GRID, THETA_GRID, SyntheticSpec, dataset_sweep, rows_to_csv, sweep

    algos = ("amp", "vamp") if args.algo == "both" else (args.algo,)
    rows = []
    for algo in algos:
        default_iter = 30 if algo == "amp" else 10
        if args.sweep == "theta":
            thetas, iters = args.thetas or THETA_GRID, args.max_iters or (default_iter,)
        elif args.sweep == "max_iter":
            thetas, iters = args.thetas or (1.0,), args.max_iters or MAX_ITER_GRID
        else:
            thetas, iters = args.thetas or THETA_GRID, args.max_iters or MAX_ITER_GRID
        if args.dataset_dir:
            rows += dataset_sweep(args.dataset_dir, algo, thetas, iters)
        else:
            spec = SyntheticSpec(args.M, args.N, args.T, BgPrior(args.rho, args.mu, args.sigma2),
                                 args.snr_db, args.instances, args.seed, args.matrix_kind)
            rows += sweep(spec, algo, thetas, iters, em_noise=args.em_noise)
    text = rows_to_csv(rows, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .harness import draw_bg, mixing_matrix
    from .stft import PackedSpectrogram, synthesize
    from .wavio import write_wav

    rng = np.random.default_rng(args.seed)
    cfg = StftConfig()
    F = cfg.num_frames(args.samples)
    prior = BgPrior(args.rho, 0.0, args.sigma2)
    sources = np.stack([
        synthesize(PackedSpectrogram(draw_bg(prior, (F, cfg.trunc_len), rng), cfg, args.samples))
        for _ in range(args.N)
    ])
    A = mixing_matrix(args.M, args.N, "unit_column_mixing", rng)
    mix = A @ sources
    peak = max(np.max(np.abs(mix)), np.max(np.abs(sources)), 1e-12)
    if args.format == "pcm16":
        # keep PCM16 output inside full scale
        mix, sources = 0.9 * mix / peak, 0.9 * sources / peak
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_wav(out / "mix.wav", args.rate, mix, args.format)
    write_matrix_csv(out / "A.csv", A)
    for j, s in enumerate(sources, 1):
        write_wav(out / f"src_{j}.wav", args.rate, s, args.format)
    return EXIT_OK


COMMANDS = {"separate": cmd_separate, "info": cmd_info, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ampsep {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractViolation, RefusalError, OSError) as exc:
        print(f"ampsep {args.command}: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


def run_cli(argv) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
