"""Command-line entry point: ``qcgan {train,generate,evaluate,audit}``.

Exit codes: 0 success, 1 usage/config, 2 data/parse, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import _accel
from . import model as models
from .data import Dataset, filter_class, load_dataset, resize_dataset
from .errors import ConfigurationError, QcganError
from .metrics import FidReference, write_pgm_grid
from .train import TrainConfig, eval_noise, load_checkpoint, sample_noise, train

log = logging.getLogger("qcgan")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    data_dir: str
    out_dir: str
    train: TrainConfig
    resume: bool = False

    PATH_KEYS = ("data_dir", "out_dir", "resume")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
        allowed = set(cls.PATH_KEYS) | {f.name for f in fields(TrainConfig)}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        for key in ("data_dir", "out_dir"):
            if not isinstance(raw.get(key), str):
                raise ConfigurationError(f"config needs a string {key!r}")
        train_keys = {k: v for k, v in raw.items() if k not in cls.PATH_KEYS}
        try:
            cfg = TrainConfig.from_dict(train_keys)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
        return cls(raw["data_dir"], raw["out_dir"], cfg, bool(raw.get("resume", False)))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)


def prepare_dataset(data_dir, config: TrainConfig) -> Dataset:
    """Load, filter to ``config.digit_class``, truncate, and resize."""
    dataset = filter_class(load_dataset(data_dir), config.digit_class)
    if config.max_samples is not None:
        dataset = Dataset(
            dataset.images[: config.max_samples], dataset.labels[: config.max_samples], dataset.h, dataset.w
        )
    return resize_dataset(dataset, config.image_size)


def grid_shape(count: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(count))
    return math.ceil(count / cols), cols


def cmd_train(args) -> int:
    run = RunConfig.load(args.config)
    dataset = prepare_dataset(run.data_dir, run.train)
    out_dir = Path(run.out_dir)
    state = None
    ckpt = out_dir / "checkpoint.json"
    if run.resume and ckpt.exists():
        state, saved = load_checkpoint(ckpt)
        if saved.model != run.train.model or saved.seed != run.train.seed or saved.image_size != run.train.image_size:
            raise ConfigurationError(f"{ckpt} was written for a different model/seed/image size")
        log.info("resuming from iteration %d", state.iteration)
    state, rows = train(run.train, dataset, out_dir, state)
    if rows:
        last = rows[-1]
        print(f"iteration={last[0]} loss_d={last[1]:.6f} loss_g={last[2]:.6f} fid={last[3]:.6f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.count < 1:
        raise ConfigurationError("--count must be positive")
    state, config = load_checkpoint(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    z = sample_noise(rng, args.count, state.gen.noise_dim, config.noise_low, config.noise_high)
    images = state.gen.forward(z)
    rows, cols = grid_shape(args.count)
    write_pgm_grid(images, rows, cols, args.out, config.image_size, config.image_size)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run = RunConfig.load(args.config)
    dataset = prepare_dataset(run.data_dir, run.train)
    real = dataset.images[: run.train.eval_samples]
    if len(real) < 2:
        raise ConfigurationError("need at least 2 real images to evaluate")
    reference = FidReference(real, run.train.image_size)
    if args.real_vs_real:
        value = reference(real)
    else:
        state, saved = load_checkpoint(args.checkpoint)
        if saved.image_size != run.train.image_size:
            raise ConfigurationError(
                f"checkpoint generates {saved.image_size}x{saved.image_size} images, config asks for {run.train.image_size}"
            )
        value = reference(state.gen.forward(eval_noise(run.train, state.gen.noise_dim)))
    print(f"fid={value!r}")
    return EXIT_OK


def audit_rows(n_qubits: int = 5, depth: int = 4, n_pixels: int = 784):
    """``(variant, layer, count, expected)`` for every audited layer."""
    rng = np.random.default_rng(0)
    out = []
    for variant, expected in models.REFERENCE_COUNTS.items():
        gen = models.build_generator(rng, variant, n_pixels, n_qubits, depth)
        counts = models.count_parameters(gen)
        for layer in dict.fromkeys([*counts, *expected]):
            out.append((variant, layer, counts.get(layer), expected.get(layer)))
    return out


def cmd_audit(args) -> int:
    ok = True
    print(f"{'model':<10}{'layer':<14}{'params':>10}{'expected':>10}")
    for variant, layer, got, expected in audit_rows(args.n_qubits, args.depth):
        match = got == expected
        ok &= match
        print(f"{variant:<10}{layer:<14}{str(got):>10}{str(expected):>10}{'' if match else '  MISMATCH'}")
    return EXIT_OK if ok else EXIT_CONFIG


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcgan", description="Hybrid quantum-classical GAN experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a generator/discriminator pair")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="write a PGM grid of samples from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="pixel-FID of a checkpoint against real images")
    p.add_argument("--checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--real-vs-real", action="store_true", help="compare the real set with itself")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit", help="check layer parameter counts against the reference table")
    p.add_argument("--depth", type=int, default=4, help=argparse.SUPPRESS)
    p.add_argument("--n-qubits", type=int, default=5, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "evaluate" and not args.real_vs_real and not args.checkpoint:
        parser.error("evaluate needs --checkpoint unless --real-vs-real is given")
    try:
        _accel.configure_threads()
        return args.func(args)
    except QcganError as exc:
        print(f"qcgan: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"qcgan: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
