"""Adversarial training: losses, plain SGD, the alternating loop, checkpoints.

Randomness comes from three independent streams, all derived from
``config.seed``:

* the main generator (weight init, then training noise), saved in checkpoints;
* one shuffle generator per epoch, derived from ``(seed, epoch)``, so the
  minibatch for any iteration is a pure function of the iteration number;
* a fixed evaluation-noise batch, so FID values are comparable over time.

Because of this split a run resumed from a checkpoint reproduces the
uninterrupted run exactly.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import model as models
from .data import Dataset
from .errors import ConfigurationError, NumericalError, ParseError, StructuralError
from .metrics import FidReference, write_pgm_grid

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-12
CHECKPOINT_VERSION = 1
METRICS_HEADER = "iteration,loss_d,loss_g,fid"
MODEL_VARIANTS = ("qcgan", "gan1", "gan2", "gan2star")
IMAGE_SIZES = (8, 16, 28)
GRID_SIDE = 4

_SHUFFLE_TAG = 0x5EED
_EVAL_TAG = 0xE7A1


@dataclass
class TrainConfig:
    digit_class: int = 0
    image_size: int = 8
    batch_size: int = 16
    iterations: int = 300
    lr_g: float = 0.05
    lr_d: float = 0.01
    seed: int = 42
    d_steps_per_g_step: int = 1
    eval_every: int = 25
    noise_low: float = 0.0
    noise_high: float = math.pi / 2
    model: str = "qcgan"
    n_qubits: int = 5
    depth: int = 4
    max_samples: int | None = None
    eval_samples: int = 200
    write_samples: bool = True

    def validate(self) -> "TrainConfig":
        def bad(msg):
            raise ConfigurationError(msg)

        if not 0 <= self.digit_class <= 9:
            bad(f"digit_class must be 0..9, got {self.digit_class}")
        if self.image_size not in IMAGE_SIZES:
            bad(f"image_size must be one of {IMAGE_SIZES}, got {self.image_size}")
        for name in ("batch_size", "d_steps_per_g_step", "eval_every", "n_qubits", "depth"):
            if int(getattr(self, name)) < 1:
                bad(f"{name} must be a positive integer")
        if self.iterations < 0:
            bad("iterations must be non-negative")
        if self.eval_samples < 2:
            bad("eval_samples must be at least 2")
        if not (self.lr_g >= 0 and self.lr_d >= 0):
            bad("learning rates must be non-negative")
        if not self.noise_low < self.noise_high:
            bad(f"noise_low ({self.noise_low}) must be below noise_high ({self.noise_high})")
        if not 0 <= self.seed < 2**64:
            bad("seed must be a 64-bit unsigned integer")
        if self.model not in MODEL_VARIANTS:
            bad(f"model must be one of {MODEL_VARIANTS}, got {self.model!r}")
        if self.max_samples is not None and self.max_samples < 1:
            bad("max_samples must be positive when set")
        return self

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw).validate()


@dataclass
class TrainState:
    gen: object
    disc: models.DiscriminatorModel
    rng: np.random.Generator
    iteration: int = 0


# ---------------------------------------------------------------------------
# losses and optimizer
# ---------------------------------------------------------------------------


def _clamped(d) -> np.ndarray:
    return np.clip(np.asarray(d, dtype=np.float64), LOG_CLAMP, 1.0 - LOG_CLAMP)


def loss_g(d_fake) -> float:
    """Mean of ``-log D(fake)``."""
    return float(np.mean(-np.log(_clamped(d_fake))))


def loss_d(d_real, d_fake) -> float:
    """``-mean log D(real) - mean log(1 - D(fake))``."""
    return float(np.mean(-np.log(_clamped(d_real))) + np.mean(-np.log1p(-_clamped(d_fake))))


def _grad_loss_g(d_fake: np.ndarray) -> np.ndarray:
    inside = (d_fake > LOG_CLAMP) & (d_fake < 1.0 - LOG_CLAMP)
    return np.where(inside, -1.0 / (len(d_fake) * _clamped(d_fake)), 0.0)


def _grad_loss_d(d_real: np.ndarray, d_fake: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    in_real = (d_real > LOG_CLAMP) & (d_real < 1.0 - LOG_CLAMP)
    in_fake = (d_fake > LOG_CLAMP) & (d_fake < 1.0 - LOG_CLAMP)
    g_real = np.where(in_real, -1.0 / (len(d_real) * _clamped(d_real)), 0.0)
    g_fake = np.where(in_fake, 1.0 / (len(d_fake) * (1.0 - _clamped(d_fake))), 0.0)
    return g_real, g_fake


def sgd_step(params, grads, lr: float) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise StructuralError(f"params {params.shape} and grads {grads.shape} differ in shape")
    return params - lr * grads


def _apply_sgd(model, grads, lr: float) -> None:
    arrays = model.params()
    models.assign_flat(arrays, sgd_step(models.flatten(arrays), models.flatten(grads), lr))


def sample_noise(rng: np.random.Generator, batch: int, n: int, low: float, high: float) -> np.ndarray:
    if not low < high:
        raise ConfigurationError(f"empty noise interval [{low}, {high})")
    return rng.uniform(low, high, size=(batch, n))


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------


def init_state(config: TrainConfig) -> TrainState:
    rng = np.random.default_rng(config.seed)
    n_pixels = config.image_size**2
    gen = models.build_generator(rng, config.model, n_pixels, config.n_qubits, config.depth)
    disc = models.DiscriminatorModel.init(rng, n_pixels)
    return TrainState(gen, disc, rng, 0)


def train_step(gen, disc, real: np.ndarray, config: TrainConfig, rng: np.random.Generator) -> tuple[float, float]:
    """One round: ``d_steps_per_g_step`` discriminator updates, then one generator update.

    Returns ``(loss_d, loss_g)`` measured after both updates on the step's
    real batch and the generator-step noise.
    """
    real = np.atleast_2d(real)
    batch = len(real)
    if batch == 0:
        raise ConfigurationError("empty real batch")
    for _ in range(config.d_steps_per_g_step):
        z = sample_noise(rng, batch, gen.noise_dim, config.noise_low, config.noise_high)
        fake = gen.forward(z)
        g_real, g_fake = _grad_loss_d(models.discriminator_forward(disc, real), models.discriminator_forward(disc, fake))
        grads_real, _ = models.discriminator_backward(disc, real, g_real)
        grads_fake, _ = models.discriminator_backward(disc, fake, g_fake)
        _apply_sgd(disc, [a + b for a, b in zip(grads_real, grads_fake)], config.lr_d)

    z = sample_noise(rng, batch, gen.noise_dim, config.noise_low, config.noise_high)
    fake = gen.forward(z)
    upstream = _grad_loss_g(models.discriminator_forward(disc, fake))
    _, g_image = models.discriminator_backward(disc, fake, upstream)
    _apply_sgd(gen, gen.backward(z, g_image), config.lr_g)

    d_fake = models.discriminator_forward(disc, gen.forward(z))
    d_real = models.discriminator_forward(disc, real)
    losses = loss_d(d_real, d_fake), loss_g(d_fake)
    if not all(map(math.isfinite, losses)):
        raise NumericalError(f"non-finite loss {losses}")
    return losses


def batch_indices(n: int, batch: int, iteration: int, seed: int) -> np.ndarray:
    """Dataset rows for 1-based ``iteration``: a window over the concatenated epoch permutations."""
    start = (iteration - 1) * batch
    positions = np.arange(start, start + batch)
    epochs = positions // n
    out = np.empty(batch, dtype=np.int64)
    for epoch in np.unique(epochs):
        perm = np.random.default_rng([seed, _SHUFFLE_TAG, int(epoch)]).permutation(n)
        mask = epochs == epoch
        out[mask] = perm[positions[mask] % n]
    return out


def eval_noise(config: TrainConfig, noise_dim: int) -> np.ndarray:
    rng = np.random.default_rng([config.seed, _EVAL_TAG])
    return sample_noise(rng, config.eval_samples, noise_dim, config.noise_low, config.noise_high)


def _fmt(x: float) -> str:
    return repr(float(x))


def metrics_row(iteration: int, ld: float, lg: float, fid: float) -> str:
    return f"{iteration},{_fmt(ld)},{_fmt(lg)},{_fmt(fid)}"


def train(
    config: TrainConfig,
    dataset: Dataset,
    out_dir=None,
    state: TrainState | None = None,
    on_row: Callable[[tuple], None] | None = None,
) -> tuple[TrainState, list[tuple]]:
    """Run (or resume) training up to ``config.iterations`` total steps.

    With ``out_dir`` set, writes ``metrics.csv`` (appending when resuming),
    ``samples_<iter>.pgm`` grids at evaluation points, and ``checkpoint.json``.
    Returns the final state and the metric rows produced by this call.
    """
    config.validate()
    if len(dataset) == 0:
        raise ConfigurationError(f"no training images for digit {config.digit_class}")
    if dataset.h != config.image_size or dataset.w != config.image_size:
        raise ConfigurationError(f"dataset is {dataset.h}x{dataset.w}, config asks for {config.image_size}")
    state = state or init_state(config)
    if state.iteration > config.iterations:
        raise ConfigurationError(f"checkpoint is at iteration {state.iteration}, beyond iterations={config.iterations}")

    real = dataset.images
    reference = real[: config.eval_samples]
    fid_ref = FidReference(reference, config.image_size)
    z_eval = eval_noise(config, state.gen.noise_dim)

    out_path = Path(out_dir) if out_dir is not None else None
    csv = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        metrics_file = out_path / "metrics.csv"
        if state.iteration == 0 or not metrics_file.exists():
            csv = open(metrics_file, "w", newline="\n")
            csv.write(METRICS_HEADER + "\n")
        else:
            csv = open(metrics_file, "a", newline="\n")

    rows = []

    def evaluate(iteration, losses=None):
        fake = state.gen.forward(z_eval)
        if losses is None:
            d_fake = models.discriminator_forward(state.disc, fake)
            losses = (loss_d(models.discriminator_forward(state.disc, reference), d_fake), loss_g(d_fake))
        row = (iteration, losses[0], losses[1], fid_ref(fake))
        rows.append(row)
        log.info("iter %d  loss_d %.4f  loss_g %.4f  fid %.4f", *row)
        if csv is not None:
            csv.write(metrics_row(*row) + "\n")
            csv.flush()
            if config.write_samples:
                n = GRID_SIDE * GRID_SIDE
                write_pgm_grid(fake[:n], GRID_SIDE, GRID_SIDE, out_path / f"samples_{iteration}.pgm")
        if on_row is not None:
            on_row(row)

    try:
        if state.iteration == 0 and config.iterations > 0:
            evaluate(0)
        while state.iteration < config.iterations:
            state.iteration += 1
            idx = batch_indices(len(real), config.batch_size, state.iteration, config.seed)
            losses = train_step(state.gen, state.disc, real[idx], config, state.rng)
            if state.iteration % config.eval_every == 0:
                evaluate(state.iteration, losses)
    finally:
        if csv is not None:
            csv.close()
    if out_path is not None:
        save_checkpoint(state, config, out_path / "checkpoint.json")
    return state, rows


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def rng_words(rng: np.random.Generator) -> list[int]:
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise StructuralError(f"unsupported bit generator {st['bit_generator']}")
    mask = (1 << 64) - 1
    s, inc = st["state"]["state"], st["state"]["inc"]
    return [s >> 64, s & mask, inc >> 64, inc & mask, int(st["has_uint32"]), int(st["uinteger"])]


def rng_from_words(words) -> np.random.Generator:
    if len(words) != 6 or not all(isinstance(w, int) and 0 <= w < 2**64 for w in words):
        raise ParseError("rng_state must be six unsigned 64-bit integers")
    bg = np.random.PCG64()
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": (words[0] << 64) | words[1], "inc": (words[2] << 64) | words[3]},
        "has_uint32": words[4],
        "uinteger": words[5],
    }
    return np.random.Generator(bg)


def _dump(obj) -> str:
    # json with every real written at 17 significant digits
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _dump(obj.ravel().tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dump(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
        return json.dumps(obj if not isinstance(obj, np.bool_) else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    value = float(obj)
    if not math.isfinite(value):
        raise NumericalError(f"cannot checkpoint non-finite value {value}")
    return format(value, ".17g")


def checkpoint_dict(state: TrainState, config: TrainConfig) -> dict:
    gen = state.gen
    hyper = dict(gen.hyper())
    hyper.update(image_size=config.image_size, disc_sizes=state.disc.sizes, config=asdict(config))
    if isinstance(gen, models.GeneratorModel):
        gen_theta, gen_w, gen_b = gen.theta, gen.weight, gen.bias
    else:
        gen_theta, gen_w, gen_b = [], [w.ravel() for w in gen.weights], [b for b in gen.biases]
    return {
        "version": CHECKPOINT_VERSION,
        "hyper": hyper,
        "iteration": state.iteration,
        "rng_state": rng_words(state.rng),
        "gen_theta": gen_theta,
        "gen_w": gen_w,
        "gen_b": gen_b,
        "disc": [p.ravel() for p in state.disc.params()],
    }


def save_checkpoint(state: TrainState, config: TrainConfig, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(_dump(checkpoint_dict(state, config)) + "\n")
    tmp.replace(path)
    return path


def _floats(values, n: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n,):
        raise ParseError(f"checkpoint field {what}: expected {n} values, got shape {arr.shape}")
    return arr


def load_checkpoint(path) -> tuple[TrainState, TrainConfig]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed checkpoint {path}: {exc}") from exc
    try:
        return _state_from_doc(doc)
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, StructuralError, ConfigurationError) as exc:
        raise ParseError(f"invalid checkpoint {path}: {exc!r}") from exc


def _state_from_doc(doc) -> tuple[TrainState, TrainConfig]:
    if not isinstance(doc, dict):
        raise ParseError("checkpoint root must be an object")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {doc.get('version')!r}")
    hyper = doc["hyper"]
    config = TrainConfig.from_dict(hyper["config"])
    n_pixels = config.image_size**2
    if hyper["model"] == "qcgan":
        n, depth = int(hyper["n_qubits"]), int(hyper["depth"])
        gen = models.GeneratorModel(
            n,
            depth,
            _floats(doc["gen_theta"], 3 * n * depth, "gen_theta"),
            _floats(doc["gen_w"], n_pixels << n, "gen_w").reshape(n_pixels, 1 << n),
            _floats(doc["gen_b"], n_pixels, "gen_b"),
        )
    else:
        sizes = [int(s) for s in hyper["sizes"]]
        pairs = list(zip(sizes[:-1], sizes[1:]))
        if len(doc["gen_w"]) != len(pairs) or len(doc["gen_b"]) != len(pairs):
            raise ParseError("generator layer count does not match hyper.sizes")
        weights = [_floats(w, a * b, "gen_w").reshape(b, a) for w, (a, b) in zip(doc["gen_w"], pairs)]
        biases = [_floats(v, b, "gen_b") for v, (_, b) in zip(doc["gen_b"], pairs)]
        gen = models.BaselineGenerator(weights, biases, hyper["model"])
    sizes = [int(s) for s in hyper["disc_sizes"]]
    pairs = list(zip(sizes[:-1], sizes[1:]))
    disc_raw = doc["disc"]
    if len(disc_raw) != 2 * len(pairs):
        raise ParseError("discriminator layer count does not match hyper.disc_sizes")
    disc = models.DiscriminatorModel(
        [_floats(disc_raw[2 * i], a * b, "disc").reshape(b, a) for i, (a, b) in enumerate(pairs)],
        [_floats(disc_raw[2 * i + 1], b, "disc") for i, (_, b) in enumerate(pairs)],
        "discriminator",
    )
    iteration = doc["iteration"]
    if not isinstance(iteration, int) or iteration < 0:
        raise ParseError(f"bad iteration counter {iteration!r}")
    return TrainState(gen, disc, rng_from_words(doc["rng_state"]), iteration), config
