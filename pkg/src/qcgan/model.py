"""QC-GAN generator, classical discriminator, baseline generators, and the parameter audit.

The hybrid generator maps a noise vector ``z`` (angles, one per qubit) to an
image in three stages:

1. angle encoding ``RY(z_i)|0>`` on every qubit,
2. ``depth`` variational layers of RX, RZ and a ring of CRX entanglers,
3. readout of all ``2**N`` basis probabilities, scaled by ``2**N``, then an
   affine map to pixel space followed by the logistic function.

All forward/backward functions accept a single sample or a batch; batched
gradients are summed over the batch in sample order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import expit

from . import qsim
from .errors import DomainError, StructuralError
from .qsim import CircuitSpec, GateOp

LEAKY_SLOPE = 0.2

# Layer-wise trainable parameter counts reported for 28x28 generators.
REFERENCE_COUNTS = {
    "qcgan": {"QuantumLayer": 60, "Linear": 25872},
    "gan1": {"Linear1": 96, "Linear2": 1088, "Linear3": 50960},
    "gan2": {"Linear1": 1536, "Linear2": 131584, "Linear3": 402192},
    "gan2star": {"Linear1": 25856, "Linear2": 131584, "Linear3": 402192},
}

BASELINE_LAYOUTS = {
    "gan1": (5, 16, 64),
    "gan2": (5, 256, 512),
    "gan2star": (100, 256, 512),
}


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------


def build_encoding(z) -> CircuitSpec:
    """Fixed-angle ``RY(z_i)`` on qubit ``i``; no trainable slots."""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise DomainError("noise angles must be finite")
    return CircuitSpec(len(z), tuple(GateOp("RY", i, angle=float(a)) for i, a in enumerate(z)), 0)


def build_variational_layers(n_qubits: int, depth: int) -> CircuitSpec:
    """``depth`` blocks of [RX on all, RZ on all, CRX ring i -> i+1 mod N].

    Slots are numbered layer-major: layer ``l`` owns ``3*N*l .. 3*N*(l+1)-1``.
    """
    if n_qubits < 2:
        raise StructuralError(f"the entangling ring needs at least 2 qubits, got {n_qubits}")
    if depth < 1:
        raise StructuralError(f"depth must be at least 1, got {depth}")
    gates = []
    for layer in range(depth):
        base = 3 * n_qubits * layer
        gates += [GateOp("RX", q, slot=base + q) for q in range(n_qubits)]
        gates += [GateOp("RZ", q, slot=base + n_qubits + q) for q in range(n_qubits)]
        gates += [
            GateOp("CRX", (q + 1) % n_qubits, control=q, slot=base + 2 * n_qubits + q)
            for q in range(n_qubits)
        ]
    return CircuitSpec(n_qubits, tuple(gates), 3 * n_qubits * depth)


def encode_states(z: np.ndarray) -> np.ndarray:
    """Product states ``(x)_i RY(z_i)|0>`` for a batch of noise rows, shape ``(B, 2**N)``.

    Same result as running :func:`build_encoding` on ``|0...0>``, without
    building a circuit per sample.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    amps = np.ones((z.shape[0], 1))
    for q in range(z.shape[1]):
        c = np.cos(0.5 * z[:, q])[:, None]
        s = np.sin(0.5 * z[:, q])[:, None]
        amps = np.concatenate([amps * c, amps * s], axis=1)
    return amps.astype(np.complex128)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


def leaky_relu(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0, a, LEAKY_SLOPE * a)


def _uniform_fan_in(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


@dataclass
class GeneratorModel:
    """Hybrid generator. ``weight`` has shape ``(n_pixels, 2**n_qubits)``."""

    n_qubits: int
    depth: int
    theta: np.ndarray
    weight: np.ndarray
    bias: np.ndarray

    kind = "qcgan"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        dim = 1 << self.n_qubits
        if self.theta.shape != (3 * self.n_qubits * self.depth,):
            raise StructuralError(f"theta must have {3 * self.n_qubits * self.depth} entries, got {self.theta.shape}")
        if self.weight.ndim != 2 or self.weight.shape[1] != dim:
            raise StructuralError(f"weight must be (n_pixels, {dim}), got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise StructuralError(f"bias must have {self.weight.shape[0]} entries, got {self.bias.shape}")

    @classmethod
    def init(cls, rng: np.random.Generator, n_pixels: int, n_qubits: int = 5, depth: int = 4) -> "GeneratorModel":
        theta = rng.uniform(0.0, math.pi, size=3 * n_qubits * depth)
        weight = _uniform_fan_in(rng, n_pixels, 1 << n_qubits)
        return cls(n_qubits, depth, theta, weight, np.zeros(n_pixels))

    @property
    def noise_dim(self) -> int:
        return self.n_qubits

    @property
    def n_pixels(self) -> int:
        return self.weight.shape[0]

    @property
    def scale(self) -> float:
        return float(1 << self.n_qubits)

    @cached_property
    def circuit(self) -> CircuitSpec:
        return build_variational_layers(self.n_qubits, self.depth)

    def params(self) -> list[np.ndarray]:
        return [self.theta, self.weight, self.bias]

    def layer_names(self) -> list[str]:
        return ["QuantumLayer", "Linear"]

    def hyper(self) -> dict:
        return {"model": self.kind, "n_qubits": self.n_qubits, "depth": self.depth, "n_pixels": self.n_pixels}

    def _forward(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[1] != self.n_qubits:
            raise StructuralError(f"noise must have {self.n_qubits} entries per sample, got {z.shape[1]}")
        out = qsim.simulate(self.circuit, self.theta, encode_states(z))
        h = self.scale * qsim.probabilities(out)
        x = expit(h @ self.weight.T + self.bias)
        return out, h, x

    def forward(self, z) -> np.ndarray:
        return self._forward(z)[2]

    def backward(self, z, upstream) -> list[np.ndarray]:
        out, h, x = self._forward(z)
        upstream = np.asarray(upstream, dtype=np.float64).reshape(x.shape)
        g_pre = upstream * x * (1.0 - x)
        g_weight = g_pre.T @ h
        g_bias = g_pre.sum(axis=0)
        g_prob = self.scale * (g_pre @ self.weight)
        g_theta = qsim.adjoint_gradients(self.circuit, self.theta, out, g_prob).sum(axis=0)
        return [g_theta, g_weight, g_bias]


@dataclass
class MLP:
    """Dense stack with leaky-ReLU hidden units and a logistic output.

    ``weights[i]`` has shape ``(fan_out, fan_in)``.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    kind: str = "mlp"
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise StructuralError("need one bias per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise StructuralError(f"layer {i}: weight {w.shape} does not match bias {b.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise StructuralError(f"layer {i} expects {w.shape[1]} inputs, previous layer gives {self.weights[i - 1].shape[0]}")
        if not self.names:
            self.names = [f"Linear{i + 1}" for i in range(len(self.weights))]

    @classmethod
    def init(cls, rng: np.random.Generator, sizes, kind: str = "mlp") -> "MLP":
        weights = [_uniform_fan_in(rng, n_out, n_in) for n_in, n_out in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(n_out) for n_out in sizes[1:]]
        return cls(weights, biases, kind)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def noise_dim(self) -> int:
        return self.sizes[0]

    @property
    def n_pixels(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def layer_names(self) -> list[str]:
        return list(self.names)

    def hyper(self) -> dict:
        return {"model": self.kind, "sizes": self.sizes}

    def _forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.sizes[0]:
            raise StructuralError(f"expected {self.sizes[0]} inputs per sample, got {x.shape[1]}")
        acts = [x]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = acts[-1] @ w.T + b
            acts.append(expit(a) if i == last else leaky_relu(a))
        return acts

    def forward(self, x) -> np.ndarray:
        return self._forward(x)[-1]

    def backward(self, x, upstream) -> tuple[list[np.ndarray], np.ndarray]:
        """Returns ``(param grads aligned with params(), input grads)``."""
        acts = self._forward(x)
        out = acts[-1]
        g = np.asarray(upstream, dtype=np.float64).reshape(out.shape) * out * (1.0 - out)
        grads = []
        for i in range(len(self.weights) - 1, -1, -1):
            grads = [g.T @ acts[i], g.sum(axis=0)] + grads
            g = g @ self.weights[i]
            if i:
                g = g * np.where(acts[i] > 0, 1.0, LEAKY_SLOPE)
        return grads, g


class DiscriminatorModel(MLP):
    @classmethod
    def init(cls, rng: np.random.Generator, n_pixels: int = 784, hidden=(64, 32)) -> "DiscriminatorModel":
        model = MLP.init(rng, [n_pixels, *hidden, 1], "discriminator")
        return cls(model.weights, model.biases, "discriminator")


class BaselineGenerator(MLP):
    """Fully classical generator (GAN1, GAN2, GAN2*)."""

    def backward(self, z, upstream) -> list[np.ndarray]:
        return MLP.backward(self, z, upstream)[0]

    @classmethod
    def init(cls, rng: np.random.Generator, variant: str, n_pixels: int = 784) -> "BaselineGenerator":
        if variant not in BASELINE_LAYOUTS:
            raise StructuralError(f"unknown baseline {variant!r}; choose from {sorted(BASELINE_LAYOUTS)}")
        model = MLP.init(rng, [*BASELINE_LAYOUTS[variant], n_pixels], variant)
        return cls(model.weights, model.biases, variant)


def build_generator(rng: np.random.Generator, variant: str, n_pixels: int, n_qubits: int = 5, depth: int = 4):
    if variant == "qcgan":
        return GeneratorModel.init(rng, n_pixels, n_qubits, depth)
    return BaselineGenerator.init(rng, variant, n_pixels)


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------


def generator_forward(gen, z) -> np.ndarray:
    return gen.forward(z)


def generator_backward(gen, z, upstream) -> list[np.ndarray]:
    return gen.backward(z, upstream)


def discriminator_forward(d: MLP, x) -> np.ndarray:
    return d.forward(x)[:, 0]


def discriminator_backward(d: MLP, x, upstream) -> tuple[list[np.ndarray], np.ndarray]:
    return d.backward(x, np.asarray(upstream, dtype=np.float64).reshape(-1, 1))


def flatten(arrays) -> np.ndarray:
    return np.concatenate([np.ravel(a) for a in arrays]) if arrays else np.zeros(0)


def assign_flat(arrays, flat: np.ndarray) -> None:
    """Copy ``flat`` back into ``arrays`` in place (inverse of :func:`flatten`)."""
    flat = np.asarray(flat, dtype=np.float64)
    total = sum(a.size for a in arrays)
    if flat.shape != (total,):
        raise StructuralError(f"expected {total} values, got {flat.shape}")
    pos = 0
    for a in arrays:
        a[...] = flat[pos : pos + a.size].reshape(a.shape)
        pos += a.size


def count_parameters(model) -> dict[str, int]:
    """Trainable scalars per named layer, in declaration order."""
    if isinstance(model, GeneratorModel):
        return {"QuantumLayer": model.theta.size, "Linear": model.weight.size + model.bias.size}
    return {name: w.size + b.size for name, w, b in zip(model.layer_names(), model.weights, model.biases)}


def patch_qubit_count(n_pixels: int, g: int) -> tuple[int, int]:
    """Qubit budget of a patch-based quantum generator: ``g * (log2(n/g) + 1)``."""
    if g < 1 or n_pixels < 1 or n_pixels % g:
        raise DomainError(f"{n_pixels} pixels cannot be split evenly over {g} sub-generators")
    ratio = n_pixels // g
    if ratio & (ratio - 1):
        raise DomainError(f"pixels per sub-generator ({ratio}) is not a power of two")
    per = ratio.bit_length()  # log2(ratio) + 1 for a power of two
    return g * per, per
