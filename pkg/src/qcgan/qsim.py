"""Dense statevector simulator for RX/RY/RZ/CRX circuits.

Conventions: ``R_a(phi) = exp(-i phi sigma_a / 2)`` and little-endian basis
indexing (qubit 0 is the least significant bit of the amplitude index).
Gradients of probability-weighted costs are computed exactly by a reverse
(adjoint) sweep over the gate list.

The single-state functions (``apply_gate``, ``run_circuit``, ``gradients``)
are thin wrappers over the batched ``simulate`` / ``adjoint_gradients``,
which work on ``(batch, 2**n)`` complex arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, StructuralError

MAX_QUBITS = 24
GATE_KINDS = {"RX": kernels.RX, "RY": kernels.RY, "RZ": kernels.RZ, "CRX": kernels.CRX}


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise StructuralError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, got shape {amps.shape}"
            )
        object.__setattr__(self, "amps", amps)

    def norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)


@dataclass(frozen=True)
class GateOp:
    """One gate. ``slot`` indexes the parameter vector; ``None`` means ``angle`` is fixed."""

    kind: str
    target: int
    control: int | None = None
    slot: int | None = None
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise StructuralError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CRX":
            if self.control is None:
                raise StructuralError("CRX needs a control qubit")
            if self.control == self.target:
                raise StructuralError(f"control and target are both qubit {self.target}")
        elif self.control is not None:
            raise StructuralError(f"{self.kind} takes no control qubit")
        if self.target < 0 or (self.control is not None and self.control < 0):
            raise StructuralError("qubit indices must be non-negative")
        if self.slot is not None and self.slot < 0:
            raise StructuralError(f"negative parameter slot {self.slot}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    gates: tuple[GateOp, ...]
    n_params: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        _check_qubit_count(self.n_qubits)
        used = set()
        for gate in self.gates:
            if max(gate.qubits) >= self.n_qubits:
                raise StructuralError(f"gate {gate} addresses a qubit outside 0..{self.n_qubits - 1}")
            if gate.slot is not None:
                if gate.slot >= self.n_params:
                    raise StructuralError(f"slot {gate.slot} out of range for n_params={self.n_params}")
                used.add(gate.slot)
        missing = set(range(self.n_params)) - used
        if missing:
            raise StructuralError(f"parameter slots never referenced: {sorted(missing)}")

    def then(self, other: "CircuitSpec") -> "CircuitSpec":
        """Concatenate ``other`` after this circuit; its slots are shifted past ours."""
        if other.n_qubits != self.n_qubits:
            raise StructuralError("cannot compose circuits of different widths")
        shifted = [
            g if g.slot is None else GateOp(g.kind, g.target, g.control, g.slot + self.n_params, g.angle)
            for g in other.gates
        ]
        return CircuitSpec(self.n_qubits, self.gates + tuple(shifted), self.n_params + other.n_params)

    @cached_property
    def tables(self) -> tuple[np.ndarray, ...]:
        return _tables(self.gates)


def _tables(gates: Sequence[GateOp]) -> tuple[np.ndarray, ...]:
    return (
        np.array([GATE_KINDS[g.kind] for g in gates], dtype=np.int64),
        np.array([g.target for g in gates], dtype=np.int64),
        np.array([-1 if g.control is None else g.control for g in gates], dtype=np.int64),
        np.array([-1 if g.slot is None else g.slot for g in gates], dtype=np.int64),
        np.array([float(g.angle) for g in gates], dtype=np.float64),
    )


def _check_qubit_count(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits!r}")


def _param_vector(params, n_params: int) -> np.ndarray:
    params = np.ascontiguousarray(params, dtype=np.float64).reshape(-1)
    if params.shape[0] != n_params:
        raise StructuralError(f"circuit has {n_params} parameter slots but {params.shape[0]} values were given")
    return params


def zero_state(n_qubits: int) -> Statevector:
    _check_qubit_count(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def zero_states(n_qubits: int, batch: int) -> np.ndarray:
    _check_qubit_count(n_qubits)
    states = np.zeros((batch, 1 << n_qubits), dtype=np.complex128)
    states[:, 0] = 1.0
    return states


def gate_matrix(kind: str, phi: float) -> np.ndarray:
    """The 2x2 rotation block of ``kind`` (for CRX, the block applied when the control is 1)."""
    m = kernels._matrix_np(GATE_KINDS[kind], float(phi))
    return np.array(m, dtype=np.complex128).reshape(2, 2)


def apply_gate(state: Statevector, gate: GateOp, params: Sequence[float] = ()) -> Statevector:
    if max(gate.qubits) >= state.n_qubits:
        raise StructuralError(f"gate {gate} does not fit a {state.n_qubits}-qubit state")
    params = np.ascontiguousarray(params, dtype=np.float64).reshape(-1)
    if gate.slot is not None and gate.slot >= params.shape[0]:
        raise StructuralError(f"slot {gate.slot} out of range for {params.shape[0]} parameters")
    states = state.amps.reshape(1, -1).copy()
    kernels.run_gates(_tables([gate]), params, states)
    return Statevector(state.n_qubits, states[0])


def simulate(spec: CircuitSpec, params, states: np.ndarray) -> np.ndarray:
    """Run ``spec`` on each row of ``states`` (shape ``(B, 2**n)``); returns new array."""
    params = _param_vector(params, spec.n_params)
    out = np.array(states, dtype=np.complex128, order="C", copy=True)
    if out.ndim != 2 or out.shape[1] != 1 << spec.n_qubits:
        raise StructuralError(f"states must have shape (batch, {1 << spec.n_qubits}), got {out.shape}")
    kernels.run_gates(spec.tables, params, out)
    return out


def run_circuit(spec: CircuitSpec, params, input: Statevector) -> Statevector:
    if input.n_qubits != spec.n_qubits:
        raise StructuralError(f"{spec.n_qubits}-qubit circuit given a {input.n_qubits}-qubit state")
    out = simulate(spec, params, input.amps.reshape(1, -1))
    return Statevector(spec.n_qubits, out[0])


def probabilities(state: Statevector | np.ndarray) -> np.ndarray:
    amps = state.amps if isinstance(state, Statevector) else np.asarray(state)
    return amps.real**2 + amps.imag**2


def adjoint_gradients(spec: CircuitSpec, params, states_out: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Batched reverse sweep.

    ``states_out`` are circuit outputs, ``upstream[b, k]`` is dL/dp_k for
    sample b. Returns per-sample gradients of shape ``(B, n_params)``.
    """
    params = _param_vector(params, spec.n_params)
    states_out = np.ascontiguousarray(states_out, dtype=np.complex128)
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    if upstream.shape != states_out.shape:
        raise StructuralError(f"upstream shape {upstream.shape} does not match states {states_out.shape}")
    return kernels.adjoint(spec.tables, params, states_out, upstream, spec.n_params)


def gradients(spec: CircuitSpec, params, input: Statevector, upstream) -> np.ndarray:
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (1 << spec.n_qubits,):
        raise StructuralError(f"upstream must have length {1 << spec.n_qubits}, got shape {upstream.shape}")
    out = run_circuit(spec, params, input)
    return adjoint_gradients(spec, params, out.amps.reshape(1, -1), upstream.reshape(1, -1))[0]


def finite_diff_gradients(spec: CircuitSpec, params, input: Statevector, upstream, epsilon: float = 1e-5) -> np.ndarray:
    """Central differences of ``sum_k upstream_k p_k``; test oracle for :func:`gradients`."""
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    params = _param_vector(params, spec.n_params)
    upstream = np.asarray(upstream, dtype=np.float64)

    def cost(theta):
        return float(upstream @ probabilities(run_circuit(spec, theta, input)))

    grad = np.zeros(spec.n_params)
    for j in range(spec.n_params):
        up = params.copy()
        down = params.copy()
        up[j] += epsilon
        down[j] -= epsilon
        grad[j] = (cost(up) - cost(down)) / (2.0 * epsilon)
    return grad
