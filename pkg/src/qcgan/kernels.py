"""Hot inner loops: batched gate application, adjoint sweep, Jacobi sweeps.

Every kernel exists twice: ``*_jit`` (numba, scalar loops) and ``*_np``
(vectorized numpy). The public dispatchers at the bottom pick one according
to :func:`qcgan._accel.jit_enabled`. Gate tables are the flat arrays produced
by ``CircuitSpec.tables()``:

    kinds    int64[G]   0=RX 1=RY 2=RZ 3=CRX
    targets  int64[G]
    controls int64[G]   -1 when uncontrolled
    slots    int64[G]   -1 for a fixed angle
    angles   float64[G] fixed angle (ignored when slot >= 0)
"""

from __future__ import annotations

from functools import lru_cache
import math

import numpy as np

from . import _accel
from ._accel import njit, prange

RX, RY, RZ, CRX = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------


@njit(cache=True)
def _matrix_jit(kind, phi):
    c = math.cos(0.5 * phi)
    s = math.sin(0.5 * phi)
    if kind == RX or kind == CRX:
        return complex(c, 0.0), complex(0.0, -s), complex(0.0, -s), complex(c, 0.0)
    if kind == RY:
        return complex(c, 0.0), complex(-s, 0.0), complex(s, 0.0), complex(c, 0.0)
    return complex(c, -s), 0j, 0j, complex(c, s)


@njit(cache=True)
def _dmatrix_jit(kind, phi):
    c = 0.5 * math.cos(0.5 * phi)
    s = 0.5 * math.sin(0.5 * phi)
    if kind == RX or kind == CRX:
        return complex(-s, 0.0), complex(0.0, -c), complex(0.0, -c), complex(-s, 0.0)
    if kind == RY:
        return complex(-s, 0.0), complex(-c, 0.0), complex(c, 0.0), complex(-s, 0.0)
    # d/dphi diag(e^{-i phi/2}, e^{i phi/2})
    return complex(-s, -c), 0j, 0j, complex(-s, c)


@njit(cache=True)
def _apply_jit(psi, target, control, m00, m01, m10, m11):
    bit = 1 << target
    for i in range(psi.shape[0]):
        if i & bit:
            continue
        if control >= 0 and not (i >> control) & 1:
            continue
        j = i | bit
        a0 = psi[i]
        a1 = psi[j]
        psi[i] = m00 * a0 + m01 * a1
        psi[j] = m10 * a0 + m11 * a1


@njit(cache=True)
def _angle(slot, angle, params):
    if slot >= 0:
        return params[slot]
    return angle


@njit(cache=True, parallel=True)
def run_gates_jit(kinds, targets, controls, slots, angles, params, states):
    n_gates = kinds.shape[0]
    for b in prange(states.shape[0]):
        psi = states[b]
        for g in range(n_gates):
            m00, m01, m10, m11 = _matrix_jit(kinds[g], _angle(slots[g], angles[g], params))
            _apply_jit(psi, targets[g], controls[g], m00, m01, m10, m11)


@njit(cache=True, parallel=True)
def adjoint_jit(kinds, targets, controls, slots, angles, params, states_out, upstream, n_params):
    batch, dim = states_out.shape
    grads = np.zeros((batch, n_params))
    for b in prange(batch):
        phi = states_out[b].copy()
        lam = np.empty(dim, dtype=np.complex128)
        for k in range(dim):
            lam[k] = upstream[b, k] * phi[k]
        for g in range(kinds.shape[0] - 1, -1, -1):
            theta = _angle(slots[g], angles[g], params)
            m00, m01, m10, m11 = _matrix_jit(kinds[g], theta)
            # U^dagger
            h00 = m00.conjugate()
            h01 = m10.conjugate()
            h10 = m01.conjugate()
            h11 = m11.conjugate()
            _apply_jit(phi, targets[g], controls[g], h00, h01, h10, h11)
            if slots[g] >= 0:
                d00, d01, d10, d11 = _dmatrix_jit(kinds[g], theta)
                bit = 1 << targets[g]
                ctl = controls[g]
                acc = 0.0
                for i in range(dim):
                    if i & bit:
                        continue
                    if ctl >= 0 and not (i >> ctl) & 1:
                        continue
                    j = i | bit
                    a0 = phi[i]
                    a1 = phi[j]
                    acc += (lam[i].conjugate() * (d00 * a0 + d01 * a1)).real
                    acc += (lam[j].conjugate() * (d10 * a0 + d11 * a1)).real
                grads[b, slots[g]] += 2.0 * acc
            _apply_jit(lam, targets[g], controls[g], h00, h01, h10, h11)
    return grads


@njit(cache=True)
def jacobi_sweeps_jit(a, v, tol, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) > off:
                    off = abs(a[p, q])
        if off <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return max_sweeps


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _matrix_np(kind, phi):
    c = math.cos(0.5 * phi)
    s = math.sin(0.5 * phi)
    if kind in (RX, CRX):
        return complex(c, 0.0), complex(0.0, -s), complex(0.0, -s), complex(c, 0.0)
    if kind == RY:
        return complex(c, 0.0), complex(-s, 0.0), complex(s, 0.0), complex(c, 0.0)
    return complex(c, -s), 0j, 0j, complex(c, s)


def _dmatrix_np(kind, phi):
    c = 0.5 * math.cos(0.5 * phi)
    s = 0.5 * math.sin(0.5 * phi)
    if kind in (RX, CRX):
        return complex(-s, 0.0), complex(0.0, -c), complex(0.0, -c), complex(-s, 0.0)
    if kind == RY:
        return complex(-s, 0.0), complex(-c, 0.0), complex(c, 0.0), complex(-s, 0.0)
    return complex(-s, -c), 0j, 0j, complex(-s, c)


@lru_cache(maxsize=None)
def _pairs(n, target, control):
    """Index tuples selecting the target-0 / target-1 halves of a ``(B,) + (2,)*n`` view.

    Qubit ``q`` is axis ``n - q`` (axis 0 is the batch), matching little-endian indices.
    """
    sel = [slice(None)] * (n + 1)
    if control >= 0:
        sel[n - control] = 1
    sel[n - target] = 0
    i0 = tuple(sel)
    sel[n - target] = 1
    return i0, tuple(sel)


def _view(states):
    if not states.flags.c_contiguous:
        raise ValueError("state batch must be C-contiguous")
    n = states.shape[1].bit_length() - 1
    return states.reshape((states.shape[0],) + (2,) * n), n


def _apply_np(states, target, control, m00, m01, m10, m11):
    v, n = _view(states)
    i0, i1 = _pairs(n, int(target), int(control))
    a0, a1 = v[i0], v[i1]
    new0 = m00 * a0 + m01 * a1
    v[i1] = m10 * a0 + m11 * a1
    v[i0] = new0


def run_gates_np(kinds, targets, controls, slots, angles, params, states):
    for g in range(kinds.shape[0]):
        theta = params[slots[g]] if slots[g] >= 0 else angles[g]
        _apply_np(states, targets[g], controls[g], *_matrix_np(kinds[g], theta))


def adjoint_np(kinds, targets, controls, slots, angles, params, states_out, upstream, n_params):
    batch = states_out.shape[0]
    grads = np.zeros((batch, n_params))
    phi = states_out.copy()
    lam = upstream * phi
    for g in range(kinds.shape[0] - 1, -1, -1):
        theta = params[slots[g]] if slots[g] >= 0 else angles[g]
        m00, m01, m10, m11 = _matrix_np(kinds[g], theta)
        dagger = (m00.conjugate(), m10.conjugate(), m01.conjugate(), m11.conjugate())
        _apply_np(phi, targets[g], controls[g], *dagger)
        if slots[g] >= 0:
            d00, d01, d10, d11 = _dmatrix_np(kinds[g], theta)
            pv, n = _view(phi)
            lv, _ = _view(lam)
            i0, i1 = _pairs(n, int(targets[g]), int(controls[g]))
            a0, a1 = pv[i0], pv[i1]
            prod = lv[i0].conj() * (d00 * a0 + d01 * a1) + lv[i1].conj() * (d10 * a0 + d11 * a1)
            grads[:, slots[g]] += 2.0 * prod.real.reshape(batch, -1).sum(axis=1)
        _apply_np(lam, targets[g], controls[g], *dagger)
    return grads


def jacobi_sweeps_np(a, v, tol, max_sweeps):
    n = a.shape[0]
    upper = np.triu_indices(n, 1)
    for sweep in range(max_sweeps):
        if n < 2 or np.max(np.abs(a[upper])) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0)), theta)
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return max_sweeps


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def run_gates(tables, params, states):
    """Apply every gate in ``tables`` to each row of ``states`` in place."""
    fn = run_gates_jit if _accel.jit_enabled() else run_gates_np
    fn(*tables, params, states)


def adjoint(tables, params, states_out, upstream, n_params):
    """Per-sample gradients of sum_k upstream[b,k] |psi_b[k]|^2, shape (B, n_params)."""
    fn = adjoint_jit if _accel.jit_enabled() else adjoint_np
    return fn(*tables, params, states_out, upstream, n_params)


def jacobi_sweeps(a, v, tol, max_sweeps):
    """Rotate ``a`` toward diagonal form in place, accumulating into ``v``."""
    fn = jacobi_sweeps_jit if _accel.jit_enabled() else jacobi_sweeps_np
    return fn(a, v, tol, max_sweeps)
