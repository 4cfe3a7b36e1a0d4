"""End-to-end acceptance checks, one test group per criterion.

The terminal summary prints a ``criterion N: PASS/FAIL`` line for each group.
"""

import math
import time

import numpy as np
import pytest

from oracles import central_diff, central_diff_inplace, dense_unitary, sigmoid
from qcgan import model as models
from qcgan import qsim
from qcgan.cli import audit_rows, prepare_dataset
from qcgan.metrics import fid, read_pgm, sqrtm_psd
from qcgan.qsim import CircuitSpec, GateOp, Statevector
from qcgan.train import TrainConfig, load_checkpoint, train


def close(g, fd):
    return bool(np.all(np.abs(g - fd) <= np.maximum(1e-6 * np.abs(fd), 1e-9)))


def desk_config(**kw):
    return TrainConfig(digit_class=0, image_size=8, batch_size=16, iterations=300, seed=42, max_samples=200, **kw)


@pytest.fixture(scope="module")
def desk_data(digits_dir):
    return prepare_dataset(digits_dir, desk_config())


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory, desk_data):
    out = tmp_path_factory.mktemp("desk")
    start = time.perf_counter()
    state, rows = train(desk_config(), desk_data, out)
    return out, rows, time.perf_counter() - start


@pytest.mark.criterion(1, "parameter audit")
def test_audit_table():
    start = time.perf_counter()
    rows = audit_rows()
    elapsed = time.perf_counter() - start
    got = {}
    for variant, layer, count, expected in rows:
        assert count == expected, (variant, layer)
        got.setdefault(variant, []).append(count)
    assert got == {
        "qcgan": [60, 25872],
        "gan1": [96, 1088, 50960],
        "gan2": [1536, 131584, 402192],
        "gan2star": [25856, 131584, 402192],
    }
    assert elapsed < 1.0


@pytest.mark.criterion(2, "simulator vs dense oracle")
def test_simulator_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        depth = int(rng.integers(1, 9))
        gates, slot = [], 0
        # one layer = one random gate on every qubit
        for _ in range(depth):
            for target in range(n):
                kind = str(rng.choice(["RX", "RY", "RZ", "CRX"] if n > 1 else ["RX", "RY", "RZ"]))
                control = int(rng.choice([q for q in range(n) if q != target])) if kind == "CRX" else None
                gates.append(GateOp(kind, target, control, slot))
                slot += 1
        spec = CircuitSpec(n, gates, slot)
        theta = rng.uniform(-2 * np.pi, 2 * np.pi, slot)
        amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        state = Statevector(n, amps / np.linalg.norm(amps))
        out = qsim.run_circuit(spec, theta, state).amps
        worst = max(worst, float(np.max(np.abs(out - dense_unitary(spec, theta) @ state.amps))))
    elapsed = time.perf_counter() - start
    print(f"max amplitude deviation {worst:.3e} in {elapsed:.2f}s")
    assert worst <= 1e-12
    assert elapsed < 10.0


class TestGradients:
    pytestmark = pytest.mark.criterion(3, "gradients vs finite differences")
    DRAWS = 20
    BUDGET = 120.0
    spent = []

    @pytest.fixture(autouse=True)
    def _clock(self):
        start = time.perf_counter()
        yield
        self.spent.append(time.perf_counter() - start)

    def test_circuit(self):
        rng = np.random.default_rng(3)
        spec = models.build_variational_layers(5, 4)
        for _ in range(self.DRAWS):
            theta = rng.uniform(0, 2 * np.pi, 60)
            state = Statevector(5, models.encode_states(rng.uniform(0, np.pi / 2, 5))[0])
            up = rng.normal(size=32)

            def f(t):
                psi = dense_unitary(spec, t) @ state.amps
                return float(up @ np.abs(psi) ** 2)

            assert close(qsim.gradients(spec, theta, state, up), central_diff(f, theta, 1e-5))

    def test_generator_weights(self):
        rng = np.random.default_rng(4)
        for draw in range(self.DRAWS):
            gen = models.GeneratorModel.init(rng, 64)
            z = rng.uniform(0, np.pi / 2, size=(2, 5))
            up = rng.normal(size=(2, 64))
            g_theta, g_w, g_b = gen.backward(z, up)
            fd = central_diff_inplace(lambda: float(np.sum(up * gen.forward(z))), gen.theta, 1e-5)
            assert close(g_theta, fd), draw
            # readout weights leave the circuit untouched, so its features are computed once
            _, h, _ = gen._forward(z)

            def readout():
                return float(np.sum(up * sigmoid(h @ gen.weight.T + gen.bias)))

            assert close(g_w, central_diff_inplace(readout, gen.weight, 1e-5)), draw
            assert close(g_b, central_diff_inplace(readout, gen.bias, 1e-5)), draw

    def test_discriminator_weights(self):
        rng = np.random.default_rng(5)
        for draw in range(self.DRAWS):
            disc = models.DiscriminatorModel.init(rng, 64)
            for b in disc.biases:
                b[:] = 0.1 * rng.normal(size=b.shape)
            x = rng.uniform(size=(2, 64))
            up = rng.normal(size=2)
            grads, _ = models.discriminator_backward(disc, x, up)
            for param, grad in zip(disc.params(), grads):
                fd = central_diff_inplace(lambda: float(up @ models.discriminator_forward(disc, x)), param, 1e-5)
                assert close(grad, fd), (draw, param.shape)

    def test_within_budget(self):
        print(f"gradient checks took {sum(self.spent):.1f}s")
        assert len(self.spent) >= 3 and sum(self.spent) < self.BUDGET


def gaussian_samples(mean, cov, n, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, len(mean)))
    z -= z.mean(axis=0)
    z = z @ np.linalg.inv(np.linalg.cholesky(z.T @ z / (n - 1))).T
    return z @ np.linalg.cholesky(cov).T + mean


class TestFidSuite:
    pytestmark = pytest.mark.criterion(4, "FID analytic suite")

    def test_self(self):
        x = np.random.default_rng(6).uniform(size=(200, 64))
        assert fid(x, x) <= 1e-8

    def test_mean_shift(self):
        x = gaussian_samples(np.zeros(2), np.eye(2), 50, 0)
        g = gaussian_samples(np.ones(2), np.eye(2), 50, 1)
        assert abs(fid(x, g) - 2.0) <= 1e-6

    def test_covariance(self):
        x = gaussian_samples(np.zeros(2), 4 * np.eye(2), 50, 0)
        g = gaussian_samples(np.zeros(2), np.eye(2), 50, 1)
        assert abs(fid(x, g) - 2.0) <= 1e-6

    @pytest.mark.parametrize("d", [2, 8, 32, 64])
    def test_sqrtm_residual(self, d):
        start = time.perf_counter()
        a = np.random.default_rng(d).normal(size=(d, d))
        a = a @ a.T
        s = sqrtm_psd(a)
        assert np.linalg.norm(s @ s - a) / np.linalg.norm(a) <= 1e-8
        assert time.perf_counter() - start < 30


@pytest.mark.criterion(5, "patch qubit formula")
def test_patch_formula():
    assert models.patch_qubit_count(64, 4) == (20, 5)
    assert models.patch_qubit_count(256, 16) == (80, 5)


@pytest.mark.criterion(6, "desk-scale training lowers pixel-FID")
def test_desk_training(desk_run, desk_data):
    out, rows, elapsed = desk_run
    first, last = rows[0], rows[-1]
    ratio = last[3] / first[3]
    print(f"{len(desk_data)} real images, fid {first[3]:.4f} -> {last[3]:.4f} (ratio {ratio:.4f}) in {elapsed:.1f}s")
    assert first[0] == 0 and last[0] == 300
    assert all(math.isfinite(v) for row in rows for v in row[1:])
    assert ratio <= 0.6


@pytest.mark.criterion(7, "byte-identical reruns")
def test_determinism(desk_run, desk_data, tmp_path):
    out, _, _ = desk_run
    train(desk_config(), desk_data, tmp_path)
    assert (tmp_path / "metrics.csv").read_bytes() == (out / "metrics.csv").read_bytes()


@pytest.mark.criterion(8, "resume equivalence")
def test_resume(desk_run, desk_data, tmp_path):
    out, _, _ = desk_run
    half = desk_config()
    half.iterations = 150
    train(half, desk_data, tmp_path)
    state, saved = load_checkpoint(tmp_path / "checkpoint.json")
    assert state.iteration == 150 and saved == half
    train(desk_config(), desk_data, tmp_path, state)
    assert (tmp_path / "metrics.csv").read_bytes() == (out / "metrics.csv").read_bytes()


@pytest.mark.criterion(9, "sample grids written (informational)")
def test_sample_grids(desk_run):
    out, _, _ = desk_run
    for it in (0, 100, 300):
        grid = read_pgm(out / f"samples_{it}.pgm")
        assert grid.shape == (4 * 8 + 3 * 2, 4 * 8 + 3 * 2)
    print(f"grids in {out}; see docs/progress.md for a rendered copy")
