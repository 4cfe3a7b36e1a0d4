import importlib.util
import os
from pathlib import Path

import pytest

from qcgan import _accel

ACCEPTANCE = {}
ROOT = Path(__file__).resolve().parents[1]


def _load_script(name):
    spec = importlib.util.spec_from_file_location(name, ROOT / "scripts" / f"{name}.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


write_digits_idx = _load_script("make_digits_idx").write_digits_idx


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run the test once per kernel backend."""
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    previous = _accel.set_jit(request.param == "numba")
    yield request.param
    _accel.set_jit(previous)


@pytest.fixture(scope="session")
def digits_dir(tmp_path_factory):
    """Real MNIST when QCGAN_MNIST_DIR points at it, else the bundled digit corpus."""
    env = os.environ.get("QCGAN_MNIST_DIR")
    if env:
        return Path(env)
    pytest.importorskip("sklearn")
    return write_digits_idx(tmp_path_factory.mktemp("digits"))


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    ok = ACCEPTANCE.get(number, (title, True))[1] and call.excinfo is None
    ACCEPTANCE[number] = (title, ok)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
