import importlib

import numpy as np
import pytest

from groupcast import kernels

_BACKENDS = {"python": "groupcast._pykernels"}
try:
    importlib.import_module("groupcast._ckernels")
    _BACKENDS["cython"] = "groupcast._ckernels"
except ImportError:  # extension not built
    pass


@pytest.fixture(params=sorted(_BACKENDS))
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    mod = importlib.import_module(_BACKENDS[request.param])
    for name in ("is_stable", "css_residuals", "css_objective", "fit_css"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(".")[0][7:])):
            terminalreporter.write_line(line)
