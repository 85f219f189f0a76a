import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "fiberband",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("fiberband")


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    """Keep every test away from the user's cache directory and thread setting."""
    monkeypatch.setenv("FIBERBAND_CACHE", str(tmp_path / "cache"))
    monkeypatch.delenv("FIBERBAND_THREADS", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
