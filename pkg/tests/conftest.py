import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    """One default ``all`` run on the bundled data, shared across tests."""
    from lvspill.runner import RunConfig, run_pipeline

    cfg = RunConfig(output_root=str(tmp_path_factory.mktemp("runs")))
    art = run_pipeline(cfg)
    assert art.ok, (art.path / "FAILED").read_text()
    return cfg, art


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance_log(request):
    """Collects ``criterion N: PASS|FAIL ...`` lines for the terminal summary."""
    return request.config._acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
