import os

from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


import pytest

from jumpeuler.cli import run_experiment
from jumpeuler.config import parse_config

OU_EXPERIMENT = {
    "model": "ou-jump",
    "schedule": {"base": 20, "growth": 1.3, "step": 0.25, "count": 12},
    "n_rule": "floor(10*M**1.4)",
    "K": 10_000, "p": 2, "seed": 1, "estimator": "coupled", "multipliers": [10, 100],
}
MERTON_EXPERIMENT = {
    "model": "merton",
    "schedule": {"base": 20, "growth": 1.3, "step": 0.25, "count": 15},
    "n_rule": "200*M",
    "K": 50_000, "p": 2, "seed": 1, "estimator": "exact-reference", "ref_mult": 10,
}


@pytest.fixture(scope="session")
def ou_table():
    return run_experiment(parse_config(OU_EXPERIMENT))


@pytest.fixture(scope="session")
def merton_table():
    return run_experiment(parse_config(MERTON_EXPERIMENT))


ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """``verdict(number, ok, detail)`` records and prints one line per criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
