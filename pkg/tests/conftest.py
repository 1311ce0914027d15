import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reuse_evo.core import default_config
from reuse_evo.generator import default_task

settings.register_profile("repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def cfg():
    return default_config()


@pytest.fixture
def ctx():
    return default_task()


def bits(*positions):
    """Fingerprint integer with the given bits set."""
    out = 0
    for p in positions:
        out |= 1 << p
    return out


def make_candidate(ident, fp=1, a=None, b=None, qed=0.8, sa=0.8, valid=True, stage=2, origin=0):
    from reuse_evo.core import Candidate

    aff = {}
    if a is not None:
        aff[(stage, "a")] = float(a)
        aff[(stage, "b")] = float(b)
    return Candidate(ident, origin, fp, np.zeros(2), (0.0, 0.0), qed, sa, valid, aff)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
