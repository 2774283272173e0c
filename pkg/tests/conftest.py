import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from notchbench import evaluation  # noqa: E402

# Every NotchStats built anywhere in the session, for the suite-wide Jensen check.
RECORDED_STATS: list = []

_orig_init = evaluation.NotchStats.__init__


def _recording_init(self, *args, **kwargs):
    _orig_init(self, *args, **kwargs)
    RECORDED_STATS.append(self)


evaluation.NotchStats.__init__ = _recording_init


def jensen_gap(s) -> float:
    """dc^2 + sd^2 - adc^2, which must be non-negative (up to rounding)."""
    return s.dc ** 2 + s.sd ** 2 - s.adc ** 2


def pytest_sessionfinish(session, exitstatus):
    bad = [s for s in RECORDED_STATS if jensen_gap(s) < -1e-12 or math.isnan(jensen_gap(s))]
    line = (f"Jensen bound over the whole session: {len(RECORDED_STATS)} distributions, "
            f"{len(bad)} violations")
    session.config._jensen_summary = line
    if bad:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    line = getattr(config, "_jensen_summary", None)
    if line:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)


def pytest_collection_modifyitems(session, config, items):
    # Acceptance checks run last so the suite-wide checks see every other test's output.
    items.sort(key=lambda item: item.nodeid.startswith("tests/test_acceptance.py"))
