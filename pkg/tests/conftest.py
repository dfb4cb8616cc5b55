import io

import numpy as np
import pytest

from survrec import data
from survrec.data import Event, InteractionRecord


def make_records(rng, n_users=20, n_courses=8, p=0.6, p_done=0.7):
    recs = []
    for u in range(n_users):
        for c in range(n_courses):
            if rng.random() < p:
                ev = Event.COMPLETED if rng.random() < p_done else Event.DROPOUT
                recs.append(InteractionRecord(f"u{u}", f"c{c}", float(rng.integers(0, 100)), ev))
    return recs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_split():
    from survrec.synth import generate_synthetic
    text = generate_synthetic(120, 25, seed=3)
    recs = data.filter_cold_start(data.load_interactions(io.StringIO(text)))
    return data.split(data.normalize_times(recs), seed=7)


_CRITERIA = []


def pytest_runtest_logreport(report):
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _CRITERIA.append(f"{status} {label}")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
