import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Per-criterion record shared across the acceptance tests: ``{n: [(ok, title, seconds, note)]}``."""
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, {})


def pytest_terminal_summary(terminalreporter, config):
    records = config.stash.get(_ACCEPTANCE_KEY, None)
    if not records:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(records):
        parts = records[n]
        ok = all(p[0] for p in parts)
        secs = sum(p[2] for p in parts)
        notes = "; ".join(p[3] for p in parts if p[3])
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {parts[0][1]}  ({secs:.2f} s)"
        terminalreporter.write_line(line + (f"  [{notes}]" if notes else ""))
