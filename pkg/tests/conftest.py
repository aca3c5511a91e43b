import numpy as np
import pytest

from adaptivefl.nn import ModelSpec
from adaptivefl.pruning import build_pool

# p = 2 pool used by the hand-traced table examples (5 rows).
P2_SPEC = ModelSpec((4, 4, 4, 8, 16, 4), tau=2)
P2_RATIOS = {"S": 0.4, "M": 0.7}
P2_STARTS = (3, 2)


@pytest.fixture(scope="session")
def p2_pool():
    return build_pool(P2_SPEC, P2_RATIOS, P2_STARTS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance criteria report one line each at the end of the session.
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda n: int(n.split()[0][1:])):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
