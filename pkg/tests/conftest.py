import numpy as np
import pytest

from flowguard.simcore import load_scenario


def approach_text(program="r:10", rate=0.0, horizon=60, length=200.0, speed=13.89,
                  detector_length=100, attacks=""):
    """One signalized approach ``in`` into node c, continuing out on ``out``."""
    return f"""
[network]
nodes = a c b
edge.in = a c {length} {speed} 1
edge.out = c b 200 13.89 1

[routes]
r = in out

[demand]
horizon = {horizon}
r = {rate}

[signals]
detector_length = {detector_length}
c.approaches = in
c.program = {program}

[attacks]
{attacks}

[seed]
seed = 7
"""


@pytest.fixture
def approach_state():
    def make(**kw):
        return load_scenario(approach_text(**kw))
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
