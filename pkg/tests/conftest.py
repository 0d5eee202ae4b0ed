import sys
import time

import pytest

from confdef.config import RunConfig
from confdef.workflow import candidates_from, m_geometry, member_chain


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def mgeom(cfg):
    start = time.perf_counter()
    M = m_geometry(cfg)
    M.reports["seconds"] = time.perf_counter() - start
    return M


@pytest.fixture(scope="session")
def member_run(cfg, mgeom):
    """Full chain for the V=1 member on the default M-grid."""
    cand = candidates_from(cfg)[0][0]
    start = time.perf_counter()
    stages, objs = member_chain(cand, mgeom, deform=True)
    return {"cand": cand, "stages": stages, "objs": objs, "seconds": time.perf_counter() - start}


def pytest_terminal_summary(terminalreporter):
    # acceptance verdicts are printed even when pytest captures output
    mods = [m for name, m in sys.modules.items() if name.rsplit(".", 1)[-1] == "test_acceptance"]
    lines = getattr(mods[0], "VERDICTS", []) if mods else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
