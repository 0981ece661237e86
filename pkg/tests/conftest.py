import warnings

import pytest
from hypothesis import settings

from mdforms.fixtures import SHIPPED, load_fixture

warnings.filterwarnings("ignore", message=".*TBB.*")

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

# fixtures whose forest has a real mixed-dimensional structure
FOREST_NAMES = ["slit_regions", "square_fracture", "annulus", "torus", "interval_pair"]
ALL_NAMES = sorted(SHIPPED)


@pytest.fixture(scope="session")
def geometries():
    return {name: load_fixture(name) for name in ALL_NAMES}


@pytest.fixture(params=ALL_NAMES)
def geom(request, geometries):
    return geometries[request.param]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n in RESULTS:
            ok, detail = RESULTS[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  ({detail})")
        else:
            terminalreporter.write_line(f"criterion {n}: FAIL  (not run)")
