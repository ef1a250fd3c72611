import pytest

from classevo import kerr
from classevo.phasespace import GridGeometry

ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def default_geometry():
    return GridGeometry((-6.0, 6.0), (-6.0, 6.0), 301, 301)


@pytest.fixture(scope="session")
def fig1_panels(default_geometry):
    """The four Kerr panels at kappa t = pi, rendered once per session."""
    params = kerr.KerrParams(1.0, 0.1)
    t = 3.141592653589793 / params.kappa
    return {
        mode: kerr.render_panel(kerr.panel_spec(mode, t), params, default_geometry)
        for mode in ("cc", "qc", "cq", "qq")
    }


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
