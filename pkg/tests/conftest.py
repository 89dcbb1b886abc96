import pytest
from hypothesis import HealthCheck, settings

from pwadyn.pwamap import builtin_gallery

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def gallery():
    return builtin_gallery()


@pytest.fixture(scope="session")
def cat_strips(gallery):
    """(rects, refined system, admissibility-flagged strip set) at max_n 5."""
    from pwadyn.strips import admissible_filter, detect_strips, propose_rectangles, strip_system

    cat = gallery["cat"]
    rects = propose_rectangles(cat, 200, 10, 0.25, 0.3, seed=0, cell_diam=0.25)
    system = strip_system(cat, rects)
    return rects, system, admissible_filter(system, detect_strips(system, rects, 5))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
