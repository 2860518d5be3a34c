import numpy as np
import pytest

from afdm_chanest.params import reference_setup
from afdm_chanest.pilot import build_dual_frames


@pytest.fixture(scope="session")
def ref():
    """Reference setup: N=256, xi=4 (2Nc1=13)."""
    spec, cfg, limits = reference_setup()
    return spec, cfg, limits


@pytest.fixture(scope="session")
def ref_prime():
    """Second chirp rate for dual-frame estimation: xi'=5 (2Nc1'=15)."""
    spec, cfg, limits = reference_setup(xi=5)
    return spec, cfg, limits


@pytest.fixture(scope="session")
def dual(ref, ref_prime):
    _, cfg, limits = ref
    _, cfg2, limits2 = ref_prime
    f1, f2 = build_dual_frames(cfg, cfg2, limits, limits2, 30.0, np.random.default_rng(5))
    return cfg, cfg2, f1, f2


def pytest_terminal_summary(terminalreporter):
    from _util import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
