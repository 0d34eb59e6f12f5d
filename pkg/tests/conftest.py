import sys

import numpy as np
import pytest

from lrinvariant.ermakov import ErmakovSolution
from lrinvariant.operators import GridSpec
from lrinvariant.params import PRESETS, make_caldirola_kanai


@pytest.fixture(scope="session")
def ck_ref():
    return PRESETS["ck-reference"].ck


@pytest.fixture(scope="session")
def ref_model(ck_ref):
    return make_caldirola_kanai(ck_ref)


@pytest.fixture(scope="session")
def ref_ermakov(ck_ref, ref_model):
    return ErmakovSolution.closed_form(ck_ref, ref_model)


@pytest.fixture(scope="session")
def narrow_grid():
    return GridSpec(-2.0, 2.0, 4096)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", {})
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
