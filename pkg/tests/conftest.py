import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kirchwell import dynamics as dy
from kirchwell import wellgeometry as wg
from kirchwell.domain import default_domain
from kirchwell.functionals import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams(1.0, 1.0, 5.0)


@pytest.fixture(scope="session")
def dom():
    return default_domain(64)


@pytest.fixture(scope="session")
def sin_coeffs(dom):
    """Coefficients of ``sin x``: ``sqrt(pi/2) e_1``."""
    return math.sqrt(math.pi / 2) * dom.mode(0)


@pytest.fixture(scope="session")
def geometry(dom, params):
    return wg.analyze_geometry(dom, params, with_curve=True)


@pytest.fixture(scope="session")
def decay_run(dom, params):
    return dy.integrate(dom, 0.1 * dom.mode(0), params, dy.SolverControls(rel_tol=1e-8))
