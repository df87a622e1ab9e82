import os
import sys

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=25, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

from utils.mesh import BoundaryLayout, build_mesh  # noqa: E402
from utils.params import PhysicalParams  # noqa: E402


@pytest.fixture
def unit_params():
    return PhysicalParams(mu=1.0, k=1.0, alpha=1.0)


@pytest.fixture
def small_mesh():
    return build_mesh(4, 4, 4)


@pytest.fixture
def appendix_mesh():
    return build_mesh(4, 4, 4, BoundaryLayout.appendix_c())
