import numpy as np
import pytest

from plateopt.geometry import make_reference_plate, realize, reference_params

import support


@pytest.fixture(scope="session")
def ref_plate():
    return make_reference_plate()


@pytest.fixture(scope="session")
def reference_geometry(ref_plate):
    return realize(reference_params(), ref_plate)


@pytest.fixture(scope="session")
def toy_model():
    return support.handmade_model()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
