import math

import pytest

from pllranges import LoopSpec, TransferFunction, make_pd

TAU1 = 0.0448
TAU2 = 0.0185


@pytest.fixture(scope="session")
def pd_half():
    return make_pd("sinusoidal-half", math.tau)


@pytest.fixture(scope="session")
def tf_example1():
    return TransferFunction((1.0, 0.5), (1.0, 0.5, 0.5))


@pytest.fixture(scope="session")
def tf_example2():
    return TransferFunction((1.0, 0.25, 0.5), (1.0, 2.0, 2.0, 2.0))


@pytest.fixture(scope="session")
def tf_leadlag():
    return TransferFunction((1.0, TAU2), (1.0, TAU1 + TAU2))


@pytest.fixture(scope="session")
def tf_pi():
    return TransferFunction((1.0, 0.0225), (0.0, 0.0633))


@pytest.fixture(scope="session")
def spec_example1(pd_half, tf_example1):
    return LoopSpec(pd_half, tf_example1, 8.0, 2.0)


@pytest.fixture(scope="session")
def spec_example2(pd_half, tf_example2):
    return LoopSpec(pd_half, tf_example2, 80.0, 3.0)


@pytest.fixture(scope="session")
def spec_fig8(pd_half, tf_leadlag):
    return LoopSpec(pd_half, tf_leadlag, 500.0, 178.9)


@pytest.fixture(scope="session")
def spec_fig9(pd_half, tf_leadlag):
    return LoopSpec(pd_half, tf_leadlag, 250.0)


@pytest.fixture(scope="session")
def spec_fig11(pd_half, tf_pi):
    return LoopSpec(pd_half, tf_pi, 250.0, 47.0)


@pytest.fixture(scope="session")
def spec_filterless(pd_half):
    return LoopSpec(pd_half, TransferFunction((1.0,), (1.0,)), 8.0)
