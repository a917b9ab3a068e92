# -*- coding: utf-8 -*-
import numpy as np
import pytest

import alkatomo
from alkatomo.observables import default_observables, default_plan
from alkatomo.signal import SignalParams, default_grid, synthesize_trace_set


@pytest.fixture(scope="session")
def observables():
    return default_observables()


@pytest.fixture(scope="session")
def params():
    return SignalParams(eta=1.0, zeta=0.3, phi=0.4)


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def plan():
    return default_plan(0.3)


@pytest.fixture(scope="session")
def rho():
    return alkatomo.random_state(1)


@pytest.fixture(scope="session")
def trace_set(rho, plan, observables, params, grid):
    return synthesize_trace_set(rho, plan, observables, params, grid, 0.0, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(20201223)
