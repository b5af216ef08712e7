"""Shared simulations.  Full-ensemble runs take seconds each, so the ones
used by several test modules are computed once per session."""
import numpy as np
import pytest

from ssecho.config import load_config, resolve
from ssecho.experiments import run_experiment, run_sweep

TWO_PI = 2 * np.pi


def preset_doc(name, **params):
    doc = load_config(name)
    doc["sequence"]["params"].update(params)
    return doc


@pytest.fixture(scope="session")
def fig1b_run():
    return run_experiment(resolve(load_config("fig1b")))


@pytest.fixture(scope="session")
def fig2c_sweep():
    return run_sweep(load_config("fig2c"))


@pytest.fixture(scope="session")
def fig2e_sweep():
    return run_sweep(load_config("fig2e"))


@pytest.fixture(scope="session")
def fig3e_sweep():
    return run_sweep(load_config("fig3e"))
