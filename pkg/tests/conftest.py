import dataclasses

import numpy as np
import pytest

from ajtwin.params import GenerationFit, ModelParameters, NoiseSpec, load_parameters
from ajtwin.physics import QuadratureRule
from ajtwin.types import InputVector, StateVector, ThetaParams
from ajtwin.units import to_si


@pytest.fixture(scope="session")
def params():
    return load_parameters()


@pytest.fixture(scope="session")
def quad(params):
    return QuadratureRule(params.quadrature)


@pytest.fixture(scope="session")
def nominal_state():
    return StateVector(3e-6, 1e-6, 0.5e-6, 1e-6, 5.1e-7)


@pytest.fixture(scope="session")
def nominal_input():
    return InputVector(to_si(370, "mA"), to_si(25, "sccm"), to_si(50, "sccm"))


@pytest.fixture(scope="session")
def zero_theta():
    return ThetaParams.zero()


def fixed_point_params(base: ModelParameters) -> ModelParameters:
    """Bundle with the generation fit zeroed: phi_A = 0 is then an exact
    fixed point of the drift field."""
    return dataclasses.replace(base, generation=GenerationFit(
        c_qq=0.0, c_vq=0.0, c_qi=0.0, c_iv=0.0, c_v=0.0, c_q=0.0, c_i=0.0,
        c_0=0.0))


def noiseless_params(base: ModelParameters) -> ModelParameters:
    return dataclasses.replace(base, noise=NoiseSpec(
        sigma_xi=(0.0,) * 5, sigma_w=(0.0,) * 5))


def random_valid_states(rng: np.random.Generator, n: int) -> np.ndarray:
    """States spanning the operating envelope, away from invariant edges."""
    da = rng.uniform(1e-6, 6e-6, n)
    vl = rng.uniform(0.5e-6, 1.5e-6, n)
    drt = rng.uniform(0.0, 2e-4, n)
    drn = rng.uniform(0.0, 15e-6, n)
    phia = rng.uniform(5e-8, 1.5e-6, n)
    return np.stack([da, vl, drt, drn, phia], axis=1)


def random_valid_inputs(rng: np.random.Generator, n: int) -> np.ndarray:
    ia = to_si(rng.uniform(300, 440, n), "mA")
    qc = to_si(rng.uniform(15, 35, n), "sccm")
    qs = to_si(rng.uniform(40, 60, n), "sccm")
    return np.stack([ia, qc, qs], axis=1)
