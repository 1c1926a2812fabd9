import math

import numpy as np
import pytest

from models.domain_model import DomainSpec
from models.field_model import SpectralField
from models.params_model import ModelParams, NoiseBasis


def constant_field(spec: DomainSpec, vector) -> SpectralField:
    """Spatially constant field with the given R^3 value"""
    u = SpectralField.zeros(spec)
    u.coeffs[:, 0] = np.asarray(vector, dtype=float) * math.sqrt(spec.volume)
    return u


def logistic_l2(t: float, y0: float = 1.0, kappa2: float = 1.0, mu: float = 1.0) -> float:
    """Closed form of dy/dt = -2 k2 y (1 + mu y)"""
    decay = math.exp(-2.0 * kappa2 * t)
    return y0 * decay / (1.0 + mu * y0 * (1.0 - decay))


@pytest.fixture
def spec1d():
    return DomainSpec.create(1, n_modes=8)


@pytest.fixture
def spec2d():
    return DomainSpec.create(2, lengths=(1.0, 2.0), n_modes=(4, 4))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def heat_params():
    """Pure heat flow: no precession, no longitudinal damping"""
    return ModelParams(kappa1=1.0, kappa2=0.0, gamma=0.0, mu=1.0)


@pytest.fixture
def no_noise(spec1d):
    return NoiseBasis(domain=spec1d)
