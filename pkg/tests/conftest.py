"""Shared fixtures: small cached problem setups used across test modules."""
import numpy as np
import pytest

from nehariflow.discretize import assemble
from nehariflow.potentials import DeltaSum, ZeroPotential
from nehariflow.problem import Box, ProblemSpec

SEED = 20260817


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def free_spec(alpha=1.0, omega=1.0, half=32.0):
    return ProblemSpec(alpha=alpha, omega=omega, dim=1,
                       potential=ZeroPotential(),
                       domain=Box(((-half, half),)))


def delta_spec(alpha=1.0, omega=1.0, strength=1.0, half=32.0):
    return ProblemSpec(alpha=alpha, omega=omega, dim=1,
                       potential=DeltaSum(centers=(0.0,),
                                          strengths=(strength,)),
                       domain=Box(((-half, half),)))


_OPS_CACHE = {}


def cached_ops(spec, h, kind, fe_order=1):
    key = (spec, h, kind, fe_order)
    if key not in _OPS_CACHE:
        _OPS_CACHE[key] = assemble(spec, h, kind, fe_order=fe_order)
    return _OPS_CACHE[key]


@pytest.fixture(scope="session")
def free_sp():
    """Free 1D problem on a sine-spectral grid, moderate resolution."""
    spec = free_spec()
    return spec, assemble(spec, 2.0 ** -4, "sp")


@pytest.fixture(scope="session")
def delta_fe2():
    """Single point interaction, quadratic elements."""
    spec = delta_spec()
    return spec, assemble(spec, 2.0 ** -5, "fe", fe_order=2)
