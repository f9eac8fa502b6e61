"""Shared fixtures: small models with known behavior for every suite."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from evofam import (
    CollisionKernel,
    TimeProfile,
    binary_fragmentation_model,
    collision_model,
    collision_perturbed_model,
    fragmentation_perturbed_model,
    frequency_matching_kernel,
    gaussian_kernel_matrix,
    two_state_exchange,
    uniform_kernel_matrix,
    uniform_velocity_grid,
)
from evofam.coefficients import SeparableCoefficient

settings.register_profile(
    "suite", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def oracle_model():
    return two_state_exchange(1.0)


@pytest.fixture(scope="session")
def conservative_collision():
    """8 velocity nodes; the loss frequency equals the kernel's column mass."""
    grid = uniform_velocity_grid(-1.0, 1.0, 8)
    kernel = CollisionKernel(profile=TimeProfile(kind="constant", c0=1.0),
                             matrix=uniform_kernel_matrix(grid))
    frequency = frequency_matching_kernel(grid, kernel)
    return collision_model(grid, frequency, kernel)


@pytest.fixture(scope="session")
def conservative_collision_perturbed(conservative_collision):
    return collision_perturbed_model(conservative_collision)


@pytest.fixture(scope="session")
def subcritical_collision():
    """Strictly subcritical autonomous model: gaussian gain under unit loss."""
    grid = uniform_velocity_grid(-1.0, 1.0, 8)
    kernel = CollisionKernel(profile=TimeProfile(kind="constant", c0=1.0),
                             matrix=gaussian_kernel_matrix(grid, amplitude=0.5,
                                                           width=0.5))
    frequency = SeparableCoefficient(profile=TimeProfile(kind="constant", c0=1.0),
                                     space=np.ones(grid.size))
    return collision_model(grid, frequency, kernel)


@pytest.fixture(scope="session")
def subcritical_collision_perturbed(subcritical_collision):
    return collision_perturbed_model(subcritical_collision)


@pytest.fixture(scope="session")
def timedep_collision():
    """Loss frequency 1 + t with a strictly subcritical gaussian kernel."""
    grid = uniform_velocity_grid(-1.0, 1.0, 8)
    kernel = CollisionKernel(profile=TimeProfile(kind="constant", c0=1.0),
                             matrix=gaussian_kernel_matrix(grid, amplitude=0.5,
                                                           width=0.5))
    frequency = SeparableCoefficient(profile=TimeProfile(kind="affine", c0=1.0, c1=1.0),
                                     space=np.ones(grid.size))
    return collision_model(grid, frequency, kernel)


@pytest.fixture(scope="session")
def timedep_collision_perturbed(timedep_collision):
    return collision_perturbed_model(timedep_collision)


@pytest.fixture(scope="session")
def binary_frag():
    return binary_fragmentation_model()


@pytest.fixture(scope="session")
def binary_frag_perturbed(binary_frag):
    return fragmentation_perturbed_model(binary_frag)
