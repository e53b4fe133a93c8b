import pytest

from spirokin.spiral import (DesignConstraints, solve_design_parameters,
                             discretize_profile)
from spirokin.manipulator import MaterialConstants, build_spec


@pytest.fixture(scope="session")
def trunk_params():
    return solve_design_parameters(DesignConstraints(m=1.53, r_rigid=28.0))


@pytest.fixture(scope="session")
def trunk_profile(trunk_params):
    return discretize_profile(trunk_params)


@pytest.fixture(scope="session")
def spec(trunk_profile):
    return build_spec(trunk_profile)


@pytest.fixture(scope="session")
def soft_spec(trunk_profile):
    # softened joints so gravity produces large angles and saturation
    return build_spec(trunk_profile,
                      MaterialConstants(youngs_modulus=2.0, density=1.22))
