import hypothesis
import numpy as np
import pytest

from dwdecay.spsolver import PotentialSpec, region_overlap_matrix, solve_double_well

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("default")

# reference geometry used throughout
ELL, B, V0 = 51.0, 2.0, 0.1
EPS1 = (np.pi / ELL) ** 2          # 3.7945e-3
EPS2 = (2.0 * np.pi / ELL) ** 2    # 1.5178e-2


@pytest.fixture(scope="session")
def basis_r51():
    """Symmetric double well, small basis."""
    return solve_double_well(PotentialSpec(ELL, B, 51.0, V0), e_max=0.05)


@pytest.fixture(scope="session")
def basis_r900():
    return solve_double_well(PotentialSpec(ELL, B, 900.0, V0), e_max=0.05)


@pytest.fixture(scope="session")
def overlaps_r900(basis_r900):
    return {name: region_overlap_matrix(basis_r900, name)
            for name in ("I", "II", "III")}
