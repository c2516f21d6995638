import pytest

from peristation import (
    PlantParams,
    RingGeometry,
    SurrogateMaterial,
    build_station,
    calibrate_kappa,
)

# nominal ring: R=40, r=25, five 28.8 mm chambers spaced 12 mm, 2 mm walls
NOMINAL = dict(
    outer_radius_R=40.0,
    inner_radius_r=25.0,
    step_height_m=1.5,
    chamber_spacing_l=12.0,
    wall_thickness_t=2.0,
    chamber_length_s=28.8,
    chamber_count_N=5,
)


@pytest.fixture
def geometry():
    return RingGeometry(**NOMINAL)


@pytest.fixture
def material(geometry):
    kappa = calibrate_kappa(geometry, 100.0, 0.69, 15.0)
    return SurrogateMaterial(100.0, 0.45, kappa)


@pytest.fixture
def params():
    return PlantParams()


@pytest.fixture
def five_module_layout(geometry):
    return build_station(geometry, 5, 20.0, 20.0)


@pytest.fixture
def three_module_layout(geometry):
    return build_station(geometry, 3, 20.0, 20.0)
