import os

import pytest

from islanduc.grid_model import GeneratorSpec, SystemSpec, load_system

DATA = os.path.join(os.path.dirname(__file__), "..", "data")
ISLAND4 = os.path.abspath(os.path.join(DATA, "island4.json"))


def make_gen(id="u", p_min=1.0, p_max=10.0, ramp_up=100.0, ramp_down=100.0,
             min_up=1, min_down=1, startup_cost=0.0, cost_quadratic=(0.0, 10.0, 0.0),
             inertia_h=5.0, m_base=10.0, gov_gain=20.0, gov_a1=0.5, gov_a2=0.0,
             gov_b1=0.0, gov_b2=0.0, dp_min=-1.0, dp_max=1.0) -> GeneratorSpec:
    return GeneratorSpec(id, p_min, p_max, ramp_up, ramp_down, min_up, min_down,
                         startup_cost, tuple(cost_quadratic), inertia_h, m_base,
                         gov_gain, gov_a1, gov_a2, gov_b1, gov_b2, dp_min, dp_max)


def make_system(demand, s_base=50.0, f_nominal=50.0, load_damping=1.0) -> SystemSpec:
    return SystemSpec(s_base, f_nominal, load_damping, tuple(demand), len(demand))


@pytest.fixture(scope="session")
def island4():
    return load_system(ISLAND4)
