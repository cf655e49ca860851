import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from voltgrid import apply_var_priority, build_injections, load_network
from voltgrid.network import bundled_path

FIXTURE_NAMES = ("case2", "case5", "case13", "case37")


@pytest.fixture(scope="session")
def case2():
    return load_network(bundled_path("case2.yaml"))


@pytest.fixture(scope="session")
def case5():
    return load_network(bundled_path("case5.yaml"))


@pytest.fixture(scope="session")
def case13():
    return load_network(bundled_path("case13.yaml"))


@pytest.fixture(scope="session")
def case37():
    return load_network(bundled_path("case37.yaml"))


def unity_pf_injections(network, load_scale, pv_avail):
    """Injections with every inverter at zero reactive output."""
    states = [
        apply_var_priority(spec, float(pv_avail[i]), 0.0)
        for i, spec in enumerate(network.inverters)
    ]
    return build_injections(network, load_scale, states), states


@pytest.fixture(scope="session")
def all_fixtures(case2, case5, case13, case37):
    return {"case2": case2, "case5": case5, "case13": case13, "case37": case37}
