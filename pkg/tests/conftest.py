import numpy as np
import pytest

from formsched import (ControlGains, agent_graph, build_formation,
                       identity_assignment)


@pytest.fixture(scope="session")
def sym_spec():
    return build_formation("symmetric", 5.0)


@pytest.fixture(scope="session")
def asym_spec():
    return build_formation("asymmetric", 5.0)


@pytest.fixture(scope="session")
def sym_graph(sym_spec):
    return agent_graph(sym_spec, identity_assignment(sym_spec.n))


@pytest.fixture(scope="session")
def asym_graph(asym_spec):
    return agent_graph(asym_spec, identity_assignment(asym_spec.n))


@pytest.fixture(scope="session")
def default_gains():
    return ControlGains()


@pytest.fixture
def rng():
    return np.random.default_rng(42)
