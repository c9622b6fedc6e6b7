"""Shared fixtures: spaces, codecs and session-wide cached evaluators."""

import pytest

from cimnet.encoding import GenomeCodec
from cimnet.proxy import ProxyParams, proxy_accuracy
from cimnet.search import SearchMode, config_space_for, make_cached_simulator
from cimnet.workload import Family, default_space

FAMILIES = (Family.CNN_MBV3, Family.CNN_RESNET, Family.VIT)


@pytest.fixture(scope="session")
def spaces():
    return {fam: default_space(fam) for fam in FAMILIES}


@pytest.fixture(scope="session")
def simulators(spaces):
    # one memoized evaluator per family, shared across the whole session
    return {fam: make_cached_simulator(space) for fam, space in spaces.items()}


@pytest.fixture(scope="session")
def proxy_params():
    return ProxyParams()


@pytest.fixture(scope="session")
def oracles(spaces, proxy_params):
    def make(fam):
        space = spaces[fam]
        return lambda subnet: proxy_accuracy(subnet, proxy_params, space)
    return {fam: make(fam) for fam in FAMILIES}


@pytest.fixture(scope="session")
def codecs(spaces):
    out = {}
    for fam, space in spaces.items():
        for mode in SearchMode:
            out[(fam, mode)] = GenomeCodec(space, config_space_for(mode))
    return out
