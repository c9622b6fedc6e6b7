"""Capacity-proxy accuracy: determinism, range, hardware independence."""

import pytest

from cimnet.cim import LADDER, config_from_multipliers
from cimnet.cim import HW_FIELDS
from cimnet.encoding import GenomeCodec
from cimnet.proxy import (NOISE_SPAN, ProxyParams, accuracy_from_params,
                          proxy_accuracy)
from cimnet.search import SearchMode, config_space_for
from cimnet.workload import Family, default_space, sample_subnet


class TestProxy:
    def test_deterministic(self):
        space = default_space(Family.VIT)
        sub = sample_subnet(space, 0)
        params = ProxyParams()
        assert proxy_accuracy(sub, params, space) == proxy_accuracy(
            sub, params, space)

    @pytest.mark.parametrize("family", list(Family))
    def test_minimal_below_maximal(self, family):
        space = default_space(family)
        params = ProxyParams()
        assert (proxy_accuracy(space.minimal_subnet(), params, space)
                < proxy_accuracy(space.maximal_subnet(), params, space))

    @pytest.mark.parametrize("family", list(Family))
    def test_range(self, family):
        space = default_space(family)
        params = ProxyParams()
        for seed in range(30):
            acc = proxy_accuracy(sample_subnet(space, seed), params, space)
            assert 0.0 <= acc <= params.ceiling + NOISE_SPAN

    def test_zero_params_near_zero(self):
        assert accuracy_from_params(0.0, 1e6, 0.82) == 0.0
        assert accuracy_from_params(0.0, 1e6, 0.82, NOISE_SPAN) <= NOISE_SPAN

    def test_ceiling_validated(self):
        with pytest.raises(ValueError):
            ProxyParams(ceiling=1.5)

    def test_hardware_independent(self):
        # same subnet under every budget-valid hardware config: same accuracy
        space = default_space(Family.VIT)
        codec = GenomeCodec(space,
                            config_space_for(SearchMode.ELASTIC_ARCH_ELASTIC_CFG))
        params = ProxyParams()
        sub = sample_subnet(space, 1)
        ref = proxy_accuracy(sub, params, space)
        import itertools
        from cimnet.cim import validate_config
        count = 0
        for mults in itertools.product(LADDER, repeat=3):
            doc = dict.fromkeys(HW_FIELDS, 1.0)
            doc.update(l1_num_child=mults[0], ma_num_child=mults[1],
                       ma_comp_per_core=mults[2], ma_mem_size=0.5)
            cfg = config_from_multipliers(codec.config_space.base, doc)
            if not validate_config(cfg, codec.config_space).ok:
                continue
            count += 1
            genome = codec.encode(sub, cfg)
            decoded, _ = codec.decode(genome)
            assert proxy_accuracy(decoded, params, space) == ref
        assert count > 0
