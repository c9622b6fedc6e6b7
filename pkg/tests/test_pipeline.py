"""Cross-module properties: predictor curves, SVR parity, search quality."""

import numpy as np

from cimnet.encoding import genomes_to_matrix
from cimnet.predict import (TargetTransform, evaluate_predictor, fit_ridge,
                            fit_svr_linear, kendall_tau)
from cimnet.search import (SearchMode, hypervolume, joint_search,
                           labeled_pool, make_setting, sample_setting_genome)
from cimnet.workload import Family

ELASTIC = SearchMode.ELASTIC_ARCH_ELASTIC_CFG
ARCH_ONLY = SearchMode.ELASTIC_ARCH_STATIC_CFG


class TestPredictorCurve:
    def test_mape_curve_shape_and_trend(self, spaces, simulators, oracles,
                                        codecs):
        # Fig-2-style sweep: 4 sizes x 10 trials; more data never hurts much
        fam = Family.CNN_MBV3
        codec = codecs[(fam, ARCH_ONLY)]
        setting = make_setting(ARCH_ONLY, spaces[fam])
        genomes, _, cyc = labeled_pool(setting, codec, 1400, 5,
                                       simulators[fam], oracles[fam])
        curve = evaluate_predictor(genomes_to_matrix(genomes), cyc,
                                   train_sizes=(100, 250, 500, 1000),
                                   trials=10, test_size=300,
                                   transform=TargetTransform.LOG)
        assert [e.n_train for e in curve] == [100, 250, 500, 1000]
        assert all(e.n_test == 300 for e in curve)
        assert curve[-1].mape <= curve[0].mape + 1.0

    def test_svr_tau_within_tenth_of_ridge(self, spaces, simulators, oracles,
                                           codecs):
        fam = Family.VIT
        codec = codecs[(fam, ELASTIC)]
        setting = make_setting(ELASTIC, spaces[fam])
        genomes, _, cyc = labeled_pool(setting, codec, 300, 13,
                                       simulators[fam], oracles[fam])
        X = genomes_to_matrix(genomes)
        ridge = fit_ridge(X[:200], cyc[:200], lam=1.0,
                          transform=TargetTransform.LOG)
        svr = fit_svr_linear(X[:200], cyc[:200], seed=0,
                             transform=TargetTransform.LOG)
        tau_ridge = kendall_tau(cyc[200:], ridge.predict(X[200:]))
        tau_svr = kendall_tau(cyc[200:], svr.predict(X[200:]))
        assert abs(tau_ridge - tau_svr) <= 0.1


class TestSearchQuality:
    def test_joint_search_beats_budget_matched_random(self, spaces,
                                                      simulators, oracles,
                                                      codecs):
        # final-front hypervolume vs. the same number of pure-random true
        # evaluations, >= 9 of 10 seeds (desk-scale budget)
        fam = Family.VIT
        codec = codecs[(fam, ELASTIC)]
        setting = make_setting(ELASTIC, spaces[fam])
        simulator, oracle = simulators[fam], oracles[fam]
        k, m, n = 5, 500, 125
        ref = (0.0, 4.0e7)
        wins = 0
        for seed in range(10):
            history = joint_search(setting, codec, k, m, n, simulator, oracle,
                                   seed=seed)
            hv_search = hypervolume(
                [(p.accuracy, p.cycles) for p in history.front], ref)
            rng = np.random.default_rng(10_000 + seed)
            rand_points = []
            for _ in range(k * n):
                g = sample_setting_genome(setting, codec,
                                          int(rng.integers(2 ** 63)))
                subnet, cfg = codec.decode(g)
                rand_points.append((oracle(subnet),
                                    float(simulator(subnet, cfg))))
            hv_rand = hypervolume(rand_points, ref)
            wins += hv_search >= hv_rand
        assert wins >= 9, f"search beat random on only {wins}/10 seeds"

    def test_elastic_config_front_dominates_static_config_front(
            self, spaces, simulators, oracles, codecs):
        # C_s is slower than anything the constrained elastic space reaches,
        # so the joint front should cover the arch-only front everywhere
        fam = Family.VIT
        simulator, oracle = simulators[fam], oracles[fam]
        for seed in range(5):
            fronts = {}
            for mode in (ELASTIC, ARCH_ONLY):
                codec = codecs[(fam, mode)]
                setting = make_setting(mode, spaces[fam])
                h = joint_search(setting, codec, k=3, m=200, n=50,
                                 simulator=simulator, accuracy_oracle=oracle,
                                 seed=seed)
                fronts[mode] = h.front
            for s in fronts[ARCH_ONLY]:
                assert any(e.accuracy >= s.accuracy and e.cycles <= s.cycles
                           for e in fronts[ELASTIC]), \
                    (seed, s.accuracy, s.cycles)
