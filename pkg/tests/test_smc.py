import numpy as np
import pytest
from scipy import stats

from sbice.distance import DistanceConfig
from sbice.errors import ConfigurationError
from sbice.priors import LinearConstraint, PriorSpec, sample_prior
from sbice.rng import RandomStream
from sbice.simulators import SimulatorConfig, builtin_entry, builtin_simulate
from sbice.smc import (Population, RunResult, SmcConfig,
                       effective_sample_size, emit_datasets, run_smcabc)

STREAM = RandomStream(1117)

SIM1_TRUE = {"rho": 1.0, "beta": -1.5, "tau": 1.5}


def quick_cfg(**kwargs):
    defaults = dict(population_size=32, max_generations=4, master_seed=21,
                    distance=DistanceConfig(n_projections=25))
    defaults.update(kwargs)
    return SmcConfig(**defaults)


def sim1_setup(n=400, seed=5):
    source = builtin_simulate("dgp1", SIM1_TRUE, n, RandomStream(seed))
    sim = SimulatorConfig("builtin", n, builtin_id="sim1", source_ref=source)
    return builtin_entry("sim1").prior, sim, source


class TestSamplePrior:
    def test_box_mean_by_law_of_large_numbers(self):
        prior = PriorSpec({"tau": (0.0, 2.0)})
        draws = [sample_prior(prior, STREAM.substream(i))["tau"]
                 for i in range(10 ** 4)]
        assert np.mean(draws) == pytest.approx(1.0, abs=0.02)

    def test_linear_constraint_holds_exactly(self):
        prior = PriorSpec({"rho": (-5.0, 5.0), "tau": (-20.0, 20.0)},
                          LinearConstraint({"rho": 1.0, "tau": 1.0}, 3.0))
        for i in range(200):
            theta = sample_prior(prior, STREAM.substream(100 + i))
            assert theta["rho"] + theta["tau"] == pytest.approx(3.0, abs=1e-12)
            assert -5.0 <= theta["rho"] <= 5.0

    def test_tiny_box_stays_inside(self):
        prior = PriorSpec({"tau": (2.0, 2.0 + 1e-9)})
        theta = sample_prior(prior, STREAM.substream(7))
        assert 2.0 <= theta["tau"] <= 2.0 + 1e-9

    def test_infeasible_constraint_rejected(self):
        with pytest.raises(ConfigurationError, match="feasible"):
            PriorSpec({"rho": (0.0, 1.0), "tau": (0.0, 1.0)},
                      LinearConstraint({"rho": 1.0, "tau": 1.0}, 10.0))


class TestEffectiveSampleSize:
    def test_uniform_weights(self):
        assert effective_sample_size(np.full(100, 0.01)) == pytest.approx(100.0)

    def test_degenerate_weights(self):
        w = np.zeros(10)
        w[3] = 1.0
        assert effective_sample_size(w) == pytest.approx(1.0)

    def test_hand_computed(self):
        # 1 / (0.25 + 0.0625 + 0.0625)
        assert effective_sample_size([0.5, 0.25, 0.25]) == pytest.approx(
            8.0 / 3.0, abs=1e-9)


class TestRunSmcabc:
    def test_posterior_concentrates_on_truth(self):
        prior, sim, source = sim1_setup(n=800)
        res = run_smcabc(prior, sim, source, quick_cfg(
            population_size=64, max_generations=6))
        mean = res.final_population.weighted_mean()
        assert mean["tau"] == pytest.approx(1.5, abs=0.35)
        assert mean["beta"] == pytest.approx(-1.5, abs=0.35)

    def test_population_invariants(self):
        prior, sim, source = sim1_setup()
        res = run_smcabc(prior, sim, source, quick_cfg())
        eps = [p.epsilon for p in res.populations]
        assert all(b < a for a, b in zip(eps, eps[1:]))
        for p in res.populations:
            assert p.weights.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(p.distances < p.epsilon)
            assert 0.0 < p.ess <= p.size
            for i in range(p.size):
                assert prior.in_support(p.theta_dict(i))
        assert res.simulation_count <= \
            quick_cfg().max_simulations_per_generation * len(res.populations)

    def test_constraint_respected_through_perturbation(self):
        prior = builtin_entry("sim7").prior
        theta_true = {"rho": 1.0, "beta": 0.3, "tau": 2.0}
        source = builtin_simulate("dgp6", theta_true, 300, RandomStream(9))
        sim = SimulatorConfig("builtin", 300, builtin_id="sim7",
                              source_ref=source)
        res = run_smcabc(prior, sim, source, quick_cfg(max_generations=3))
        for p in res.populations:
            sums = (p.thetas[:, p.param_names.index("rho")]
                    + p.thetas[:, p.param_names.index("tau")])
            assert np.max(np.abs(sums - 3.0)) <= 1e-12

    def test_deterministic_across_thread_counts(self):
        prior, sim, source = sim1_setup()
        a = run_smcabc(prior, sim, source, quick_cfg(max_generations=3))
        b = run_smcabc(prior, sim, source, quick_cfg(max_generations=3))
        c = run_smcabc(prior, sim, source, quick_cfg(max_generations=3),
                       threads=3)
        for x, y in ((a, b), (a, c)):
            assert x.simulation_count == y.simulation_count
            for pa, pb in zip(x.populations, y.populations):
                assert np.array_equal(pa.thetas, pb.thetas)
                assert np.array_equal(pa.weights, pb.weights)

    def test_resume_matches_uninterrupted_run(self):
        prior, sim, source = sim1_setup()
        full = run_smcabc(prior, sim, source, quick_cfg())
        head = run_smcabc(prior, sim, source, quick_cfg(max_generations=2))
        tail = run_smcabc(prior, sim, source, quick_cfg(),
                          initial=head.populations,
                          initial_simulation_count=head.simulation_count)
        assert tail.simulation_count == full.simulation_count
        for pa, pb in zip(full.populations, tail.populations):
            assert np.array_equal(pa.thetas, pb.thetas)

    def test_budget_exhaustion_returns_partial_result(self):
        prior, sim, source = sim1_setup(n=200)
        # min_epsilon tiny and a tight budget: later generations cannot finish
        cfg = SmcConfig(population_size=32, max_generations=10,
                        master_seed=3, min_epsilon=1e-9,
                        max_simulations_per_generation=40,
                        distance=DistanceConfig(n_projections=10))
        res = run_smcabc(prior, sim, source, cfg)
        assert res.termination_reason == "budget_exhausted"
        assert len(res.populations) < 10

    def test_uninformative_simulator_posterior_stays_near_prior(self):
        theta = {"rho": 1.0, "beta": 1.0, "tau": 1.0}
        source = builtin_simulate("constant", theta, 300, RandomStream(12))
        prior = builtin_entry("constant").prior
        sim = SimulatorConfig("builtin", 300, builtin_id="constant")
        res = run_smcabc(prior, sim, source, quick_cfg(
            population_size=128, max_generations=3, master_seed=77))
        mean = res.final_population.weighted_mean()
        var = res.final_population.weighted_variance()
        for name in ("rho", "beta", "tau"):
            assert mean[name] == pytest.approx(1.0, abs=0.12)
            assert var[name] == pytest.approx(1.0 / 3.0, rel=0.25)

    def test_mismatched_prior_names_rejected(self):
        prior = PriorSpec({"tau": (0.0, 2.0)})
        _, sim, source = sim1_setup(n=100)
        with pytest.raises(ConfigurationError, match="do not match"):
            run_smcabc(prior, sim, source, quick_cfg())


class TestEmitDatasets:
    def test_posterior_emission_contract(self):
        prior, sim, source = sim1_setup()
        res = run_smcabc(prior, sim, source, quick_cfg(max_generations=2))
        out = emit_datasets(res.final_population, sim, 10, STREAM.substream(1))
        assert len(out) == 10
        for gen in out:
            assert gen.tau_star == gen.theta["tau"]
            assert prior.in_support(gen.theta)
            assert gen.dataset.n == 400

    def test_prior_emission_tau_is_uniform_by_ks(self):
        prior, sim, source = sim1_setup(n=100)
        out = emit_datasets(prior, sim, 60, STREAM.substream(2))
        taus = [g.tau_star for g in out]
        p_value = stats.kstest(taus, stats.uniform(0.0, 2.0).cdf).pvalue
        assert p_value > 0.01

    def test_emission_is_deterministic(self):
        prior, sim, source = sim1_setup(n=100)
        a = emit_datasets(prior, sim, 3, STREAM.substream(3))
        b = emit_datasets(prior, sim, 3, STREAM.substream(3))
        for ga, gb in zip(a, b):
            assert np.array_equal(ga.dataset.outcome, gb.dataset.outcome)
            assert ga.theta == gb.theta
