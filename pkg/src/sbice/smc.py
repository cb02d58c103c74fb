"""Sequential Monte Carlo ABC over generator parameters.

Generation 0 draws a pilot of 2M prior simulations, sets the starting
tolerance at the configured quantile of the pilot distances, and keeps the
first M particles under it. Every later generation resamples a parent from
the previous weighted population, perturbs it with a diagonal Gaussian
kernel (per-parameter variance = kernel_scale x the weighted sample
variance, with constrained priors perturbed inside the feasible slice),
rejects proposals outside the prior, and accepts candidates whose
simulated dataset lands within the shrinking tolerance. Weights follow the
standard importance formula: prior density over the kernel mixture.

Candidates are consumed strictly in proposal order and consumption stops
at the M-th acceptance, so parallel lanes reproduce the serial run
bit-for-bit; every candidate owns an RNG substream keyed by (generation,
slot).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .dataset import Dataset, Standardizer
from .distance import DistanceConfig, ProjectedReference
from .errors import ConfigurationError, SimulationError
from .priors import PriorSpec, sample_prior
from .rng import RandomStream
from .simulators import GeneratedDataset, SimulatorConfig, Theta, simulate

_KERNEL_VAR_FLOOR = 1e-12
_PROPOSAL_CAP_FACTOR = 1000

# substream tags under the master seed
_PROJECTIONS, _CANDIDATES, _EMISSION = 1, 2, 3


class Particle(NamedTuple):
    theta: Theta
    weight: float
    distance: float


@dataclass(frozen=True)
class Population:
    """One sealed SMC generation: an M-particle weighted sample."""

    generation: int
    epsilon: float
    param_names: tuple[str, ...]
    thetas: np.ndarray
    weights: np.ndarray
    distances: np.ndarray

    def __post_init__(self) -> None:
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ConfigurationError("population weights must sum to 1")
        if np.any(self.distances >= self.epsilon):
            raise ConfigurationError("population holds a particle at or above "
                                     "its tolerance")
        for arr in (self.thetas, self.weights, self.distances):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return self.thetas.shape[0]

    @property
    def ess(self) -> float:
        return effective_sample_size(self.weights)

    def theta_dict(self, i: int) -> Theta:
        return dict(zip(self.param_names, map(float, self.thetas[i])))

    @property
    def particles(self) -> list[Particle]:
        return [Particle(self.theta_dict(i), float(self.weights[i]),
                         float(self.distances[i])) for i in range(self.size)]

    def weighted_mean(self) -> dict[str, float]:
        mean = self.weights @ self.thetas
        return dict(zip(self.param_names, map(float, mean)))

    def weighted_variance(self) -> dict[str, float]:
        mean = self.weights @ self.thetas
        var = self.weights @ (self.thetas - mean) ** 2
        return dict(zip(self.param_names, map(float, var)))


def effective_sample_size(weights) -> float:
    """1 / sum(w^2) for normalized weights."""
    weights = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(weights ** 2))


@dataclass(frozen=True)
class SmcConfig:
    population_size: int
    max_generations: int = 12
    min_epsilon: float = 0.005
    epsilon_quantile: float = 0.5
    kernel_scale: float = 2.0
    distance: DistanceConfig = field(default_factory=DistanceConfig)
    max_simulations_per_generation: int | None = None
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 8:
            raise ConfigurationError("population size must be >= 8")
        if not 0.0 < self.epsilon_quantile < 1.0:
            raise ConfigurationError("epsilon quantile must lie in (0, 1)")
        if self.max_generations < 1:
            raise ConfigurationError("need at least one generation")
        if self.min_epsilon <= 0:
            raise ConfigurationError("min_epsilon must be > 0")
        if self.kernel_scale <= 0:
            raise ConfigurationError("kernel_scale must be > 0")
        if self.max_simulations_per_generation is None:
            object.__setattr__(self, "max_simulations_per_generation",
                               50 * self.population_size)
        if self.max_simulations_per_generation < self.population_size:
            raise ConfigurationError("per-generation budget must be >= "
                                     "population size")


@dataclass(frozen=True)
class RunResult:
    populations: tuple[Population, ...]
    simulation_count: int
    termination_reason: str  # min_epsilon_reached | max_generations | budget_exhausted

    @property
    def final_population(self) -> Population:
        if not self.populations:
            raise SimulationError("run produced no sealed population")
        return self.populations[-1]


class _Candidate(NamedTuple):
    slot: int
    theta: Theta | None  # None: rejected before simulation
    distance: float


def _generation_stream(master: RandomStream, generation: int,
                       slot: int) -> RandomStream:
    return master.substream(_CANDIDATES, generation, slot)


def _consume(process: Callable[[int], _Candidate], epsilon: float, m: int,
             budget: int, threads: int) -> tuple[list[_Candidate], int, bool]:
    """Run candidates in slot order until M acceptances or budget.

    Returns (accepted candidates, simulations consumed, completed flag).
    Speculative work beyond the stopping slot is discarded and not counted,
    so the outcome is identical for any thread count.
    """
    accepted: list[_Candidate] = []
    sims = 0
    cap = _PROPOSAL_CAP_FACTOR * max(budget, m)

    def handle(cand: _Candidate) -> bool:
        nonlocal sims
        if cand.theta is not None:
            sims += 1
            if cand.distance < epsilon:
                accepted.append(cand)
        return len(accepted) >= m or sims >= budget

    if threads <= 1:
        for slot in range(cap):
            if handle(process(slot)):
                break
    else:
        wave = max(8, 4 * threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = False
            for start in range(0, cap, wave):
                slots = range(start, min(start + wave, cap))
                for cand in pool.map(process, slots):
                    if handle(cand):
                        done = True
                        break
                if done:
                    break
    return accepted, sims, len(accepted) >= m


def run_smcabc(prior: PriorSpec, simulator: SimulatorConfig, source: Dataset,
               cfg: SmcConfig, threads: int = 1,
               initial: Sequence[Population] = (),
               initial_simulation_count: int = 0,
               on_generation: Callable[[Population, int], None] | None = None
               ) -> RunResult:
    """Infer the posterior over the simulator's parameters given the source.

    ``initial`` resumes from previously sealed populations; because every
    candidate's randomness is keyed by (master_seed, generation, slot), a
    resumed run finishes exactly like an uninterrupted one.
    """
    from .simulators import parameter_names
    declared = parameter_names(simulator)
    if declared and set(declared) != set(prior.names):
        raise ConfigurationError(
            f"prior parameters {sorted(prior.names)} do not match the "
            f"simulator's {sorted(declared)}")

    master = RandomStream(cfg.master_seed)
    standardizer = Standardizer.from_dataset(source) if cfg.distance.standardize \
        else None
    names = prior.names
    m = cfg.population_size
    budget = cfg.max_simulations_per_generation

    populations = list(initial)
    sim_count = initial_simulation_count

    def reference_for(generation: int) -> ProjectedReference:
        seed = master.substream(_PROJECTIONS, generation).stream_id
        dist_cfg = replace(cfg.distance, projection_seed=seed)
        return ProjectedReference(source, dist_cfg, standardizer)

    def simulate_candidate(theta: Theta, stream: RandomStream,
                           reference: ProjectedReference) -> float:
        generated = simulate(simulator, theta, stream)
        return reference.distance_to(generated.dataset)

    while len(populations) < cfg.max_generations:
        generation = len(populations)
        if populations:
            epsilon = float(np.quantile(populations[-1].distances,
                                        cfg.epsilon_quantile))
            if epsilon <= cfg.min_epsilon:
                return RunResult(tuple(populations), sim_count,
                                 "min_epsilon_reached")
        reference = reference_for(generation)

        if generation == 0:
            population, sims, complete = _initial_generation(
                prior, cfg, master, reference, simulate_candidate, threads)
        else:
            population, sims, complete = _perturbed_generation(
                prior, cfg, master, reference, simulate_candidate,
                populations[-1], generation, epsilon, threads)
        sim_count += sims
        if not complete:
            return RunResult(tuple(populations), sim_count, "budget_exhausted")
        populations.append(population)
        if on_generation is not None:
            on_generation(population, sim_count)

    return RunResult(tuple(populations), sim_count, "max_generations")


def _initial_generation(prior, cfg, master, reference, simulate_candidate,
                        threads):
    m = cfg.population_size
    pilot_n = 2 * m
    budget = max(cfg.max_simulations_per_generation, pilot_n)

    def pilot(slot: int) -> _Candidate:
        stream = _generation_stream(master, 0, slot)
        theta = sample_prior(prior, stream.substream(0))
        return _Candidate(slot, theta,
                          simulate_candidate(theta, stream.substream(1),
                                             reference))

    if threads <= 1:
        pilots = [pilot(k) for k in range(pilot_n)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pilots = list(pool.map(pilot, range(pilot_n)))
    epsilon = float(np.quantile([c.distance for c in pilots],
                                cfg.epsilon_quantile))

    accepted = [c for c in pilots if c.distance < epsilon][:m]
    sims = pilot_n
    if len(accepted) < m:
        extra, extra_sims, _ = _consume(
            lambda slot: pilot(slot + pilot_n), epsilon, m - len(accepted),
            budget - sims, threads)
        accepted.extend(extra)
        sims += extra_sims
    if len(accepted) < m:
        return None, sims, False

    thetas = np.array([[c.theta[n] for n in prior.names] for c in accepted])
    weights = np.full(m, 1.0 / m)
    distances = np.array([c.distance for c in accepted])
    return Population(0, epsilon, prior.names, thetas, weights, distances), \
        sims, True


def _perturbed_generation(prior, cfg, master, reference, simulate_candidate,
                          previous: Population, generation: int,
                          epsilon: float, threads: int):
    names = prior.names
    m = cfg.population_size
    free = list(prior.free_names)
    free_idx = [names.index(n) for n in free]
    pivot = prior.pivot

    prev_free = previous.thetas[:, free_idx]
    mean = previous.weights @ prev_free
    var = previous.weights @ (prev_free - mean) ** 2
    kernel_sd = np.sqrt(np.maximum(cfg.kernel_scale * var, _KERNEL_VAR_FLOOR))

    def propose(slot: int) -> _Candidate:
        stream = _generation_stream(master, generation, slot)
        gen = stream.substream(0).generator()
        parent = int(gen.choice(previous.size, p=previous.weights))
        free_vals = prev_free[parent] + kernel_sd * gen.standard_normal(
            len(free))
        theta = dict(zip(free, map(float, free_vals)))
        if pivot is not None:
            theta[pivot] = prior.solve_pivot(theta)
        theta = {n: theta[n] for n in names}
        if not prior.in_support(theta):
            return _Candidate(slot, None, np.inf)
        return _Candidate(slot, theta,
                          simulate_candidate(theta, stream.substream(1),
                                             reference))

    accepted, sims, complete = _consume(
        propose, epsilon, m, cfg.max_simulations_per_generation, threads)
    if not complete:
        return None, sims, False

    thetas = np.array([[c.theta[n] for n in names] for c in accepted])
    distances = np.array([c.distance for c in accepted])
    new_free = thetas[:, free_idx]
    # importance weight: uniform prior density over the kernel mixture
    diff = (new_free[:, None, :] - prev_free[None, :, :]) / kernel_sd
    log_k = -0.5 * np.sum(diff ** 2, axis=2) - np.sum(np.log(kernel_sd))
    log_k -= 0.5 * len(free) * np.log(2.0 * np.pi)
    mixture = np.exp(log_k) @ previous.weights
    weights = 1.0 / np.maximum(mixture, 1e-300)
    weights /= weights.sum()
    return Population(generation, epsilon, names, thetas, weights,
                      distances), sims, True


def emit_datasets(source_of_theta: Population | PriorSpec,
                  simulator: SimulatorConfig, count: int,
                  stream: RandomStream) -> list[GeneratedDataset]:
    """Generate ``count`` datasets from posterior or prior parameter draws."""
    if count < 1:
        raise ConfigurationError("emission count must be >= 1")
    out = []
    for i in range(count):
        sub = stream.substream(_EMISSION, i)
        if isinstance(source_of_theta, Population):
            gen = sub.substream(0).generator()
            idx = int(gen.choice(source_of_theta.size,
                                 p=source_of_theta.weights))
            theta = source_of_theta.theta_dict(idx)
        else:
            theta = sample_prior(source_of_theta, sub.substream(0))
        try:
            out.append(simulate(simulator, theta, sub.substream(1)))
        except Exception as exc:
            raise SimulationError(f"dataset {i} failed: {exc}") from exc
    return out
