"""NSGA-II joint search over (architecture, hardware) genomes.

The outer loop alternates predictor-screened evolutionary search with true
evaluation: each iteration screens a large corpus of M genomes using the
surrogate predictors, true-evaluates the best N, grows the training sets and
retrains, so after K iterations each predictor has seen K*N labeled samples.
Accuracy is maximized, cycle count minimized.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .cim import (HW_FIELDS, ConfigSpace, HardwareConfig, base_config,
                  config_from_multipliers, sample_config, simulate)
from .dataflow import DataflowInfeasibleError
from .encoding import Genome, GenomeCodec, genomes_to_matrix
from .predict import TargetTransform, fit_predictor, kendall_tau, mape
from .workload import ArchSpace, SubnetArch, lower_to_layers, sample_subnet

logger = logging.getLogger(__name__)

SENTINEL_CYCLES = 10 ** 12

# Normalized placements of the static reference configuration C_s.
STATIC_CONFIG_MULTIPLIERS = {
    "dram_bw": 0.125,
    "l2_bw": 0.25,
    "l1_bw": 0.25,
    "l1_num_child": 0.5,
    "ma_bw": 0.25,
    "ma_mem_size": 0.5,
    "ma_num_child": 0.5,
    "ma_comp_per_core": 0.5,
}


class SearchMode(str, Enum):
    ELASTIC_ARCH_STATIC_CFG = "elastic-arch-static-config"
    STATIC_ARCH_ELASTIC_CFG = "static-arch-elastic-config"
    ELASTIC_ARCH_ELASTIC_CFG = "elastic-arch-elastic-config"

    @property
    def arch_elastic(self) -> bool:
        return self is not SearchMode.STATIC_ARCH_ELASTIC_CFG

    @property
    def config_elastic(self) -> bool:
        return self is not SearchMode.ELASTIC_ARCH_STATIC_CFG


class Provenance(str, Enum):
    PREDICTED = "predicted"
    TRUE = "true"


@dataclass(frozen=True)
class ParetoPoint:
    genome: Genome
    accuracy: float
    cycles: float
    provenance: Provenance


@dataclass(frozen=True)
class SearchSetting:
    """Which side of the joint space varies, and the frozen side's defaults."""

    mode: SearchMode
    static_subnet: SubnetArch
    static_config: HardwareConfig

    def frozen_names(self, codec: GenomeCodec) -> frozenset[str]:
        names: set[str] = set()
        if not self.mode.arch_elastic:
            names.update(s.name for s in codec.segments if s.kind == "arch")
        if not self.mode.config_elastic:
            names.update(HW_FIELDS)
        return frozenset(names)


def static_config(base: HardwareConfig | None = None) -> HardwareConfig:
    """The static reference machine C_s (compute product 0.125)."""
    return config_from_multipliers(base or base_config(),
                                   STATIC_CONFIG_MULTIPLIERS)


def config_space_for(mode: SearchMode,
                     base: HardwareConfig | None = None) -> ConfigSpace:
    """Budget-constrained ladder for elastic-config runs.

    Static-config runs validate against a widened memory range because the
    pinned C_s machine sits below the elastic-search memory band.
    """
    base = base or base_config()
    if mode.config_elastic:
        return ConfigSpace(base=base)
    return ConfigSpace(base=base, memory_budget_range=(0.125, 0.5))


def make_setting(mode: SearchMode | str, arch_space: ArchSpace,
                 base: HardwareConfig | None = None) -> SearchSetting:
    mode = SearchMode(mode)
    base = base or base_config()
    return SearchSetting(mode=mode,
                         static_subnet=arch_space.canonical_subnet(),
                         static_config=static_config(base))


def sample_setting_genome(setting: SearchSetting, codec: GenomeCodec,
                          seed: int) -> Genome:
    """Random valid genome with the setting's frozen side pinned."""
    rng = np.random.default_rng(seed)
    if setting.mode.arch_elastic:
        subnet = sample_subnet(codec.arch_space, int(rng.integers(2 ** 63)))
    else:
        subnet = setting.static_subnet
    if setting.mode.config_elastic:
        cfg = sample_config(codec.config_space, int(rng.integers(2 ** 63)))
    else:
        cfg = setting.static_config
    return codec.encode(subnet, cfg)


# ---------------------------------------------------------------------------
# Non-dominated sorting and crowding


def non_dominated_sort(points: Sequence[tuple[float, float]]) -> list[list[int]]:
    """Rank (accuracy, cycles) points into fronts; accuracy up, cycles down.

    p dominates q iff acc_p >= acc_q and cyc_p <= cyc_q with one strict.
    """
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one point")
    acc = arr[:, 0]
    cyc = arr[:, 1]
    ge = acc[:, None] >= acc[None, :]
    le = cyc[:, None] <= cyc[None, :]
    strict = (acc[:, None] > acc[None, :]) | (cyc[:, None] < cyc[None, :])
    dom = ge & le & strict  # dom[i, j]: i dominates j
    n_dom = dom.sum(axis=0).astype(np.int64)
    fronts: list[list[int]] = []
    while True:
        current = np.where(n_dom == 0)[0]
        if current.size == 0:
            break
        fronts.append([int(i) for i in current])
        n_dom[current] = -1
        n_dom -= dom[current].sum(axis=0)
    return fronts


def crowding_distance(front: Sequence[tuple[float, float]]) -> list[float]:
    """Per-point crowding: boundary points infinite, interior normalized
    neighbor-gap sums per objective."""
    arr = np.asarray(front, dtype=float)
    n = len(arr)
    if n <= 2:
        return [math.inf] * n
    dist = np.zeros(n)
    for col in range(arr.shape[1]):
        vals = arr[:, col]
        order = np.argsort(vals, kind="stable")
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = float(vals[order[-1]] - vals[order[0]])
        if span > 0:
            gaps = (vals[order[2:]] - vals[order[:-2]]) / span
            dist[order[1:-1]] += gaps
    return [float(d) for d in dist]


def select_top_n(pool: Sequence[tuple[Genome, float, float]],
                 n: int) -> list[tuple[Genome, float, float]]:
    """Best n by non-dominated rank, then crowding, then genome order."""
    if n > len(pool):
        raise ValueError(f"cannot select {n} from pool of {len(pool)}")
    objs = [(acc, cyc) for _, acc, cyc in pool]
    fronts = non_dominated_sort(objs)
    rank = [0] * len(pool)
    crowd = [0.0] * len(pool)
    for r, front in enumerate(fronts):
        cds = crowding_distance([objs[i] for i in front])
        for i, d in zip(front, cds):
            rank[i] = r
            crowd[i] = d
    order = sorted(range(len(pool)),
                   key=lambda i: (rank[i], -crowd[i], pool[i][0]))
    return [pool[i] for i in order[:n]]


# ---------------------------------------------------------------------------
# Predictor-screened NSGA-II


def nsga2_screen(setting: SearchSetting, codec: GenomeCodec, predictors,
                 m: int, seed: int, population: int = 100,
                 mutation_rate: float = 0.1, max_stagnation: int = 30,
                 ) -> list[tuple[Genome, float, float]]:
    """Evolve genomes under predicted objectives until m uniques are evaluated.

    `predictors` is an (accuracy model, cycles model) pair, each exposing
    predict(X).  Returns every evaluated genome with its predicted
    objectives; if the constrained space holds fewer than m uniques the
    exhausted set is returned with a warning.
    """
    if m < population:
        raise ValueError("m must be at least the population size")
    rng = np.random.default_rng(seed)
    frozen = setting.frozen_names(codec)
    acc_model, cyc_model = predictors

    def predict_batch(genomes: list[Genome]):
        X = genomes_to_matrix(genomes)
        return acc_model.predict(X), cyc_model.predict(X)

    evaluated: dict[Genome, tuple[float, float]] = {}

    pop: list[Genome] = []
    seen: set[Genome] = set()
    tries = 0
    while len(pop) < population and tries < 50 * population:
        g = sample_setting_genome(setting, codec, int(rng.integers(2 ** 63)))
        tries += 1
        if g not in seen:
            seen.add(g)
            pop.append(g)
    while len(pop) < population:  # tiny constrained spaces: repeat to fill
        pop.append(pop[len(pop) % len(seen)])

    fresh = list(dict.fromkeys(pop))
    acc, cyc = predict_batch(fresh)
    for g, a, c in zip(fresh, acc, cyc):
        if len(evaluated) < m:
            evaluated[g] = (float(a), float(c))

    stagnation = 0
    while len(evaluated) < m and stagnation < max_stagnation:
        objs = [evaluated[g] for g in pop]
        fronts = non_dominated_sort(objs)
        rank = [0] * len(pop)
        crowd = [0.0] * len(pop)
        for r, front in enumerate(fronts):
            cds = crowding_distance([objs[i] for i in front])
            for i, d in zip(front, cds):
                rank[i] = r
                crowd[i] = d

        def tournament() -> Genome:
            i = int(rng.integers(len(pop)))
            j = int(rng.integers(len(pop)))
            if (rank[i], -crowd[i]) <= (rank[j], -crowd[j]):
                return pop[i]
            return pop[j]

        offspring = []
        for _ in range(population):
            child = codec.crossover(tournament(), tournament(),
                                    int(rng.integers(2 ** 63)), frozen=frozen)
            child = codec.mutate(child, mutation_rate,
                                 int(rng.integers(2 ** 63)), frozen=frozen)
            offspring.append(child)

        fresh = [g for g in dict.fromkeys(offspring) if g not in evaluated]
        if fresh:
            acc, cyc = predict_batch(fresh)
            added = 0
            for g, a, c in zip(fresh, acc, cyc):
                if len(evaluated) >= m:
                    break
                evaluated[g] = (float(a), float(c))
                added += 1
            stagnation = 0 if added else stagnation + 1
        else:
            stagnation += 1
        if len(evaluated) >= m:
            break

        combined = list(dict.fromkeys(pop + [g for g in offspring
                                             if g in evaluated]))
        objs = [evaluated[g] for g in combined]
        fronts = non_dominated_sort(objs)
        next_pop: list[Genome] = []
        for front in fronts:
            members = [combined[i] for i in front]
            if len(next_pop) + len(members) <= population:
                next_pop.extend(members)
            else:
                cds = crowding_distance([objs[i] for i in front])
                order = sorted(range(len(front)),
                               key=lambda k: (-cds[k], members[k]))
                next_pop.extend(members[k]
                                for k in order[:population - len(next_pop)])
                break
        while len(next_pop) < population:
            next_pop.append(next_pop[len(next_pop) % max(1, len(combined))])
        pop = next_pop

    if len(evaluated) < m:
        logger.warning("screen exhausted the constrained space at %d of %d "
                       "unique genomes", len(evaluated), m)
    return [(g, a, c) for g, (a, c) in evaluated.items()]


# ---------------------------------------------------------------------------
# Outer loop


@dataclass
class IterationRecord:
    iteration: int
    training_size: int
    n_new_true: int
    predictor_eval: dict[str, float | None] | None = None


@dataclass
class SearchHistory:
    mode: str
    iterations: list[IterationRecord] = field(default_factory=list)
    points: list[ParetoPoint] = field(default_factory=list)
    front: list[ParetoPoint] = field(default_factory=list)


def make_cached_simulator(arch_space: ArchSpace,
                          ) -> Callable[[SubnetArch, HardwareConfig], int]:
    """End-to-end cycle evaluator memoized on (subnet, config)."""
    cache: dict[tuple, int] = {}

    def simulator(subnet: SubnetArch, cfg: HardwareConfig) -> int:
        key = (subnet.key(), cfg.values())
        if key not in cache:
            layers = lower_to_layers(subnet, arch_space)
            cache[key] = simulate(layers, cfg).total_cycles
        return cache[key]

    return simulator


def joint_search(setting: SearchSetting, codec: GenomeCodec, k: int, m: int,
                 n: int,
                 simulator: Callable[[SubnetArch, HardwareConfig], int],
                 accuracy_oracle: Callable[[SubnetArch], float], seed: int,
                 population: int = 100, mutation_rate: float = 0.1,
                 predictor_kind: str = "ridge", ridge_lambda: float = 1.0,
                 ) -> SearchHistory:
    """K iterations of screen / true-evaluate / retrain; returns the history
    and the final TRUE Pareto front.

    Infeasible genomes receive sentinel objectives (accuracy 0, cycles twice
    the worst observed) instead of aborting the run.
    """
    if k < 1 or n < 1 or m < n:
        raise ValueError("need k >= 1 and m >= n >= 1")
    rng = np.random.default_rng(seed)
    history = SearchHistory(mode=setting.mode.value)

    true_eval: dict[Genome, tuple[float, float]] = {}
    worst_cycles = 0

    def true_evaluate(genome: Genome) -> tuple[float, float]:
        nonlocal worst_cycles
        if genome in true_eval:
            return true_eval[genome]
        subnet, cfg = codec.decode(genome)
        try:
            cycles = float(simulator(subnet, cfg))
            accuracy = float(accuracy_oracle(subnet))
        except DataflowInfeasibleError:
            cycles = float(2 * worst_cycles) if worst_cycles else float(
                SENTINEL_CYCLES)
            accuracy = 0.0
        worst_cycles = max(worst_cycles, int(cycles))
        true_eval[genome] = (accuracy, cycles)
        return true_eval[genome]

    train_genomes: list[Genome] = []
    train_acc: list[float] = []
    train_cyc: list[float] = []
    models = None

    for it in range(1, k + 1):
        if it == 1 or models is None:
            batch: list[Genome] = []
            seen: set[Genome] = set()
            tries = 0
            while len(batch) < n and tries < 50 * n:
                g = sample_setting_genome(setting, codec,
                                          int(rng.integers(2 ** 63)))
                tries += 1
                if g not in seen:
                    seen.add(g)
                    batch.append(g)
            while len(batch) < n:
                batch.append(batch[len(batch) % len(seen)])
        else:
            screened = nsga2_screen(setting, codec, models, m,
                                    seed=int(rng.integers(2 ** 63)),
                                    population=population,
                                    mutation_rate=mutation_rate)
            # spend the true-evaluation budget on genomes not yet measured
            fresh = [e for e in screened if e[0] not in true_eval]
            take = min(n, len(fresh))
            batch = [g for g, _, _ in select_top_n(fresh, take)] if take else []
            seen = set(batch) | set(true_eval)
            tries = 0
            while len(batch) < n and tries < 50 * n:
                g = sample_setting_genome(setting, codec,
                                          int(rng.integers(2 ** 63)))
                tries += 1
                if g not in seen:
                    seen.add(g)
                    batch.append(g)
            if len(batch) < n:  # exhausted space: repeat the best picks
                fill = batch or [g for g, _, _ in
                                 select_top_n(screened, min(n, len(screened)))]
                while len(batch) < n:
                    batch.append(fill[len(batch) % len(fill)])

        evals: dict[str, float | None] | None = None
        known_before = len(true_eval)
        truths = [true_evaluate(g) for g in batch]
        new_true = len(true_eval) - known_before
        if models is not None:
            X = genomes_to_matrix(batch)
            pred_acc = models[0].predict(X)
            pred_cyc = models[1].predict(X)
            true_acc = np.array([t[0] for t in truths])
            true_cyc = np.array([t[1] for t in truths])
            evals = {
                "cycles_mape": _safe_mape(true_cyc, pred_cyc),
                "cycles_tau": _safe_tau(true_cyc, pred_cyc),
                "accuracy_mape": _safe_mape(true_acc, pred_acc),
                "accuracy_tau": _safe_tau(true_acc, pred_acc),
            }

        train_genomes.extend(batch)
        train_acc.extend(t[0] for t in truths)
        train_cyc.extend(t[1] for t in truths)

        X_train = genomes_to_matrix(train_genomes)
        acc_model = fit_predictor(predictor_kind, X_train,
                                  np.array(train_acc), lam=ridge_lambda,
                                  transform=TargetTransform.IDENTITY,
                                  seed=seed + it)
        cyc_model = fit_predictor(predictor_kind, X_train,
                                  np.array(train_cyc), lam=ridge_lambda,
                                  transform=TargetTransform.LOG,
                                  seed=seed + it)
        models = (acc_model, cyc_model)

        history.iterations.append(IterationRecord(
            iteration=it, training_size=len(train_genomes),
            n_new_true=new_true, predictor_eval=evals))

    history.points = [ParetoPoint(g, acc, cyc, Provenance.TRUE)
                      for g, (acc, cyc) in true_eval.items()]
    history.front = pareto_front(history.points)
    return history


def _safe_mape(y_true: np.ndarray, y_pred: np.ndarray) -> float | None:
    try:
        return mape(y_true, y_pred)
    except ValueError:
        return None


def _safe_tau(y_true: np.ndarray, y_pred: np.ndarray) -> float | None:
    try:
        return kendall_tau(y_true, y_pred)
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# Pareto analysis


def pareto_front(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """First non-dominated front of TRUE points, sorted by cycles ascending.

    Points with identical objectives are reported once (first occurrence).
    """
    if not points:
        raise ValueError("need at least one point")
    for p in points:
        if p.provenance is not Provenance.TRUE:
            raise ValueError("pareto_front only accepts TRUE points")
    fronts = non_dominated_sort([(p.accuracy, p.cycles) for p in points])
    best = [points[i] for i in fronts[0]]
    seen: set[tuple[float, float]] = set()
    unique = []
    for p in sorted(best, key=lambda p: (p.cycles, p.accuracy, p.genome)):
        key = (p.accuracy, p.cycles)
        if key not in seen:
            seen.add(key)
            unique.append(p)
    return unique


def cycle_reduction_at_iso_accuracy(front: Sequence[ParetoPoint],
                                    baseline: tuple[float, float]) -> float:
    """Baseline cycles over the front's (interpolated) cycles at the baseline
    accuracy level."""
    if not front:
        raise ValueError("front must be non-empty")
    base_acc, base_cycles = baseline
    pts = sorted(front, key=lambda p: p.cycles)
    qualifying = [i for i, p in enumerate(pts) if p.accuracy >= base_acc]
    if not qualifying:
        raise ValueError("front entirely below baseline accuracy")
    i = qualifying[0]
    if i == 0 or pts[i].accuracy == base_acc:
        iso_cycles = pts[i].cycles
    else:
        lo, hi = pts[i - 1], pts[i]
        t = (base_acc - lo.accuracy) / (hi.accuracy - lo.accuracy)
        iso_cycles = lo.cycles + t * (hi.cycles - lo.cycles)
    return base_cycles / iso_cycles


def hypervolume(points: Iterable[tuple[float, float]],
                ref: tuple[float, float]) -> float:
    """Dominated (accuracy x cycles) area against a reference corner.

    Accuracy is maximized and cycles minimized, so a point covers the region
    of lower accuracy and higher cycles between itself and the reference.
    """
    acc_ref, cyc_ref = ref
    pts = [(a, c) for a, c in points if a > acc_ref and c < cyc_ref]
    if not pts:
        return 0.0
    fronts = non_dominated_sort(pts)
    front = sorted({pts[i] for i in fronts[0]}, key=lambda p: p[1])
    hv = 0.0
    for idx, (a, c) in enumerate(front):
        next_c = front[idx + 1][1] if idx + 1 < len(front) else cyc_ref
        hv += (a - acc_ref) * (next_c - c)
    return hv


def evaluate_baseline(setting: SearchSetting,
                      simulator: Callable[[SubnetArch, HardwareConfig], int],
                      accuracy_oracle: Callable[[SubnetArch], float],
                      ) -> tuple[float, float]:
    """(accuracy, cycles) of the canonical architecture on the C_s machine."""
    acc = float(accuracy_oracle(setting.static_subnet))
    cycles = float(simulator(setting.static_subnet, setting.static_config))
    return acc, cycles


def labeled_pool(setting: SearchSetting, codec: GenomeCodec, size: int,
                 seed: int,
                 simulator: Callable[[SubnetArch, HardwareConfig], int],
                 accuracy_oracle: Callable[[SubnetArch], float],
                 ) -> tuple[list[Genome], np.ndarray, np.ndarray]:
    """Random genomes labeled with true (accuracy, cycles); duplicates allowed."""
    rng = np.random.default_rng(seed)
    genomes = [sample_setting_genome(setting, codec,
                                     int(rng.integers(2 ** 63)))
               for _ in range(size)]
    acc = []
    cyc = []
    for g in genomes:
        subnet, cfg = codec.decode(g)
        acc.append(float(accuracy_oracle(subnet)))
        cyc.append(float(simulator(subnet, cfg)))
    return genomes, np.asarray(acc), np.asarray(cyc)
