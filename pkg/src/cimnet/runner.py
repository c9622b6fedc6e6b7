"""Experiment runner: JSON config in, deterministic CSV/JSONL artifacts out.

Every artifact is a pure function of (config, seeds): no timestamps, stable
row ordering, atomic write-then-rename.  All reported accuracies are PROXY
values (see cimnet.proxy).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .cim import ConfigSpace, config_to_json
from .encoding import Genome, GenomeCodec
from .proxy import ProxyParams, proxy_accuracy
from .search import (ParetoPoint, SearchHistory, SearchMode,
                     config_space_for, cycle_reduction_at_iso_accuracy,
                     evaluate_baseline, joint_search, make_cached_simulator,
                     make_setting, pareto_front)
from .workload import ArchSpace, Family, arch_space_from_json, default_space


class ConfigError(ValueError):
    """Malformed experiment config; carries the offending field."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"config field '{fieldname}': {message}")
        self.fieldname = fieldname


@dataclass
class ExperimentConfig:
    family: Family
    setting: SearchMode
    k: int = 5
    m: int = 2000
    n: int = 500
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "run"
    predictor: str = "ridge"
    eval_budget: int | None = None
    population: int = 100
    mutation_rate: float = 0.1
    proxy_ceiling: float = 0.82
    proxy_seed: int = 0
    compute_budget: float | None = None
    memory_budget_range: tuple[float, float] | None = None
    plot: bool = False
    arch_space_doc: dict | None = None

    def __post_init__(self) -> None:
        if self.k < 1 or self.n < 1 or self.m < self.n:
            raise ConfigError("k", "need k >= 1 and m >= n >= 1")
        budget = self.eval_budget if self.eval_budget is not None else self.k * self.n
        if self.k * self.n > budget:
            raise ConfigError(
                "eval_budget",
                f"k*n = {self.k * self.n} exceeds declared budget {budget}")
        if self.predictor not in ("ridge", "svr"):
            raise ConfigError("predictor", f"unknown kind {self.predictor!r}")


def _parse_enum(doc: Mapping, key: str, enum_cls):
    raw = doc.get(key)
    if raw is None:
        raise ConfigError(key, "missing required field")
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ConfigError(key, f"unknown value {raw!r}; expected one of "
                               f"{allowed}") from None


def experiment_config_from_doc(doc: Mapping) -> ExperimentConfig:
    family = _parse_enum(doc, "family", Family)
    setting = _parse_enum(doc, "setting", SearchMode)
    seeds = doc.get("seeds", doc.get("seed", 0))
    if isinstance(seeds, int):
        seeds = (seeds,)
    mem_range = doc.get("memory_budget_range")
    return ExperimentConfig(
        family=family,
        setting=setting,
        k=int(doc.get("k", 5)),
        m=int(doc.get("m", 2000)),
        n=int(doc.get("n", 500)),
        seeds=tuple(int(s) for s in seeds),
        out_dir=str(doc.get("out_dir", "run")),
        predictor=str(doc.get("predictor", "ridge")),
        eval_budget=doc.get("eval_budget"),
        population=int(doc.get("population", 100)),
        mutation_rate=float(doc.get("mutation_rate", 0.1)),
        proxy_ceiling=float(doc.get("proxy_ceiling", 0.82)),
        proxy_seed=int(doc.get("proxy_seed", 0)),
        compute_budget=doc.get("compute_budget"),
        memory_budget_range=tuple(mem_range) if mem_range else None,
        plot=bool(doc.get("plot", False)),
        arch_space_doc=doc.get("arch_space"),
    )


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError("path", str(e)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("json", f"line {e.lineno}, column {e.colno}: "
                                  f"{e.msg}") from None
    return experiment_config_from_doc(doc)


def genome_id(genome: Genome) -> str:
    return hashlib.sha256(bytes(genome)).hexdigest()[:12]


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _front_csv(front: list[ParetoPoint]) -> str:
    lines = ["genome_id,accuracy,cycles"]
    for p in front:
        lines.append(f"{genome_id(p.genome)},{p.accuracy:.6f},{int(p.cycles)}")
    return "\n".join(lines) + "\n"


def _spaces_for(config: ExperimentConfig) -> tuple[ArchSpace, ConfigSpace]:
    if config.arch_space_doc is not None:
        arch_space = arch_space_from_json(config.arch_space_doc)
        if arch_space.family is not config.family:
            raise ConfigError("arch_space", "family mismatch")
    else:
        arch_space = default_space(config.family)
    cfg_space = config_space_for(config.setting)
    overrides = {}
    if config.compute_budget is not None:
        overrides["compute_budget"] = config.compute_budget
    if config.memory_budget_range is not None:
        overrides["memory_budget_range"] = config.memory_budget_range
    if overrides:
        cfg_space = ConfigSpace(base=cfg_space.base,
                                ladders=cfg_space.ladders,
                                compute_budget=overrides.get(
                                    "compute_budget", cfg_space.compute_budget),
                                memory_budget_range=overrides.get(
                                    "memory_budget_range",
                                    cfg_space.memory_budget_range))
    return arch_space, cfg_space


def run_experiment(config: ExperimentConfig | str | Path) -> dict:
    """Execute the configured joint search and write all artifacts.

    Returns the summary document (also written as summary.json).
    """
    if not isinstance(config, ExperimentConfig):
        config = load_experiment_config(config)
    arch_space, cfg_space = _spaces_for(config)
    codec = GenomeCodec(arch_space, cfg_space)
    setting = make_setting(config.setting, arch_space)
    simulator = make_cached_simulator(arch_space)
    proxy_params = ProxyParams(ceiling=config.proxy_ceiling,
                               seed=config.proxy_seed)

    def oracle(subnet):
        return proxy_accuracy(subnet, proxy_params, arch_space)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    histories: dict[int, SearchHistory] = {}
    for seed in config.seeds:
        histories[seed] = joint_search(
            setting, codec, config.k, config.m, config.n, simulator, oracle,
            seed=seed, population=config.population,
            mutation_rate=config.mutation_rate,
            predictor_kind=config.predictor)

    baseline = evaluate_baseline(setting, simulator, oracle)
    all_points = [p for h in histories.values() for p in h.points]
    union_front = pareto_front(all_points)

    history_lines = []
    genome_lines = []
    eval_rows = ["seed,iteration,training_size,cycles_mape,cycles_tau,"
                 "accuracy_mape,accuracy_tau"]
    per_seed_summary = {}
    for seed in config.seeds:
        h = histories[seed]
        for rec in h.iterations:
            row = {"seed": seed, "iteration": rec.iteration,
                   "training_size": rec.training_size,
                   "n_new_true": rec.n_new_true}
            if rec.predictor_eval:
                row.update(rec.predictor_eval)
            history_lines.append(json.dumps(row))
            ev = rec.predictor_eval or {}
            eval_rows.append(",".join([
                str(seed), str(rec.iteration), str(rec.training_size),
                _fmt(ev.get("cycles_mape")), _fmt(ev.get("cycles_tau")),
                _fmt(ev.get("accuracy_mape")), _fmt(ev.get("accuracy_tau"))]))
        for p in h.points:
            genome_lines.append(json.dumps({
                "seed": seed, "id": genome_id(p.genome),
                "genome": list(p.genome), "accuracy": round(p.accuracy, 6),
                "cycles": p.cycles, "provenance": p.provenance.value}))
        try:
            reduction = cycle_reduction_at_iso_accuracy(h.front, baseline)
        except ValueError:
            reduction = None
        per_seed_summary[str(seed)] = {
            "front_size": len(h.front),
            "cycle_reduction_at_iso_accuracy": reduction,
        }

    try:
        union_reduction = cycle_reduction_at_iso_accuracy(union_front, baseline)
    except ValueError:
        union_reduction = None

    summary = {
        "family": config.family.value,
        "setting": config.setting.value,
        "k": config.k, "m": config.m, "n": config.n,
        "seeds": list(config.seeds),
        "predictor": config.predictor,
        "accuracy_metric": "proxy",
        "baseline": {"accuracy_proxy": round(baseline[0], 6),
                     "cycles": int(baseline[1]),
                     "config": config_to_json(setting.static_config)},
        "cycle_reduction_at_iso_accuracy": union_reduction,
        "per_seed": per_seed_summary,
        "front_size": len(union_front),
    }

    schema = codec.schema()
    schema["hash"] = codec.schema_hash()
    write_atomic(out / "front.csv", _front_csv(union_front))
    write_atomic(out / "history.jsonl", "\n".join(history_lines) + "\n")
    write_atomic(out / "genomes.jsonl", "\n".join(genome_lines) + "\n")
    write_atomic(out / "predictor_eval.csv", "\n".join(eval_rows) + "\n")
    write_atomic(out / "genome_schema.json",
                 json.dumps(schema, indent=2) + "\n")
    write_atomic(out / "summary.json",
                 json.dumps(summary, indent=2, sort_keys=True) + "\n")

    if config.plot:
        from .plots import pareto_figure, predictor_history_figure
        series = [(f"seed {seed}", histories[seed].front)
                  for seed in config.seeds]
        pareto_figure(series, baseline, out / "pareto_front.png")
        predictor_history_figure(histories, out / "predictor_eval.png")
    return summary


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"
