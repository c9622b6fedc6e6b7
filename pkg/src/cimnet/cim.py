"""Hardware configuration space and the analytical cycle model.

The machine is a tree: DRAM -> one L2 decoder -> `l1_num_child` L1 decoders ->
`ma_num_child` memory arrays per L1 decoder.  Each memory array owns a compute
core issuing `ma_comp_per_core` MACs per cycle.  Layer latency is a
perfect-overlap roofline: the maximum over per-resource demand/capacity
ratios, with DRAM and L2 broadcasting shared operands once and L1 links
carrying per-node bytes (multicast replication included).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .workload import LayerSpec

# Elastic hardware variables, in the order used everywhere (genome layout,
# JSON, CSV columns).
HW_FIELDS = (
    "dram_bw",
    "l2_bw",
    "l1_bw",
    "l1_num_child",
    "ma_bw",
    "ma_mem_size",
    "ma_num_child",
    "ma_comp_per_core",
)

LADDER = (0.125, 0.25, 0.5, 1.0)

LEVELS = ("dram", "l2", "l1", "ma")

# Tie-break priority when several resources bind at the same cycle count.
RESOURCES = ("COMPUTE", "MA", "L1", "L2", "DRAM")


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class InfeasibleConfigSpaceError(RuntimeError):
    """The budget constraints admit no ladder combination."""


@dataclass(frozen=True)
class HardwareConfig:
    """Absolute values of the eight elastic hardware variables.

    Bandwidths are bytes/cycle, ma_mem_size is bytes, ma_comp_per_core is
    MACs/cycle, the *_num_child fields are counts.
    """

    dram_bw: int
    l2_bw: int
    l1_bw: int
    l1_num_child: int
    ma_bw: int
    ma_mem_size: int
    ma_num_child: int
    ma_comp_per_core: int

    def __post_init__(self) -> None:
        for name in HW_FIELDS:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def node_count(self) -> int:
        return self.l1_num_child * self.ma_num_child

    @property
    def macs_per_cycle(self) -> int:
        return self.node_count * self.ma_comp_per_core

    def scaled(self, **fields: int) -> "HardwareConfig":
        return replace(self, **fields)

    def values(self) -> tuple[int, ...]:
        return tuple(getattr(self, f) for f in HW_FIELDS)


def base_config() -> HardwareConfig:
    """The 1.0x reference machine every ladder multiplier applies to."""
    return HardwareConfig(
        dram_bw=64,
        l2_bw=128,
        l1_bw=32,
        l1_num_child=16,
        ma_bw=16,
        ma_mem_size=64 * 1024,
        ma_num_child=16,
        ma_comp_per_core=128,
    )


def config_from_multipliers(base: HardwareConfig,
                            multipliers: Mapping[str, float]) -> HardwareConfig:
    values = {f: int(round(getattr(base, f) * multipliers[f])) for f in HW_FIELDS}
    return HardwareConfig(**values)


def config_multipliers(cfg: HardwareConfig,
                       base: HardwareConfig) -> dict[str, float]:
    return {f: getattr(cfg, f) / getattr(base, f) for f in HW_FIELDS}


@dataclass(frozen=True)
class ConfigSpace:
    """Ladder of allowed multipliers per field plus the resource budgets.

    The compute budget constrains the normalized product
    l1_num_child * ma_num_child * ma_comp_per_core exactly; the memory budget
    bounds l1_num_child * ma_num_child * ma_mem_size to a closed range.
    """

    base: HardwareConfig
    ladders: tuple[tuple[float, ...], ...] = tuple(LADDER for _ in HW_FIELDS)
    compute_budget: float = 0.125
    memory_budget_range: tuple[float, float] = (0.25, 0.5)

    def __post_init__(self) -> None:
        if len(self.ladders) != len(HW_FIELDS):
            raise ValueError("need one ladder per hardware field")
        lo, hi = self.memory_budget_range
        if lo > hi:
            raise ValueError("memory_budget_range must be ordered")
        if not self._compute_budget_attainable():
            raise InfeasibleConfigSpaceError(
                f"compute budget {self.compute_budget} unreachable on ladder")

    def _compute_budget_attainable(self) -> bool:
        for a in self.ladder("l1_num_child"):
            for b in self.ladder("ma_num_child"):
                for c in self.ladder("ma_comp_per_core"):
                    if math.isclose(a * b * c, self.compute_budget,
                                    rel_tol=1e-12):
                        return True
        return False

    def ladder(self, fieldname: str) -> tuple[float, ...]:
        return self.ladders[HW_FIELDS.index(fieldname)]


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()


def _on_ladder(mult: float, ladder: Sequence[float]) -> bool:
    return any(math.isclose(mult, r, rel_tol=1e-12) for r in ladder)


def validate_config(cfg: HardwareConfig, space: ConfigSpace) -> ValidationResult:
    """Check the ladder membership and both resource budgets; never raises."""
    violations: list[str] = []
    mult = config_multipliers(cfg, space.base)
    for f in HW_FIELDS:
        if not _on_ladder(mult[f], space.ladder(f)):
            violations.append(f"{f}: multiplier {mult[f]:g} off ladder")
    compute = mult["l1_num_child"] * mult["ma_num_child"] * mult["ma_comp_per_core"]
    if not math.isclose(compute, space.compute_budget, rel_tol=1e-12):
        violations.append(
            f"compute product {compute:g} != budget {space.compute_budget:g}")
    memory = mult["l1_num_child"] * mult["ma_num_child"] * mult["ma_mem_size"]
    lo, hi = space.memory_budget_range
    if not (lo - 1e-12 <= memory <= hi + 1e-12):
        violations.append(
            f"memory product {memory:g} outside [{lo:g}, {hi:g}]")
    return ValidationResult(ok=not violations, violations=tuple(violations))


def _budgets_attainable(space: ConfigSpace) -> bool:
    lo, hi = space.memory_budget_range
    for a in space.ladder("l1_num_child"):
        for b in space.ladder("ma_num_child"):
            for c in space.ladder("ma_comp_per_core"):
                if not math.isclose(a * b * c, space.compute_budget,
                                    rel_tol=1e-12):
                    continue
                for mem in space.ladder("ma_mem_size"):
                    if lo - 1e-12 <= a * b * mem <= hi + 1e-12:
                        return True
    return False


def sample_config(space: ConfigSpace, seed: int,
                  max_tries: int = 200_000) -> HardwareConfig:
    """Rejection-sample a budget-satisfying config, uniform over the valid set."""
    if not _budgets_attainable(space):
        raise InfeasibleConfigSpaceError(
            "compute and memory budgets admit no ladder combination")
    rng = np.random.default_rng(seed)
    ladders = [space.ladder(f) for f in HW_FIELDS]
    sizes = [len(l) for l in ladders]
    tried = 0
    while tried < max_tries:
        chunk = min(256, max_tries - tried)
        draws = rng.integers(0, sizes, size=(chunk, len(HW_FIELDS)))
        tried += chunk
        for row in draws:
            mult = {f: ladder[int(i)]
                    for f, ladder, i in zip(HW_FIELDS, ladders, row)}
            cfg = config_from_multipliers(space.base, mult)
            if validate_config(cfg, space).ok:
                return cfg
    raise InfeasibleConfigSpaceError(
        "no valid configuration found; constrained subset may be empty")


def config_to_json(cfg: HardwareConfig,
                   base: HardwareConfig | None = None) -> dict:
    base = base or base_config()
    mult = config_multipliers(cfg, base)
    return {f: {"value": getattr(cfg, f), "multiplier": mult[f]}
            for f in HW_FIELDS}


def config_from_json(doc: Mapping) -> HardwareConfig:
    if all(isinstance(doc[f], Mapping) for f in HW_FIELDS):
        return HardwareConfig(**{f: int(doc[f]["value"]) for f in HW_FIELDS})
    return HardwareConfig(**{f: int(doc[f]) for f in HW_FIELDS})


# ---------------------------------------------------------------------------
# Cycle model


@dataclass(frozen=True)
class LayerResult:
    """Roofline outcome of one layer under one dataflow."""

    cycles: int
    binding: str
    terms: tuple[int, int, int, int, int]   # aligned with RESOURCES
    bytes_by_level: tuple[int, int, int, int]  # aligned with LEVELS


@dataclass
class CycleReport:
    """Per-layer cycles plus byte totals at every hierarchy level."""

    total_cycles: int
    per_layer: list[tuple[str, int, str, tuple[int, int, int, int]]]
    total_bytes: dict[str, int]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("layer,cycles,binding," +
                  ",".join(f"{lv}_bytes" for lv in LEVELS) + "\n")
        for name, cycles, binding, level_bytes in self.per_layer:
            buf.write(f"{name},{cycles},{binding}," +
                      ",".join(str(v) for v in level_bytes) + "\n")
        return buf.getvalue()


def _decoder_layout(spatial: tuple[int, int, int, int], ma_num_child: int,
                    active: int) -> tuple[list[int], list[int], int]:
    """Place active nodes and reduction groups onto L1 decoders.

    Nodes are indexed with the Ic split fastest-varying and packed densely,
    `ma_num_child` per decoder.  A reduction group (fixed g, i, o slice)
    therefore occupies `sic` consecutive node slots; a group contained in one
    decoder reduces locally, otherwise its partials cross L2.  Returns per
    occupied decoder the child count and local reduction-group count, plus
    the number of decoder-crossing groups.
    """
    sic = spatial[3]
    occupied = _ceil_div(active, ma_num_child)
    children = [min(ma_num_child, active - d * ma_num_child)
                for d in range(occupied)]
    local = [0] * occupied
    crossing = 0
    if sic > 1:
        groups = active // sic
        for k in range(groups):
            first = (k * sic) // ma_num_child
            last = (k * sic + sic - 1) // ma_num_child
            if first == last:
                local[first] += 1
            else:
                crossing += 1
    return children, local, crossing


def spatial_cycle_terms(layer: LayerSpec, cfg: HardwareConfig,
                        spatial: tuple[int, int, int, int]) -> LayerResult:
    """Evaluate the five roofline terms of a spatial split.

    COMPUTE  ceil(MACs / (active nodes * ma_comp_per_core))
    MA       per-node (IFM + W + OFM tile bytes) / ma_bw, worst node
    L1       per-decoder child traffic (replication included) plus local
             reduction traffic, worst decoder
    L2       unique layer bytes plus reduction traffic crossing decoders
    DRAM     unique layer bytes (multicast counted once)
    """
    sg, si, so, sic = spatial
    b = layer.elem_bytes
    gn = _ceil_div(layer.G, sg)
    inn = _ceil_div(layer.I, si)
    ocn = _ceil_div(layer.Oc, so)
    icn = _ceil_div(layer.Ic, sic)

    ifm_n = gn * inn * icn * b
    w_n = gn * icn * ocn * b
    ofm_n = gn * inn * ocn * b
    node_bytes = ifm_n + w_n + ofm_n
    active = sg * si * so * sic

    unique = (layer.G * layer.I * layer.Ic + layer.G * layer.Ic * layer.Oc
              + layer.G * layer.I * layer.Oc) * b

    compute = _ceil_div(layer.macs, active * cfg.ma_comp_per_core)
    ma = _ceil_div(node_bytes, cfg.ma_bw)
    dram = _ceil_div(unique, cfg.dram_bw)

    children, local, crossing = _decoder_layout(spatial, cfg.ma_num_child,
                                                active)
    red_per_group = (sic - 1) * ofm_n
    l2_traffic = unique + crossing * red_per_group
    l1 = max(_ceil_div(c * node_bytes + nloc * red_per_group, cfg.l1_bw)
             for c, nloc in zip(children, local))
    l2 = _ceil_div(l2_traffic, cfg.l2_bw)

    terms = (compute, ma, l1, l2, dram)
    cycles = max(terms)
    binding = RESOURCES[terms.index(cycles)]

    ma_total = active * node_bytes
    l1_total = ma_total + sum(local) * red_per_group
    bytes_by_level = (unique, l2_traffic, l1_total, ma_total)
    return LayerResult(cycles=cycles, binding=binding, terms=terms,
                       bytes_by_level=bytes_by_level)


def simulate_layer(layer: LayerSpec, cfg: HardwareConfig,
                   df) -> LayerResult:
    """Roofline cycles of one layer under an explicit dataflow.

    Raises DataflowInfeasibleError when the dataflow violates the node budget
    or its temporal chunks overflow the memory-array capacity.
    """
    from .dataflow import check_feasible  # local import avoids a cycle

    check_feasible(layer, cfg, df)
    return spatial_cycle_terms(layer, cfg, df.spatial)


def simulate(layers: Sequence[LayerSpec], cfg: HardwareConfig,
             compiler: Callable[[LayerSpec, HardwareConfig], object] | None = None,
             ) -> CycleReport:
    """Compile and simulate each layer sequentially; no inter-layer overlap."""
    if compiler is None:
        from .dataflow import compile_dataflow
        compiler = compile_dataflow
    per_layer = []
    totals = {lv: 0 for lv in LEVELS}
    total_cycles = 0
    for layer in layers:
        df = compiler(layer, cfg)
        res = simulate_layer(layer, cfg, df)
        per_layer.append((layer.name, res.cycles, res.binding,
                          res.bytes_by_level))
        for lv, nbytes in zip(LEVELS, res.bytes_by_level):
            totals[lv] += nbytes
        total_cycles += res.cycles
    return CycleReport(total_cycles=total_cycles, per_layer=per_layer,
                       total_bytes=totals)
