"""One-hot joint encoding of (sub-network, hardware configuration) choices.

A genome is a flat bit tuple: one segment per elastic architecture variable
(stage-major, depth before the per-block kernel/width pairs), followed by one
segment per hardware variable in the canonical field order.  CNN block
segments beyond the chosen stage depth are inactive and all-zero, which keeps
the genome length constant so regression predictors see a fixed input width.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .cim import (HW_FIELDS, ConfigSpace, HardwareConfig,
                  config_from_multipliers, config_multipliers, validate_config)
from .workload import ArchSpace, SubnetArch

Genome = tuple[int, ...]


class GenomeError(ValueError):
    """Malformed genome: wrong length or bad segment bit pattern."""


class BudgetViolationError(GenomeError):
    """The hardware part of a genome violates the configuration budgets."""


@dataclass(frozen=True)
class Segment:
    name: str
    kind: str           # "arch" or "hw"
    options: tuple
    offset: int
    stage: int = -1
    block: int = -1

    @property
    def length(self) -> int:
        return len(self.options)


class GenomeCodec:
    """Bijective encoder between (SubnetArch, HardwareConfig) and genomes."""

    def __init__(self, arch_space: ArchSpace, config_space: ConfigSpace):
        self.arch_space = arch_space
        self.config_space = config_space
        segments: list[Segment] = []
        offset = 0
        for var in arch_space.variables():
            segments.append(Segment(var.name, "arch", var.options, offset,
                                    stage=var.stage, block=var.block))
            offset += len(var.options)
        for f in HW_FIELDS:
            opts = config_space.ladder(f)
            segments.append(Segment(f, "hw", tuple(opts), offset))
            offset += len(opts)
        self.segments = tuple(segments)
        self.length = offset
        self._by_name = {s.name: s for s in self.segments}

    # -- schema ------------------------------------------------------------

    def schema(self) -> dict:
        return {
            "total_length": self.length,
            "segments": [
                {"name": s.name, "kind": s.kind, "offset": s.offset,
                 "options": list(s.options)}
                for s in self.segments
            ],
        }

    def schema_hash(self) -> str:
        blob = json.dumps(self.schema(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- encode / decode ----------------------------------------------------

    def _segment_active(self, seg: Segment, depths: tuple[int, ...]) -> bool:
        return seg.block < 0 or seg.block < depths[seg.stage]

    def encode(self, subnet: SubnetArch, cfg: HardwareConfig) -> Genome:
        self.arch_space.validate_subnet(subnet)
        arch_values = self.arch_space.subnet_values(subnet)
        hw_mult = config_multipliers(cfg, self.config_space.base)
        bits = [0] * self.length
        for seg in self.segments:
            if seg.kind == "arch":
                if not self._segment_active(seg, subnet.depths):
                    continue
                value = arch_values[seg.name]
            else:
                value = hw_mult[seg.name]
            idx = _option_index(seg, value)
            bits[seg.offset + idx] = 1
        return tuple(bits)

    def decode(self, genome: Genome) -> tuple[SubnetArch, HardwareConfig]:
        """Inverse of encode; the hardware part must pass validate_config."""
        values = self.values(genome)
        subnet = self.arch_space.build_subnet(
            {s.name: values[s.name] for s in self.segments
             if s.kind == "arch" and s.name in values})
        cfg = self._config_from_values(values)
        result = validate_config(cfg, self.config_space)
        if not result.ok:
            raise BudgetViolationError(
                "hardware part violates budget: " + "; ".join(result.violations))
        return subnet, cfg

    def values(self, genome: Genome) -> dict[str, object]:
        """Per-variable values of a genome, without the budget check.

        Inactive CNN block segments are reported at their canonical first
        option; a non-zero inactive segment or a zero/multi-hot active
        segment raises GenomeError.
        """
        if len(genome) != self.length:
            raise GenomeError(
                f"genome length {len(genome)} != schema length {self.length}")
        depths: list[int] = []
        values: dict[str, object] = {}
        for seg in self.segments:
            chunk = genome[seg.offset:seg.offset + seg.length]
            active = seg.kind == "hw" or seg.block < 0 or seg.block < depths[seg.stage]
            ones = [i for i, b in enumerate(chunk) if b == 1]
            if any(b not in (0, 1) for b in chunk):
                raise GenomeError(f"segment {seg.name} holds non-binary values")
            if active:
                if len(ones) != 1:
                    raise GenomeError(
                        f"segment {seg.name} must have exactly one bit set, "
                        f"got {len(ones)}")
                values[seg.name] = seg.options[ones[0]]
            else:
                if ones:
                    raise GenomeError(
                        f"inactive segment {seg.name} must be all-zero")
                values[seg.name] = seg.options[0]
            if seg.kind == "arch" and seg.name.endswith(".depth"):
                depths.append(int(values[seg.name]))  # type: ignore[arg-type]
        return values

    def _config_from_values(self, values: dict[str, object]) -> HardwareConfig:
        mult = {f: float(values[f]) for f in HW_FIELDS}  # type: ignore[arg-type]
        return config_from_multipliers(self.config_space.base, mult)

    # -- sampling and variation ---------------------------------------------

    def sample(self, seed: int) -> Genome:
        """A uniform valid genome (rejection-sampled hardware part)."""
        from .cim import sample_config
        from .workload import sample_subnet
        rng = np.random.default_rng(seed)
        subnet = sample_subnet(self.arch_space, int(rng.integers(2 ** 63)))
        cfg = sample_config(self.config_space, int(rng.integers(2 ** 63)))
        return self.encode(subnet, cfg)

    def _hw_valid(self, values: dict[str, object]) -> bool:
        return validate_config(self._config_from_values(values),
                               self.config_space).ok

    def _repair_hw(self, values: dict[str, object],
                   parent_values: dict[str, object],
                   rng: np.random.Generator, tries: int = 1000) -> None:
        """Re-sample the hardware segments until the budgets hold.

        Falls back to the parent's hardware segments when the bounded
        rejection loop fails.
        """
        if self._hw_valid(values):
            return
        ladders = [self.config_space.ladder(f) for f in HW_FIELDS]
        sizes = [len(l) for l in ladders]
        tried = 0
        while tried < tries:
            chunk = min(128, tries - tried)
            draws = rng.integers(0, sizes, size=(chunk, len(HW_FIELDS)))
            tried += chunk
            for row in draws:
                for f, ladder, idx in zip(HW_FIELDS, ladders, row):
                    values[f] = ladder[int(idx)]
                if self._hw_valid(values):
                    return
        for f in HW_FIELDS:
            values[f] = parent_values[f]

    def mutate(self, genome: Genome, rate: float, seed: int,
               frozen: frozenset[str] = frozenset()) -> Genome:
        """Re-draw each variable independently with probability `rate`.

        Hardware segments are repaired afterwards so the output always
        decodes; `frozen` names variables pinned by the search setting.
        """
        rng = np.random.default_rng(seed)
        values = self.values(genome)
        parent_values = dict(values)
        for seg in self.segments:
            if seg.name in frozen:
                continue
            if rng.random() < rate:
                values[seg.name] = seg.options[int(rng.integers(seg.length))]
        return self._rebuild(values, parent_values, rng)

    def crossover(self, a: Genome, b: Genome, seed: int,
                  frozen: frozenset[str] = frozenset()) -> Genome:
        """Pick each segment from a or b with probability 1/2, then repair."""
        rng = np.random.default_rng(seed)
        va = self.values(a)
        vb = self.values(b)
        values = {}
        for seg in self.segments:
            if seg.name in frozen:
                values[seg.name] = va[seg.name]
            else:
                values[seg.name] = va[seg.name] if rng.random() < 0.5 else vb[seg.name]
        return self._rebuild(values, va, rng)

    def _rebuild(self, values: dict[str, object],
                 parent_values: dict[str, object],
                 rng: np.random.Generator) -> Genome:
        subnet = self.arch_space.build_subnet(values)
        self._repair_hw(values, parent_values, rng)
        cfg = self._config_from_values(values)
        return self.encode(subnet, cfg)


def _option_index(seg: Segment, value) -> int:
    for i, opt in enumerate(seg.options):
        if opt == value or (isinstance(opt, float)
                            and abs(float(value) - opt) < 1e-12):
            return i
    raise GenomeError(f"value {value!r} not an option of segment {seg.name}")


def genomes_to_matrix(genomes: list[Genome]) -> np.ndarray:
    """Stack genomes into the float matrix regression predictors consume."""
    return np.asarray(genomes, dtype=float)
