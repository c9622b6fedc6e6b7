"""Per-layer dataflow compiler: spatial partitioning plus temporal chunking.

A layer's work is first divided spatially across memory-array nodes (the G
dimension is chunked first, up to the node count), then each node's tile is
cut into temporal chunks small enough to double-buffer inside the array
memory.  The compiler sweeps the power-of-two factor ladder and returns the
cycle-minimal feasible option under a total tie-break, so results are
deterministic and independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from .cim import HardwareConfig, spatial_cycle_terms
from .workload import LayerSpec

Factors = tuple[int, int, int, int]  # order (G, I, Oc, Ic)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class DataflowInfeasibleError(RuntimeError):
    """No temporal chunking fits the layer into the memory arrays."""


@dataclass(frozen=True)
class Dataflow:
    """Spatial split factors and per-node temporal chunk counts for one layer."""

    spatial: Factors
    temporal: Factors

    @property
    def active_nodes(self) -> int:
        sg, si, so, sic = self.spatial
        return sg * si * so * sic

    @property
    def temporal_steps(self) -> int:
        tg, ti, to, tic = self.temporal
        return tg * ti * to * tic

    def to_json(self) -> dict:
        return {"spatial": {"g": self.spatial[0], "i": self.spatial[1],
                            "oc": self.spatial[2], "ic": self.spatial[3]},
                "temporal": {"g": self.temporal[0], "i": self.temporal[1],
                             "oc": self.temporal[2], "ic": self.temporal[3]}}


@dataclass(frozen=True)
class TileOption:
    """One enumerated dataflow with its simulated latency."""

    dataflow: Dataflow
    cycles: int
    binding: str

    def __post_init__(self) -> None:
        if self.cycles <= 0:
            raise ValueError("cycles must be positive")


def working_set_bytes(layer: LayerSpec, spatial: Factors,
                      temporal: Factors) -> int:
    """Bytes one temporal step must hold, doubled for double-buffering.

    The chunk spans ceil(G/sg/tg) groups; per group it holds an IFM slice of
    (I/si/ti)x(Ic/sic/tic), a weight slice of (Ic/sic/tic)x(Oc/so/to) and an
    OFM slice of (I/si/ti)x(Oc/so/to).
    """
    sg, si, so, sic = spatial
    tg, ti, to, tic = temporal
    gc = _ceil_div(_ceil_div(layer.G, sg), tg)
    ic_ = _ceil_div(_ceil_div(layer.I, si), ti)
    oc_ = _ceil_div(_ceil_div(layer.Oc, so), to)
    icc = _ceil_div(_ceil_div(layer.Ic, sic), tic)
    per_group = ic_ * icc + icc * oc_ + ic_ * oc_
    return 2 * gc * per_group * layer.elem_bytes


def _pow2_upto(limit: int) -> list[int]:
    out = [1]
    while out[-1] * 2 <= limit:
        out.append(out[-1] * 2)
    return out


@lru_cache(maxsize=4096)
def _chunk_counts(extent: int) -> tuple[int, ...]:
    """Power-of-two chunk counts, deduplicated by resulting chunk size, down
    to single-element chunks."""
    counts = []
    c = 1
    prev_size = None
    while True:
        size = _ceil_div(extent, c)
        if size != prev_size:
            counts.append(c)
            prev_size = size
        if size == 1:
            return tuple(counts)
        c *= 2


def enumerate_spatial_tiles(layer: LayerSpec,
                            cfg: HardwareConfig) -> list[Factors]:
    """All (sg, si, so, sic) splits on the factor ladder.

    sg is fixed first to min(G, node count) (G-first rule: group parallelism
    needs no multicast or reduction); the remaining dimensions sweep clipped
    powers of two subject to the node budget.
    """
    nodes = cfg.node_count
    sg = min(layer.G, nodes)
    budget = nodes // sg
    tiles = []
    for si in _pow2_upto(min(layer.I, budget)):
        for so in _pow2_upto(min(layer.Oc, budget // si)):
            for sic in _pow2_upto(min(layer.Ic, budget // (si * so))):
                tiles.append((sg, si, so, sic))
    return tiles


def enumerate_temporal_tiles(layer: LayerSpec, cfg: HardwareConfig,
                             spatial: Factors) -> list[Factors]:
    """Feasible temporal chunk-count tuples, minimal chunking first.

    Empty iff even single-element chunks overflow ma_mem_size.
    """
    sg, si, so, sic = spatial
    ladders = (_chunk_counts(_ceil_div(layer.G, sg)),
               _chunk_counts(_ceil_div(layer.I, si)),
               _chunk_counts(_ceil_div(layer.Oc, so)),
               _chunk_counts(_ceil_div(layer.Ic, sic)))
    out = []
    for tg in ladders[0]:
        for ti in ladders[1]:
            for to in ladders[2]:
                for tic in ladders[3]:
                    t = (tg, ti, to, tic)
                    if working_set_bytes(layer, spatial, t) <= cfg.ma_mem_size:
                        out.append(t)
    out.sort(key=lambda t: (t[0] * t[1] * t[2] * t[3], t))
    return out


@lru_cache(maxsize=1 << 20)
def _min_temporal_for(gn: int, inn: int, ocn: int, icn: int, elem_bytes: int,
                      mem: int) -> Factors | None:
    """Feasible chunk counts with the fewest steps for one per-node tile."""

    def ws(tg: int, ti: int, to: int, tic: int) -> int:
        gc = _ceil_div(gn, tg)
        ic_ = _ceil_div(inn, ti)
        oc_ = _ceil_div(ocn, to)
        icc = _ceil_div(icn, tic)
        return 2 * gc * (ic_ * icc + icc * oc_ + ic_ * oc_) * elem_bytes

    full = ws(1, 1, 1, 1)
    if full <= mem:
        return (1, 1, 1, 1)
    ladders = (_chunk_counts(gn), _chunk_counts(inn), _chunk_counts(ocn),
               _chunk_counts(icn))
    maxed = tuple(l[-1] for l in ladders)
    if ws(*maxed) > mem:
        return None
    # ws(t) >= ws(1)/prod(t), so start the product walk at the lower bound.
    target = 1
    while target * mem < full:
        target *= 2
    limit = maxed[0] * maxed[1] * maxed[2] * maxed[3]
    while target <= limit:
        for tg in ladders[0]:
            if tg > target:
                break
            for ti in ladders[1]:
                if tg * ti > target:
                    break
                for to in ladders[2]:
                    prod3 = tg * ti * to
                    if prod3 > target:
                        break
                    if target % prod3:
                        continue
                    tic = target // prod3
                    if tic in ladders[3] and ws(tg, ti, to, tic) <= mem:
                        return (tg, ti, to, tic)
        target *= 2
    return None


def _min_temporal(layer: LayerSpec, cfg: HardwareConfig,
                  spatial: Factors) -> Factors | None:
    """First element of enumerate_temporal_tiles without full enumeration."""
    sg, si, so, sic = spatial
    return _min_temporal_for(_ceil_div(layer.G, sg), _ceil_div(layer.I, si),
                             _ceil_div(layer.Oc, so), _ceil_div(layer.Ic, sic),
                             layer.elem_bytes, cfg.ma_mem_size)


def tile_options(layer: LayerSpec, cfg: HardwareConfig) -> list[TileOption]:
    """Every feasible spatial split with its minimal temporal chunking."""
    options = []
    for spatial in enumerate_spatial_tiles(layer, cfg):
        temporal = _min_temporal(layer, cfg, spatial)
        if temporal is None:
            continue
        res = spatial_cycle_terms(layer, cfg, spatial)
        options.append(TileOption(Dataflow(spatial, temporal), res.cycles,
                                  res.binding))
    return options


@lru_cache(maxsize=1 << 18)
def compile_dataflow(layer: LayerSpec, cfg: HardwareConfig) -> Dataflow:
    """Latency-minimal feasible dataflow for one layer.

    Ties break on fewer active nodes, then fewer temporal steps, then
    lexicographic factor order, so the argmin is total.
    """
    best = None
    best_key = None
    for spatial in enumerate_spatial_tiles(layer, cfg):
        temporal = _min_temporal(layer, cfg, spatial)
        if temporal is None:
            continue
        res = spatial_cycle_terms(layer, cfg, spatial)
        df = Dataflow(spatial, temporal)
        key = (res.cycles, df.active_nodes, df.temporal_steps, spatial,
               temporal)
        if best_key is None or key < best_key:
            best, best_key = df, key
    if best is None:
        raise DataflowInfeasibleError(
            f"layer {layer.name}: no temporal chunking fits "
            f"ma_mem_size={cfg.ma_mem_size}")
    return best


def check_feasible(layer: LayerSpec, cfg: HardwareConfig, df: Dataflow) -> None:
    """Validate a dataflow against the layer extents, node budget and memory."""
    sg, si, so, sic = df.spatial
    if sg > layer.G or si > layer.I or so > layer.Oc or sic > layer.Ic:
        raise DataflowInfeasibleError(
            f"layer {layer.name}: spatial factors {df.spatial} exceed extents")
    if df.active_nodes > cfg.node_count:
        raise DataflowInfeasibleError(
            f"layer {layer.name}: {df.active_nodes} nodes exceed "
            f"{cfg.node_count}")
    ws = working_set_bytes(layer, df.spatial, df.temporal)
    if ws > cfg.ma_mem_size:
        raise DataflowInfeasibleError(
            f"layer {layer.name}: working set {ws}B exceeds "
            f"ma_mem_size={cfg.ma_mem_size}B")
