"""Elastic workload spaces and their lowering to grouped-matmul layer descriptors.

Three families are modeled: a MobileNetV3-like inverted-residual CNN, a
ResNet-50-like bottleneck CNN, and a ViT-B-like transformer.  Every network
layer that performs multiply-accumulates is described by a single generalized
grouped-matmul shape (G, I, Ic, Oc):

    G   channel-group count (independent sub-matmuls)
    I   resolution dimension (batch x output positions, or token count)
    Ic  reduction dimension (input channels x kernel window)
    Oc  output channels per group

Pooling, softmax and normalization carry no MACs and are not lowered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class Family(str, Enum):
    CNN_MBV3 = "cnn_mbv3"
    CNN_RESNET = "cnn_resnet"
    VIT = "vit"


class LoweringError(ValueError):
    """Raised for layer shapes that cannot be expressed as a grouped matmul."""


@dataclass(frozen=True)
class LayerSpec:
    """One grouped-matmul layer; MACs = G * I * Ic * Oc by definition.

    The name is informational only: two layers with equal shape compare
    equal, so shape-level caches hit across repeated blocks.
    """

    name: str = field(compare=False)
    G: int = 1
    I: int = 1
    Ic: int = 1
    Oc: int = 1
    elem_bytes: int = 1

    def __post_init__(self) -> None:
        for dim in ("G", "I", "Ic", "Oc"):
            if getattr(self, dim) < 1:
                raise LoweringError(f"{self.name}: dimension {dim} must be >= 1")
        if self.elem_bytes not in (1, 2, 4):
            raise LoweringError(f"{self.name}: elem_bytes must be 1, 2 or 4")

    @property
    def macs(self) -> int:
        return self.G * self.I * self.Ic * self.Oc

    @property
    def weight_elems(self) -> int:
        return self.G * self.Ic * self.Oc


@dataclass(frozen=True)
class StageSpec:
    """Output width and input stride of one CNN stage."""

    width: int
    stride: int


@dataclass(frozen=True)
class ElasticVar:
    """One searchable variable: an option list plus (stage, block) coordinates.

    stage/block are -1 for variables that are not tied to a CNN block
    (ViT variables, per-stage depth uses block = -1).
    """

    name: str
    options: tuple
    stage: int = -1
    block: int = -1

    def is_active(self, subnet: "SubnetArch") -> bool:
        if self.block < 0:
            return True
        return self.block < subnet.depths[self.stage]


@dataclass(frozen=True)
class SubnetArch:
    """A concrete choice vector drawn from an ArchSpace.

    CNN fields hold one entry per stage (depths) or per stage x max-block slot
    (kernels, widths).  Entries for block slots beyond the chosen depth are
    canonicalized to the first option of their variable so that encoding and
    equality are well defined.
    """

    family: Family
    depths: tuple[int, ...] = ()
    kernels: tuple[tuple[int, ...], ...] = ()
    widths: tuple[tuple[float, ...], ...] = ()
    num_layers: int = 0
    num_heads: int = 0
    intermediate_dim: int = 0

    def key(self) -> tuple:
        """Stable hashable identity used for caching and hashing."""
        if self.family is Family.VIT:
            return (self.family.value, self.num_layers, self.num_heads,
                    self.intermediate_dim)
        return (self.family.value, self.depths, self.kernels, self.widths)


@dataclass(frozen=True)
class ArchSpace:
    """Option lists plus the fixed stage layout of one architecture family."""

    family: Family
    # CNN families
    kernel_options: tuple[int, ...] = ()
    width_options: tuple[float, ...] = ()
    depth_options: tuple[int, ...] = ()
    stages: tuple[StageSpec, ...] = ()
    stem_width: int = 0
    input_res: int = 224
    head_widths: tuple[int, ...] = ()
    # ViT family
    layer_options: tuple[int, ...] = ()
    head_options: tuple[int, ...] = ()
    mlp_options: tuple[int, ...] = ()
    hidden_dim: int = 768
    seq_len: int = 197
    patch_size: int = 16
    num_classes: int = 1000
    elem_bytes: int = 1

    def __post_init__(self) -> None:
        for name, opts in self._option_fields():
            if not opts:
                raise ValueError(f"{name} must be non-empty")
            if list(opts) != sorted(opts):
                raise ValueError(f"{name} must be sorted ascending")
        if self.family is not Family.VIT and not self.stages:
            raise ValueError("CNN spaces need at least one stage")

    def _option_fields(self) -> list[tuple[str, tuple]]:
        if self.family is Family.VIT:
            return [("layer_options", self.layer_options),
                    ("head_options", self.head_options),
                    ("mlp_options", self.mlp_options)]
        return [("kernel_options", self.kernel_options),
                ("width_options", self.width_options),
                ("depth_options", self.depth_options)]

    @property
    def max_blocks(self) -> int:
        return max(self.depth_options) if self.depth_options else 0

    def variables(self) -> tuple[ElasticVar, ...]:
        """All elastic variables in the stable order used by the genome."""
        if self.family is Family.VIT:
            return (
                ElasticVar("num_layers", self.layer_options),
                ElasticVar("num_heads", self.head_options),
                ElasticVar("intermediate_dim", self.mlp_options),
            )
        out: list[ElasticVar] = []
        for s in range(len(self.stages)):
            out.append(ElasticVar(f"s{s}.depth", self.depth_options, stage=s))
            for b in range(self.max_blocks):
                out.append(ElasticVar(f"s{s}.b{b}.kernel", self.kernel_options,
                                      stage=s, block=b))
                out.append(ElasticVar(f"s{s}.b{b}.width", self.width_options,
                                      stage=s, block=b))
        return tuple(out)

    def build_subnet(self, values: Mapping[str, object]) -> SubnetArch:
        """Assemble a canonical SubnetArch from a name -> value mapping.

        Values of block slots beyond the chosen stage depth are replaced by
        the first option of the variable.
        """
        if self.family is Family.VIT:
            subnet = SubnetArch(
                family=self.family,
                num_layers=int(values["num_layers"]),        # type: ignore[arg-type]
                num_heads=int(values["num_heads"]),          # type: ignore[arg-type]
                intermediate_dim=int(values["intermediate_dim"]),  # type: ignore[arg-type]
            )
            self.validate_subnet(subnet)
            return subnet
        depths = tuple(int(values[f"s{s}.depth"]) for s in range(len(self.stages)))  # type: ignore[arg-type]
        kernels = []
        widths = []
        for s in range(len(self.stages)):
            krow = []
            wrow = []
            for b in range(self.max_blocks):
                if b < depths[s]:
                    krow.append(int(values[f"s{s}.b{b}.kernel"]))  # type: ignore[arg-type]
                    wrow.append(values[f"s{s}.b{b}.width"])
                else:
                    krow.append(self.kernel_options[0])
                    wrow.append(self.width_options[0])
            kernels.append(tuple(krow))
            widths.append(tuple(wrow))
        subnet = SubnetArch(family=self.family, depths=depths,
                            kernels=tuple(kernels), widths=tuple(widths))
        self.validate_subnet(subnet)
        return subnet

    def subnet_values(self, subnet: SubnetArch) -> dict[str, object]:
        """Inverse of build_subnet (canonical values for every variable)."""
        if self.family is Family.VIT:
            return {"num_layers": subnet.num_layers,
                    "num_heads": subnet.num_heads,
                    "intermediate_dim": subnet.intermediate_dim}
        vals: dict[str, object] = {}
        for s in range(len(self.stages)):
            vals[f"s{s}.depth"] = subnet.depths[s]
            for b in range(self.max_blocks):
                vals[f"s{s}.b{b}.kernel"] = subnet.kernels[s][b]
                vals[f"s{s}.b{b}.width"] = subnet.widths[s][b]
        return vals

    def validate_subnet(self, subnet: SubnetArch) -> None:
        if subnet.family is not self.family:
            raise ValueError(f"subnet family {subnet.family} does not match space")
        if self.family is Family.VIT:
            if subnet.num_layers not in self.layer_options:
                raise ValueError(f"num_layers {subnet.num_layers} not an option")
            if subnet.num_heads not in self.head_options:
                raise ValueError(f"num_heads {subnet.num_heads} not an option")
            if subnet.intermediate_dim not in self.mlp_options:
                raise ValueError(
                    f"intermediate_dim {subnet.intermediate_dim} not an option")
            if self.hidden_dim % subnet.num_heads:
                raise ValueError("hidden_dim not divisible by num_heads")
            return
        n = len(self.stages)
        if len(subnet.depths) != n or len(subnet.kernels) != n or len(subnet.widths) != n:
            raise ValueError("per-stage field lengths do not match stage count")
        for s in range(n):
            if subnet.depths[s] not in self.depth_options:
                raise ValueError(f"depth {subnet.depths[s]} not an option")
            for b in range(self.max_blocks):
                if subnet.kernels[s][b] not in self.kernel_options:
                    raise ValueError(f"kernel {subnet.kernels[s][b]} not an option")
                if subnet.widths[s][b] not in self.width_options:
                    raise ValueError(f"width {subnet.widths[s][b]} not an option")
                if b >= subnet.depths[s]:
                    if (subnet.kernels[s][b] != self.kernel_options[0]
                            or subnet.widths[s][b] != self.width_options[0]):
                        raise ValueError(
                            f"inactive block s{s}.b{b} must hold first options")

    def _uniform_subnet(self, pick) -> SubnetArch:
        values = {v.name: v.options[pick(len(v.options))] for v in self.variables()}
        return self.build_subnet(values)

    def minimal_subnet(self) -> SubnetArch:
        return self._uniform_subnet(lambda n: 0)

    def maximal_subnet(self) -> SubnetArch:
        return self._uniform_subnet(lambda n: n - 1)

    def canonical_subnet(self) -> SubnetArch:
        """The static reference architecture of this family.

        ViT-B itself is the largest point of the ViT space, so canonical
        means every option at its maximum there; for the CNN stand-ins the
        canonical network uses the smallest kernel and the middle width and
        depth, resembling the original networks.
        """
        if self.family is Family.VIT:
            return self.maximal_subnet()
        values: dict[str, object] = {}
        for v in self.variables():
            if v.name.endswith(".depth"):
                values[v.name] = v.options[len(v.options) // 2]
            elif v.name.endswith(".kernel"):
                values[v.name] = v.options[0]
            else:
                values[v.name] = v.options[len(v.options) // 2]
        return self.build_subnet(values)

    def to_json(self) -> dict:
        doc: dict[str, object] = {"family": self.family.value,
                                  "input_res": self.input_res,
                                  "elem_bytes": self.elem_bytes}
        if self.family is Family.VIT:
            doc.update(layer_options=list(self.layer_options),
                       head_options=list(self.head_options),
                       mlp_options=list(self.mlp_options),
                       hidden_dim=self.hidden_dim, seq_len=self.seq_len,
                       patch_size=self.patch_size, num_classes=self.num_classes)
        else:
            doc.update(kernel_options=list(self.kernel_options),
                       width_options=list(self.width_options),
                       depth_options=list(self.depth_options),
                       stages=[[s.width, s.stride] for s in self.stages],
                       stem_width=self.stem_width,
                       head_widths=list(self.head_widths),
                       num_classes=self.num_classes)
        return doc


def arch_space_from_json(doc: Mapping) -> ArchSpace:
    """Build an ArchSpace from a parsed JSON document (see README for schema)."""
    family = Family(doc["family"])
    common = dict(input_res=int(doc.get("input_res", 224)),
                  elem_bytes=int(doc.get("elem_bytes", 1)),
                  num_classes=int(doc.get("num_classes", 1000)))
    if family is Family.VIT:
        return ArchSpace(
            family=family,
            layer_options=tuple(doc["layer_options"]),
            head_options=tuple(doc["head_options"]),
            mlp_options=tuple(doc["mlp_options"]),
            hidden_dim=int(doc.get("hidden_dim", 768)),
            seq_len=int(doc.get("seq_len", 197)),
            patch_size=int(doc.get("patch_size", 16)),
            **common,
        )
    return ArchSpace(
        family=family,
        kernel_options=tuple(doc["kernel_options"]),
        width_options=tuple(doc["width_options"]),
        depth_options=tuple(doc["depth_options"]),
        stages=tuple(StageSpec(int(w), int(s)) for w, s in doc["stages"]),
        stem_width=int(doc["stem_width"]),
        head_widths=tuple(doc.get("head_widths", ())),
        **common,
    )


def mbv3_space() -> ArchSpace:
    return ArchSpace(
        family=Family.CNN_MBV3,
        kernel_options=(3, 5, 7),
        width_options=(3, 4, 6),
        depth_options=(2, 3, 4),
        stages=(StageSpec(24, 2), StageSpec(40, 2), StageSpec(80, 2),
                StageSpec(112, 1), StageSpec(160, 2)),
        stem_width=16,
        head_widths=(960, 1280),
    )


def resnet_space() -> ArchSpace:
    return ArchSpace(
        family=Family.CNN_RESNET,
        kernel_options=(3, 5, 7),
        width_options=(0.65, 0.8, 1.0),
        depth_options=(2, 3, 4),
        stages=(StageSpec(256, 1), StageSpec(512, 2), StageSpec(1024, 2),
                StageSpec(2048, 2)),
        stem_width=64,
    )


def vit_space() -> ArchSpace:
    return ArchSpace(
        family=Family.VIT,
        layer_options=(10, 11, 12),
        head_options=(6, 8, 12),
        mlp_options=(2048, 2560, 3072),
    )


_DEFAULT_BUILDERS = {
    Family.CNN_MBV3: mbv3_space,
    Family.CNN_RESNET: resnet_space,
    Family.VIT: vit_space,
}


def default_space(family: Family | str) -> ArchSpace:
    return _DEFAULT_BUILDERS[Family(family)]()


def sample_subnet(space: ArchSpace, seed: int) -> SubnetArch:
    """Uniform independent choice per elastic variable, deterministic in seed."""
    rng = np.random.default_rng(seed)
    return space._uniform_subnet(lambda n: int(rng.integers(n)))


# ---------------------------------------------------------------------------
# Lowering


def conv_layer(name: str, in_res: int, cin: int, cout: int, kernel: int,
               stride: int, groups: int = 1, elem_bytes: int = 1,
               batch: int = 1) -> LayerSpec:
    """Lower one convolution: G=groups, I=batch*ceil(H/s)*ceil(W/s),
    Ic=(Cin/g)*k^2, Oc=Cout/g."""
    if cin % groups or cout % groups:
        raise LoweringError(
            f"{name}: channels ({cin}->{cout}) not divisible by groups {groups}")
    out_res = _ceil_div(in_res, stride)
    return LayerSpec(name=name, G=groups, I=batch * out_res * out_res,
                     Ic=(cin // groups) * kernel * kernel, Oc=cout // groups,
                     elem_bytes=elem_bytes)


def linear_layer(name: str, tokens: int, cin: int, cout: int,
                 elem_bytes: int = 1) -> LayerSpec:
    return LayerSpec(name=name, G=1, I=tokens, Ic=cin, Oc=cout,
                     elem_bytes=elem_bytes)


def _round8(value: float) -> int:
    return max(8, int(value / 8 + 0.5) * 8)


def _lower_mbv3(space: ArchSpace, subnet: SubnetArch) -> list[LayerSpec]:
    b = space.elem_bytes
    layers = [conv_layer("stem", space.input_res, 3, space.stem_width, 3, 2,
                         elem_bytes=b)]
    res = _ceil_div(space.input_res, 2)
    cin = space.stem_width
    for s, stage in enumerate(space.stages):
        for blk in range(subnet.depths[s]):
            k = subnet.kernels[s][blk]
            expand = int(subnet.widths[s][blk])
            stride = stage.stride if blk == 0 else 1
            cout = stage.width
            mid = cin * expand
            pre = f"s{s}.b{blk}"
            layers.append(conv_layer(f"{pre}.expand", res, cin, mid, 1, 1,
                                     elem_bytes=b))
            layers.append(conv_layer(f"{pre}.dw", res, mid, mid, k, stride,
                                     groups=mid, elem_bytes=b))
            res = _ceil_div(res, stride)
            layers.append(conv_layer(f"{pre}.project", res, mid, cout, 1, 1,
                                     elem_bytes=b))
            cin = cout
    layers.append(conv_layer("head.conv", res, cin, space.head_widths[0], 1, 1,
                             elem_bytes=b))
    # global pool, then the two classifier matmuls
    layers.append(linear_layer("head.fc1", 1, space.head_widths[0],
                               space.head_widths[1], elem_bytes=b))
    layers.append(linear_layer("head.fc2", 1, space.head_widths[1],
                               space.num_classes, elem_bytes=b))
    return layers


def _lower_resnet(space: ArchSpace, subnet: SubnetArch) -> list[LayerSpec]:
    b = space.elem_bytes
    layers = [conv_layer("stem", space.input_res, 3, space.stem_width, 7, 2,
                         elem_bytes=b)]
    res = _ceil_div(space.input_res, 2)
    res = _ceil_div(res, 2)  # max-pool halves resolution, no MACs
    cin = space.stem_width
    for s, stage in enumerate(space.stages):
        for blk in range(subnet.depths[s]):
            k = subnet.kernels[s][blk]
            mult = float(subnet.widths[s][blk])
            stride = stage.stride if blk == 0 else 1
            cout = stage.width
            mid = _round8(cout // 4 * mult)
            pre = f"s{s}.b{blk}"
            out_res = _ceil_div(res, stride)
            layers.append(conv_layer(f"{pre}.reduce", res, cin, mid, 1, 1,
                                     elem_bytes=b))
            layers.append(conv_layer(f"{pre}.conv", res, mid, mid, k, stride,
                                     elem_bytes=b))
            layers.append(conv_layer(f"{pre}.expand", out_res, mid, cout, 1, 1,
                                     elem_bytes=b))
            if blk == 0:
                layers.append(conv_layer(f"{pre}.downsample", res, cin, cout,
                                         1, stride, elem_bytes=b))
            res = out_res
            cin = cout
    layers.append(linear_layer("head.fc", 1, cin, space.num_classes,
                               elem_bytes=b))
    return layers


def _lower_vit(space: ArchSpace, subnet: SubnetArch) -> list[LayerSpec]:
    b = space.elem_bytes
    d = space.hidden_dim
    heads = subnet.num_heads
    if d % heads:
        raise LoweringError(f"hidden dim {d} not divisible by {heads} heads")
    head_dim = d // heads
    tokens = space.seq_len
    layers = [conv_layer("patch_embed", space.input_res, 3, d,
                         space.patch_size, space.patch_size, elem_bytes=b)]
    for i in range(subnet.num_layers):
        pre = f"l{i}"
        layers.append(linear_layer(f"{pre}.qkv", tokens, d, 3 * d, elem_bytes=b))
        layers.append(LayerSpec(f"{pre}.scores", G=heads, I=tokens, Ic=head_dim,
                                Oc=tokens, elem_bytes=b))
        layers.append(LayerSpec(f"{pre}.context", G=heads, I=tokens, Ic=tokens,
                                Oc=head_dim, elem_bytes=b))
        layers.append(linear_layer(f"{pre}.proj", tokens, d, d, elem_bytes=b))
        layers.append(linear_layer(f"{pre}.fc1", tokens, d,
                                   subnet.intermediate_dim, elem_bytes=b))
        layers.append(linear_layer(f"{pre}.fc2", tokens,
                                   subnet.intermediate_dim, d, elem_bytes=b))
    layers.append(linear_layer("head.fc", 1, d, space.num_classes, elem_bytes=b))
    return layers


def lower_to_layers(subnet: SubnetArch,
                    space: ArchSpace | None = None) -> list[LayerSpec]:
    """Lower a sub-network to its ordered grouped-matmul layer list."""
    if space is None:
        space = default_space(subnet.family)
    space.validate_subnet(subnet)
    if subnet.family is Family.CNN_MBV3:
        return _lower_mbv3(space, subnet)
    if subnet.family is Family.CNN_RESNET:
        return _lower_resnet(space, subnet)
    return _lower_vit(space, subnet)


def count_macs(subnet: SubnetArch, space: ArchSpace | None = None) -> int:
    return sum(layer.macs for layer in lower_to_layers(subnet, space))


def count_params(subnet: SubnetArch, space: ArchSpace | None = None) -> int:
    """Total weight elements, G*Ic*Oc summed over the lowered layers."""
    return sum(layer.weight_elems for layer in lower_to_layers(subnet, space))
