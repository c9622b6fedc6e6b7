"""Deterministic accuracy stand-in driven by model capacity.

Training super-networks is out of scope here, so search runs score
architectures with a saturating curve over their weight count: bigger
sub-networks earn higher proxy accuracy, which trades off against their
higher cycle cost and yields curved Pareto fronts.  Every number produced
here is a PROXY, not a claim about real task accuracy, and it never looks at
the hardware configuration.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .workload import ArchSpace, Family, SubnetArch, count_params, default_space

NOISE_SPAN = 0.002


def _default_capacity_scales() -> tuple[tuple[str, float], ...]:
    # Scale per family = weight count of its smallest sub-network, so the
    # capacity ratio spans roughly [1, 3] across each space.
    scales = []
    for family in Family:
        space = default_space(family)
        scales.append((family.value,
                       float(count_params(space.minimal_subnet(), space))))
    return tuple(scales)


@dataclass(frozen=True)
class ProxyParams:
    ceiling: float = 0.82
    capacity_scales: tuple[tuple[str, float], ...] = field(
        default_factory=_default_capacity_scales)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.ceiling < 1.0:
            raise ValueError("ceiling must lie in (0, 1)")

    def scale_for(self, family: Family) -> float:
        for name, scale in self.capacity_scales:
            if name == family.value:
                return scale
        raise KeyError(f"no capacity scale for family {family}")


def _perturbation(key: tuple, seed: int) -> float:
    blob = repr((key, seed)).encode()
    digest = hashlib.sha256(blob).digest()
    unit = int.from_bytes(digest[:8], "big") / float(1 << 64)
    return (2.0 * unit - 1.0) * NOISE_SPAN


def accuracy_from_params(n_params: float, scale: float, ceiling: float,
                         perturbation: float = 0.0) -> float:
    base = ceiling * (1.0 - math.exp(-n_params / scale))
    return max(0.0, base + perturbation)


def proxy_accuracy(subnet: SubnetArch, params: ProxyParams | None = None,
                   space: ArchSpace | None = None) -> float:
    """Proxy accuracy in [0, ceiling + noise]; pure in (subnet, params)."""
    params = params or ProxyParams()
    n = count_params(subnet, space)
    noise = _perturbation(subnet.key(), params.seed)
    return accuracy_from_params(n, params.scale_for(subnet.family),
                                params.ceiling, noise)
