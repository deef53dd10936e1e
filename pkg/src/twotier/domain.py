"""Value types shared across the package.

Scalars are thin ``float``/``int`` subclasses that validate on construction, so
they interoperate with numpy and arithmetic while still rejecting bad values at
the boundary. Bulk computation elsewhere works on plain float64 arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import BadConfig, OutOfRange

DEFAULT_FAMILY_NAMES = ("Xception", "Res2Net101", "EfficientNetB7")


class Probability(float):
    """A float guaranteed to lie in [0, 1]."""

    def __new__(cls, value):
        v = float(value)
        if not (0.0 <= v <= 1.0):  # NaN fails both comparisons
            raise OutOfRange(f"probability must lie in [0, 1], got {value!r}")
        return super().__new__(cls, v)

    def __repr__(self):
        return f"Probability({float(self)!r})"


class Logit(float):
    """A finite real-valued raw model output."""

    def __new__(cls, value):
        v = float(value)
        if not math.isfinite(v):
            raise OutOfRange(f"logit must be finite, got {value!r}")
        return super().__new__(cls, v)

    def __repr__(self):
        return f"Logit({float(self)!r})"


class BinaryLabel(enum.IntEnum):
    REAL = 0
    FAKE = 1


def make_probability(x) -> Probability:
    return Probability(x)


@dataclass(frozen=True)
class FamilyId:
    index: int
    display_name: str = ""

    def __post_init__(self):
        if self.index < 0:
            raise BadConfig(f"family index must be >= 0, got {self.index}")
        if not self.display_name:
            object.__setattr__(self, "display_name", default_family_name(self.index))


@dataclass(frozen=True)
class InstanceId:
    family: FamilyId
    slot: int

    def __post_init__(self):
        if self.slot < 0:
            raise BadConfig(f"instance slot must be >= 0, got {self.slot}")


def default_family_name(index: int) -> str:
    if index < len(DEFAULT_FAMILY_NAMES):
        return DEFAULT_FAMILY_NAMES[index]
    return f"Family{index}"


@dataclass(frozen=True)
class EnsembleConfig:
    """Number of architecture families, instances per family, and one seed per instance.

    ``seeds`` is laid out family-major: ``seeds[f * instances_per_family + i]``.
    Left empty, seeds are derived from ``base_seed``.
    """

    families: int = 3
    instances_per_family: int = 3
    seeds: tuple[int, ...] = ()
    family_names: tuple[str, ...] = ()
    base_seed: int = 0

    def __post_init__(self):
        if self.families < 1 or self.instances_per_family < 1:
            raise BadConfig("families and instances_per_family must both be >= 1")
        n = self.families * self.instances_per_family
        if not self.seeds:
            object.__setattr__(self, "seeds", tuple(self.base_seed * 1000 + k for k in range(n)))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if len(self.seeds) != n:
            raise BadConfig(f"expected {n} seeds, got {len(self.seeds)}")
        if len(set(self.seeds)) != n:
            raise BadConfig(f"instance seeds must be pairwise distinct, got {self.seeds}")
        if not self.family_names:
            object.__setattr__(
                self, "family_names", tuple(default_family_name(f) for f in range(self.families))
            )
        object.__setattr__(self, "family_names", tuple(self.family_names))
        if len(self.family_names) != self.families:
            raise BadConfig("family_names must have one entry per family")
        if len(set(self.family_names)) != self.families:
            raise BadConfig("family names must be unique")

    @property
    def family_ids(self) -> list[FamilyId]:
        return [FamilyId(f, name) for f, name in enumerate(self.family_names)]

    def instance_ids(self, family: int) -> list[InstanceId]:
        fid = self.family_ids[family]
        return [InstanceId(fid, i) for i in range(self.instances_per_family)]

    def seed_for(self, family: int, slot: int) -> int:
        return self.seeds[family * self.instances_per_family + slot]
