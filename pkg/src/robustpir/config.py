"""Session configuration: the single source of truth for (n, k, q, l, m, nu)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

from .mds_storage import MdsCode, make_code, smallest_field


@dataclass(frozen=True)
class SystemConfig:
    n: int
    k: int
    q: int
    m: int
    nu: int = 0
    ell: int = 1

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise ValueError(f"need 1 <= k < n, got n={self.n}, k={self.k}")
        if self.m < 1:
            raise ValueError("m >= 1 required")
        if self.ell < 1:
            raise ValueError("ell >= 1 required")
        if not 0 <= self.nu <= self.n - self.k - 1:
            raise ValueError(
                f"nu must lie in [0, n-k-1] = [0, {self.n - self.k - 1}], got {self.nu}"
            )

    @classmethod
    def with_smallest_field(cls, n: int, k: int, m: int, nu: int = 0, ell: int = 1) -> SystemConfig:
        return cls(n, k, smallest_field(n, k), m, nu, ell)

    @cached_property
    def code(self) -> MdsCode:
        return make_code(self.n, self.k, self.q)

    @cached_property
    def params(self):
        from .robust_pir import universal_params

        return universal_params(self.n, self.k, self.nu)

    @property
    def alpha(self) -> int:
        return self.params.alpha

    @property
    def query_length(self) -> int:
        return self.m * self.alpha

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> SystemConfig:
        missing = [key for key in ("n", "k", "q", "m") if key not in doc]
        if missing:
            raise ValueError(f"config missing keys: {', '.join(missing)}")
        return cls(doc["n"], doc["k"], doc["q"], doc["m"], doc.get("nu", 0), doc.get("ell", 1))

    @classmethod
    def load(cls, path) -> SystemConfig:
        return cls.from_json(json.loads(Path(path).read_text()))
