"""JSON run configuration with strict key checking."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .clustering import METHODS
from .errors import DataIOError, ValidationError
from .forward_sim import DEFAULT_MATERIALS, PatternSpec, boundary_from_dict
from .kinematics import FEATURE_KINDS

BENCHMARK_MESH = 96


@dataclass
class RunConfig:
    """Everything needed to reproduce one experiment.

    With more than one entry in ``bcs`` the ensemble pipeline runs in
    addition to the per-load-case clustering. ``reconstruct`` optionally
    holds ``{"k_range": [...], "eval_case": int, "components": [...]}``.
    """

    pattern: dict = field(default_factory=lambda: {"kind": "circle", "center": [0.5, 0.5], "radius": 0.2})
    materials: list = field(default_factory=lambda: [list(m) for m in DEFAULT_MATERIALS])
    mesh_resolution: int = BENCHMARK_MESH
    load_steps: int = 10
    bcs: list = field(default_factory=lambda: [{"kind": "equibiaxial", "magnitude": 0.3}])
    markers: int = 1000
    marker_seed: int = 7
    grid: int = 89
    mls_k: int = 16
    feature_kind: str = "invariants"
    standardize: bool | None = None
    method: str = "kmeans"
    method_params: dict = field(default_factory=dict)
    k: int = 2
    cluster_seed: int = 3
    k_final: int | str | None = None
    min_size: int = 5
    reconstruct: dict | None = None
    out: str = "run"

    def __post_init__(self):
        self.validate()

    def validate(self):
        PatternSpec.from_dict(self.pattern)
        if len(self.materials) != 2 or any(len(m) != 2 for m in self.materials):
            raise ValidationError("materials must be [[E, nu], [E, nu]]")
        for E, nu in self.materials:
            if not (E > 0 and -1 < nu < 0.5):
                raise ValidationError(f"invalid material (E={E}, nu={nu})")
        if not self.bcs:
            raise ValidationError("at least one boundary condition is required")
        for bc in self.bcs:
            boundary_from_dict(bc)
        if self.feature_kind not in FEATURE_KINDS:
            raise ValidationError(f"unknown feature kind {self.feature_kind!r}")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        for name in ("mesh_resolution", "load_steps", "markers", "grid", "mls_k", "k", "min_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValidationError(f"{name} must be a positive integer")
        for name in ("marker_seed", "cluster_seed"):
            if isinstance(getattr(self, name), bool) or not isinstance(getattr(self, name), int):
                raise ValidationError(f"{name} must be an integer")
        if self.k_final not in (None, "auto") and not (isinstance(self.k_final, int) and self.k_final >= 2):
            raise ValidationError("k_final must be null, 'auto' or an integer >= 2")
        if self.reconstruct is not None:
            unknown = set(self.reconstruct) - {"k_range", "eval_case", "components"}
            if unknown:
                raise ValidationError(f"unknown reconstruct keys {sorted(unknown)}")
            if "k_range" not in self.reconstruct:
                raise ValidationError("reconstruct needs k_range")

    @property
    def pattern_spec(self):
        return PatternSpec.from_dict(self.pattern)

    @property
    def boundary_conditions(self):
        return [boundary_from_dict(bc) for bc in self.bcs]

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return dataclasses.asdict(self)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataIOError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return RunConfig.from_dict(data)


def save_config(config: RunConfig, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
