"""Run configuration, optionally loaded from the file named by ``OT_KERNEL_CONFIG``."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields

from .errors import ParseError, ValidationError

ENV_VAR = "OT_KERNEL_CONFIG"
DEFAULT_SEED = 42


@dataclass(frozen=True)
class RunConfig:
    feasibility_tol: float = 1e-10
    optimality_tol: float = 1e-9
    convexity_tol: float = 1e-8
    output_format: str = "json"
    seed: int = DEFAULT_SEED
    verbosity: int = 0

    def __post_init__(self):
        for name in ("feasibility_tol", "optimality_tol", "convexity_tol"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ValidationError(f"{name} must be a positive number")
        if self.output_format not in ("json", "csv"):
            raise ValidationError(f"output_format must be 'json' or 'csv', got {self.output_format!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")
        if isinstance(self.verbosity, bool) or not isinstance(self.verbosity, int):
            raise ValidationError("verbosity must be an integer")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ValidationError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**obj)


def load_config(path: str | None = None) -> RunConfig:
    """Explicit path, else ``$OT_KERNEL_CONFIG``, else defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return RunConfig()
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path}: malformed JSON ({exc.msg})") from exc
    return RunConfig.from_json(obj)
