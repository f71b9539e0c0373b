"""Run configuration and JSON reports for the command line."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields

from .bch import SPLIT_MODES

__version__ = "0.1.0"

DEFAULT_TOLERANCES = {
    "bch": 1e-8,
    "kveasy": 1e-9,
    "kv1": 1e-9,
    "kvhard": 1e-9,
    "lie": 1e-10,
    "unipotent": 1e-9,
    "sumof5": 1e-10,
    "comm-n2": 1e-9,
    "comm-p": 1e-9,
    "dhs": 1e-9,
}


class ConfigError(ValueError):
    """Invalid configuration: the command line exits with status 2."""


@dataclass
class RunConfig:
    degree: int = 8
    split_mode: str = "first-letter"
    eval_radius: float = 0.05
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    dim: int = 4
    trials: int = 50
    seed: int = 0
    output_path: str | None = None
    threads: int = 1

    def validate(self) -> "RunConfig":
        if not isinstance(self.degree, int) or not 2 <= self.degree <= 12:
            raise ConfigError(f"degree must be an integer in [2, 12], got {self.degree!r}")
        if self.split_mode not in SPLIT_MODES:
            raise ConfigError(f"split_mode must be one of {SPLIT_MODES}, got {self.split_mode!r}")
        if not isinstance(self.dim, int) or not 2 <= self.dim <= 16:
            raise ConfigError(f"dim must be an integer in [2, 16], got {self.dim!r}")
        if not isinstance(self.eval_radius, (int, float)) or not 0 <= self.eval_radius < 1:
            raise ConfigError(f"eval_radius must lie in [0, 1), got {self.eval_radius!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError(f"threads must be a positive integer, got {self.threads!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        for name, tol in self.tolerances.items():
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {name!r}; known: {sorted(DEFAULT_TOLERANCES)}")
            if not isinstance(tol, (int, float)) or not tol > 0:
                raise ConfigError(f"tolerance {name!r} must be > 0, got {tol!r}")
        return self

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    @classmethod
    def from_layers(cls, file_data: dict | None = None, overrides: dict | None = None) -> "RunConfig":
        """Defaults, then a config dict, then explicit overrides (flags)."""
        cfg = cls()
        known = {f.name for f in fields(cls)}
        for layer in (file_data or {}, overrides or {}):
            for key, value in layer.items():
                if key not in known:
                    raise ConfigError(f"unknown config key {key!r}")
                if key == "tolerances":
                    if not isinstance(value, dict):
                        raise ConfigError("tolerances must be an object")
                    cfg.tolerances.update(value)
                else:
                    setattr(cfg, key, value)
        return cfg.validate()

    @classmethod
    def load(cls, path) -> dict:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return data

    def to_json_dict(self) -> dict:
        return asdict(self)


@dataclass
class Report:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)
    wall_time_s: float = 0.0

    def add(self, check) -> None:
        self.checks.append(check)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def finish(self) -> "Report":
        self.wall_time_s = time.perf_counter() - self.started
        return self

    def to_json_dict(self) -> dict:
        return {"command": self.command, "version": __version__, "config": self.config,
                "checks": [c.to_json_dict() for c in self.checks], "results": self.results,
                "wall_time_s": self.wall_time_s, "ok": self.ok,
                "platform_note": "measured values are floating point and may vary in the last "
                                 "digits across BLAS builds; verdicts are seed-deterministic"}

    def summary(self) -> str:
        lines = [f"{self.command}: {'PASS' if self.ok else 'FAIL'} ({self.wall_time_s:.2f} s)"]
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"  {mark} {c.name}: {c.measured:.3e} (threshold {c.threshold:.3e})")
        return "\n".join(lines)
