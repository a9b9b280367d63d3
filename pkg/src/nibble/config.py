"""Run configuration, read from and written to JSON with explicit keys."""

import json
import math
from dataclasses import asdict, dataclass, fields

from nibble.trajectory import default_n

MONITOR_LEVELS = ("off", "light", "full")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    N: int = 150
    beta: float = 0.3
    delta: float = 0.5
    bigC: float = 1.0
    seed: int = 1
    steps_override: int | None = None
    n: int | None = None            # overrides ceil(bigC sqrt(N log N))
    monitor_level: str = "light"
    exact_cap: int = 120
    sample_pairs: int = 2000
    sample_quads: int = 2000
    sample_sets: int = 200
    min_set_size: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.N, int) or isinstance(self.N, bool) or self.N < 4:
            raise ConfigError(f"N must be an integer >= 4, got {self.N!r}")
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.delta <= 1:
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")
        if not (self.bigC > 0 and math.isfinite(self.bigC)):
            raise ConfigError(f"bigC must be positive, got {self.bigC}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.steps_override is not None and (
                not isinstance(self.steps_override, int) or self.steps_override < 0):
            raise ConfigError("steps_override must be a nonnegative integer")
        if self.monitor_level not in MONITOR_LEVELS:
            raise ConfigError(f"monitor_level must be one of {MONITOR_LEVELS}")
        if self.n is not None and (not isinstance(self.n, int) or self.n < 1):
            raise ConfigError("n must be a positive integer")
        if 2 * self.set_size + 1 > self.N:
            raise ConfigError(
                f"n = {self.set_size} too large: need 2n + 1 <= N = {self.N}")
        for name in ("exact_cap", "sample_pairs", "sample_quads", "sample_sets", "min_set_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ConfigError(f"{name} must be a nonnegative integer")

    @property
    def set_size(self):
        return self.n if self.n is not None else default_n(self.N, self.bigC)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)
