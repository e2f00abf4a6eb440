"""Flat ``key = value`` run configuration shared by every CLI command."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .augment import AugmentConfig
from .neighbors import NeighborConfig
from .training import MODES, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    rho: float = 0.4
    tau: float = 0.4
    k: int = 5
    d: int = 300
    hidden: int = 300
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 5.0
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    mode: str = "EA"
    beam: int = 3
    max_len: int = 20
    min_count: int = 1
    init_vectors: str = ""
    neighbor_dim: int = 100
    neighbor_window: int = 4
    neighbor_epochs: int = 100
    neighbor_negatives: int = 5
    neighbor_lr: float = 0.05
    neighbor_batch_size: int = 16

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.beam < 1 or self.max_len < 1 or self.min_count < 1:
            raise ConfigError("beam, max_len and min_count must be >= 1")
        try:
            self.train_config()
            self.neighbor_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            rho=self.rho, tau=self.tau, k=self.k, lr=self.lr, beta1=self.beta1, beta2=self.beta2,
            eps=self.eps, batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
            mode=self.mode, d=self.d, hidden=self.hidden, clip=self.clip,
            init_vectors=self.init_vectors or None,
        )

    def neighbor_config(self) -> NeighborConfig:
        return NeighborConfig(dim=self.neighbor_dim, window=self.neighbor_window, epochs=self.neighbor_epochs,
                              negatives=self.neighbor_negatives, lr=self.neighbor_lr,
                              batch_size=self.neighbor_batch_size, seed=self.seed)

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(self.rho, self.tau, self.k)

    def to_dict(self) -> dict:
        """Snapshot using the file's key spelling (``neighbor.dim`` etc.)."""
        return {_file_key(k): v for k, v in asdict(self).items()}


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _file_key(name: str) -> str:
    return name.replace("neighbor_", "neighbor.", 1) if name.startswith("neighbor_") else name


def _field_name(key: str) -> str:
    key = key.strip()
    name = key.replace("neighbor.", "neighbor_", 1) if key.startswith("neighbor.") else key
    if name not in _FIELDS or (name.startswith("neighbor_") and not key.startswith("neighbor.")):
        raise ConfigError(f"unknown config key {key!r}")
    return name


def _coerce(name: str, raw: str):
    kind = type(_FIELDS[name].default)
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{_file_key(name)}: cannot parse {raw!r} as {kind.__name__}") from None
    return raw


def parse_pairs(pairs, source: str = "flag") -> dict:
    values = {}
    for lineno, line in enumerate(pairs, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        name = _field_name(key)
        values[name] = _coerce(name, raw)
    return values


def load_config(path: str | Path | None = None, overrides=()) -> RunConfig:
    """Defaults, then the config file (if any), then ``key=value`` overrides."""
    values = {}
    if path:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_pairs(path.read_text(encoding="utf-8").splitlines(), str(path)))
    values.update(parse_pairs(overrides))
    return RunConfig(**values)


def dump_config(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config.to_dict().items())
