"""Pipeline configuration: one document for every stage, JSON on disk.

Unknown keys are rejected so typos cannot silently fall back to defaults.
The canonical JSON form of the full config is hashed (sha256) and stamped
into every artifact the pipeline writes.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import InvalidConfigError
from .forward import FrequencyGrid, PhysicalMedium
from .inverse import ModeSearchConfig
from .network import NetworkConfig
from .training import TrainConfig


@dataclass(frozen=True)
class GeometryConfig:
    layers: int = 5
    layer_length: float = 10.0  # mm
    host_radius: float = 14.5  # mm
    min_radius: float = 1.8125  # mm
    max_radius: float = 14.5  # mm

    def __post_init__(self):
        if self.layers < 1:
            raise InvalidConfigError(f"layers must be >= 1, got {self.layers}")
        if not 0 < self.min_radius < self.max_radius <= self.host_radius:
            raise InvalidConfigError(
                f"need 0 < min_radius < max_radius <= host_radius, got "
                f"({self.min_radius}, {self.max_radius}, {self.host_radius})"
            )
        if self.layer_length <= 0:
            raise InvalidConfigError(f"layer_length must be > 0, got {self.layer_length}")


@dataclass(frozen=True)
class DataConfig:
    levels: int = 4  # radius levels per layer; the grid corpus has levels**layers samples
    random_count: int = 1000
    seed: int = 7

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidConfigError(f"levels must be >= 1, got {self.levels}")
        if self.random_count < 1:
            raise InvalidConfigError(f"random_count must be >= 1, got {self.random_count}")


@dataclass(frozen=True)
class NetworkSettings:
    """Architecture knobs; input/output dims derive from grid and geometry."""

    hidden_layers: tuple[int, ...] = (256, 128)
    components: int = 10
    sigma_floor: float = 1e-3
    seed: int = 0

    def to_network_config(self, input_dim: int, output_dim: int) -> NetworkConfig:
        return NetworkConfig(
            input_dim=input_dim,
            hidden_layers=tuple(self.hidden_layers),
            components=self.components,
            output_dim=output_dim,
            sigma_floor=self.sigma_floor,
            seed=self.seed,
        )


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    medium: PhysicalMedium = field(default_factory=PhysicalMedium)
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)
    data: DataConfig = field(default_factory=DataConfig)
    network: NetworkSettings = field(default_factory=NetworkSettings)
    training: TrainConfig = field(default_factory=TrainConfig)
    mode_search: ModeSearchConfig = field(default_factory=ModeSearchConfig)
    threads: int = 1

    def level_values(self) -> np.ndarray:
        """Evenly spaced radius levels over [min_radius, max_radius]."""
        g = self.geometry
        if self.data.levels == 1:
            return np.array([g.max_radius])
        return np.linspace(g.min_radius, g.max_radius, self.data.levels)

    def network_config(self) -> NetworkConfig:
        return self.network.to_network_config(self.grid.count, self.geometry.layers)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


_SECTIONS = {
    "geometry": GeometryConfig,
    "medium": PhysicalMedium,
    "grid": FrequencyGrid,
    "data": DataConfig,
    "network": NetworkSettings,
    "training": TrainConfig,
    "mode_search": ModeSearchConfig,
}


def _build_section(cls, payload, prefix):
    if not isinstance(payload, dict):
        raise InvalidConfigError(f"config section '{prefix}' must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(payload) - set(known)
    if unknown:
        raise InvalidConfigError(
            f"unknown config key '{prefix}.{sorted(unknown)[0]}'"
        )
    kwargs = {}
    for key, value in payload.items():
        if key == "hidden_layers":
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidConfigError(f"bad value in config section '{prefix}': {exc}") from exc


def config_from_dict(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise InvalidConfigError("config document must be a JSON object")
    unknown = set(payload) - set(_SECTIONS) - {"threads"}
    if unknown:
        raise InvalidConfigError(f"unknown config key '{sorted(unknown)[0]}'")
    kwargs = {
        name: _build_section(cls, payload[name], name)
        for name, cls in _SECTIONS.items()
        if name in payload
    }
    if "threads" in payload:
        threads = payload["threads"]
        if not isinstance(threads, int) or threads < 1:
            raise InvalidConfigError(f"threads must be a positive integer, got {threads!r}")
        kwargs["threads"] = threads
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(payload)


def apply_override(config: RunConfig, dotted_key: str, raw_value: str) -> RunConfig:
    """Apply one 'section.key=value' override; values parse as JSON literals."""
    section_name, _, key = dotted_key.partition(".")
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value

    if section_name == "threads" and not key:
        return replace(config, threads=int(value))
    if section_name not in _SECTIONS:
        raise InvalidConfigError(f"unknown config section '{section_name}'")
    section = getattr(config, section_name)
    if key not in {f.name for f in fields(section)}:
        raise InvalidConfigError(f"unknown config key '{dotted_key}'")
    if key == "hidden_layers":
        value = tuple(value)
    try:
        return replace(config, **{section_name: replace(section, **{key: value})})
    except TypeError as exc:
        raise InvalidConfigError(f"bad value for '{dotted_key}': {exc}") from exc
