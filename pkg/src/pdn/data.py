"""Labelled corpus generation, normalization, and serialization.

A corpus pairs transmission spectra (model inputs) with the generating layer
radii (model outputs). Grid corpora enumerate the Cartesian product of a set
of radius levels in odometer order (last layer fastest); random corpora draw
radii uniformly from a continuous range, resampling any row that lands on a
lattice point of the excluded training levels.

On disk a corpus is a little-endian binary container (magic "PDN1"), plus a
human-readable key=value sidecar carrying seed, config hash, and timestamp.
"""

import hashlib
import itertools
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from .errors import DataFormatError, InvalidArgumentError, InvalidConfigError
from .forward import AIR, FrequencyGrid, PhysicalMedium, StructureGeometry, spectrum

MAGIC = b"PDN1"
# magic, then n_samples/n_freq/n_layers/seed (u64), then start/step/min_r/max_r/
# layer_length/host_radius/sound_speed/density (f64), then 32-byte config digest.
_HEADER = struct.Struct("<4sQQQQdddddddd32s")
LATTICE_TOLERANCE_MM = 1e-9


@dataclass
class NormalizationStats:
    """Per-dimension input standardization and output min-max scaling."""

    input_mean: np.ndarray  # (n_freq,)
    input_std: np.ndarray  # (n_freq,), zero-variance dims replaced by 1.0
    constant_dims: np.ndarray  # (n_freq,) bool, flags replaced dims
    min_radius: float
    max_radius: float

    def normalize_inputs(self, x):
        return (np.asarray(x, dtype=float) - self.input_mean) / self.input_std

    def denormalize_inputs(self, x):
        return np.asarray(x, dtype=float) * self.input_std + self.input_mean

    def normalize_outputs(self, y):
        return (np.asarray(y, dtype=float) - self.min_radius) / (
            self.max_radius - self.min_radius
        )

    def denormalize_outputs(self, y):
        return np.asarray(y, dtype=float) * (self.max_radius - self.min_radius) + (
            self.min_radius
        )


@dataclass
class Dataset:
    spectra: np.ndarray  # (n, grid.count) float64
    radii: np.ndarray  # (n, layers) float64, mm
    grid: FrequencyGrid
    layer_length: float
    host_radius: float
    medium: PhysicalMedium
    min_radius: float
    max_radius: float
    seed: int
    config_digest: str  # sha256 hex over the generation config
    kind: str = "grid"
    normalization: NormalizationStats | None = None

    @property
    def n_samples(self) -> int:
        return self.spectra.shape[0]

    @property
    def layers(self) -> int:
        return self.radii.shape[1]


def _digest(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def _forward_all(radii_rows, grid, layer_length, host_radius, medium, threads):
    def one(row):
        geometry = StructureGeometry(tuple(row), layer_length, host_radius)
        return spectrum(geometry, grid, medium)

    rows = list(radii_rows)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(one, rows))
    else:
        spectra = [one(row) for row in rows]
    return np.array(spectra, dtype=float)


def generate_grid_corpus(
    levels,
    layers: int = 5,
    grid: FrequencyGrid = FrequencyGrid(),
    layer_length: float = 10.0,
    host_radius: float = 14.5,
    medium: PhysicalMedium = AIR,
    threads: int = 1,
) -> Dataset:
    """Enumerate levels^layers structures in odometer order and label each one."""
    levels = [float(v) for v in levels]
    if not levels:
        raise InvalidConfigError("levels must be non-empty")
    if min(levels) <= 0 or max(levels) > host_radius:
        raise InvalidConfigError(
            f"all levels must lie in (0, host_radius={host_radius}], got {levels}"
        )
    if layers < 1:
        raise InvalidConfigError(f"layers must be >= 1, got {layers}")

    radii = np.array(list(itertools.product(levels, repeat=layers)), dtype=float)
    spectra = _forward_all(radii, grid, layer_length, host_radius, medium, threads)
    digest = _digest(
        {
            "kind": "grid",
            "levels": levels,
            "layers": layers,
            "grid": [grid.start_hz, grid.step_hz, grid.count],
            "layer_length": layer_length,
            "host_radius": host_radius,
            "medium": [medium.sound_speed, medium.density],
        }
    )
    return Dataset(
        spectra=spectra,
        radii=radii,
        grid=grid,
        layer_length=layer_length,
        host_radius=host_radius,
        medium=medium,
        min_radius=min(levels),
        max_radius=max(levels),
        seed=0,
        config_digest=digest,
        kind="grid",
    )


def _on_lattice(rows, levels):
    """Rows whose every coordinate sits within tolerance of some level."""
    gaps = np.abs(rows[:, :, None] - np.asarray(levels, dtype=float)[None, None, :])
    return gaps.min(axis=2).max(axis=1) < LATTICE_TOLERANCE_MM


def generate_random_corpus(
    n: int,
    seed: int,
    bounds: tuple[float, float] = (1.8125, 14.5),
    layers: int = 5,
    grid: FrequencyGrid = FrequencyGrid(),
    layer_length: float = 10.0,
    host_radius: float = 14.5,
    medium: PhysicalMedium = AIR,
    exclude_levels=None,
    threads: int = 1,
) -> Dataset:
    """Uniform continuous structures, kept off the excluded training lattice."""
    if n < 1:
        raise InvalidArgumentError(f"random corpus size must be >= 1, got {n}")
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (0 < lo < hi <= host_radius):
        raise InvalidConfigError(
            f"bounds must satisfy 0 < min < max <= host_radius={host_radius}, got {bounds}"
        )
    if layers < 1:
        raise InvalidConfigError(f"layers must be >= 1, got {layers}")

    rng = np.random.default_rng(seed)
    radii = rng.uniform(lo, hi, size=(n, layers))
    if exclude_levels is not None:
        colliding = _on_lattice(radii, exclude_levels)
        while np.any(colliding):
            radii[colliding] = rng.uniform(lo, hi, size=(int(colliding.sum()), layers))
            colliding = _on_lattice(radii, exclude_levels)

    spectra = _forward_all(radii, grid, layer_length, host_radius, medium, threads)
    digest = _digest(
        {
            "kind": "random",
            "n": n,
            "seed": seed,
            "bounds": [lo, hi],
            "layers": layers,
            "grid": [grid.start_hz, grid.step_hz, grid.count],
            "layer_length": layer_length,
            "host_radius": host_radius,
            "medium": [medium.sound_speed, medium.density],
            "exclude_levels": None
            if exclude_levels is None
            else [float(v) for v in exclude_levels],
        }
    )
    return Dataset(
        spectra=spectra,
        radii=radii,
        grid=grid,
        layer_length=layer_length,
        host_radius=host_radius,
        medium=medium,
        min_radius=lo,
        max_radius=hi,
        seed=seed,
        config_digest=digest,
        kind="random",
    )


def normalize(dataset: Dataset) -> tuple[Dataset, NormalizationStats]:
    """Standardize inputs per dimension; min-max scale outputs to [0, 1]."""
    if dataset.normalization is not None:
        raise InvalidArgumentError("dataset is already normalized")
    if dataset.n_samples == 0:
        raise InvalidArgumentError("cannot normalize an empty dataset")

    mean = dataset.spectra.mean(axis=0)
    std = dataset.spectra.std(axis=0)
    constant = std == 0.0
    std_eff = np.where(constant, 1.0, std)
    stats = NormalizationStats(
        input_mean=mean,
        input_std=std_eff,
        constant_dims=constant,
        min_radius=dataset.min_radius,
        max_radius=dataset.max_radius,
    )
    normalized = replace(
        dataset,
        spectra=stats.normalize_inputs(dataset.spectra),
        radii=stats.normalize_outputs(dataset.radii),
        normalization=stats,
    )
    return normalized, stats


def save(dataset: Dataset, path) -> None:
    """Write the binary container and its key=value metadata sidecar."""
    if dataset.normalization is not None:
        raise InvalidArgumentError("only raw (unnormalized) datasets are serialized")
    header = _HEADER.pack(
        MAGIC,
        dataset.n_samples,
        dataset.grid.count,
        dataset.layers,
        dataset.seed,
        dataset.grid.start_hz,
        dataset.grid.step_hz,
        dataset.min_radius,
        dataset.max_radius,
        dataset.layer_length,
        dataset.host_radius,
        dataset.medium.sound_speed,
        dataset.medium.density,
        bytes.fromhex(dataset.config_digest),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dataset.spectra, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.radii, dtype="<f8").tobytes())

    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(f"{path}.meta", "w", encoding="utf-8") as fh:
        fh.write("format=pdn-dataset-v1\n")
        fh.write(f"kind={dataset.kind}\n")
        fh.write(f"samples={dataset.n_samples}\n")
        fh.write(f"seed={dataset.seed}\n")
        fh.write(f"config_hash={dataset.config_digest}\n")
        fh.write(f"created_utc={stamp}\n")


def load(path, verify: bool = False, verify_fraction: float = 0.01) -> Dataset:
    """Read a container; optionally re-verify a sample of stored spectra."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DataFormatError("container shorter than its header", offset=len(blob))
    (
        magic,
        n_samples,
        n_freq,
        n_layers,
        seed,
        start_hz,
        step_hz,
        min_radius,
        max_radius,
        layer_length,
        host_radius,
        sound_speed,
        density,
        digest,
    ) = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)

    expected = _HEADER.size + 8 * n_samples * (n_freq + n_layers)
    if len(blob) != expected:
        raise DataFormatError(
            f"payload length mismatch: file has {len(blob)} bytes, "
            f"header implies {expected}",
            offset=min(len(blob), expected),
        )

    spectra_end = _HEADER.size + 8 * n_samples * n_freq
    spectra = np.frombuffer(blob, dtype="<f8", count=n_samples * n_freq, offset=_HEADER.size)
    radii = np.frombuffer(blob, dtype="<f8", count=n_samples * n_layers, offset=spectra_end)
    dataset = Dataset(
        spectra=spectra.reshape(n_samples, n_freq).copy(),
        radii=radii.reshape(n_samples, n_layers).copy(),
        grid=FrequencyGrid(start_hz, step_hz, n_freq),
        layer_length=layer_length,
        host_radius=host_radius,
        medium=PhysicalMedium(sound_speed, density),
        min_radius=min_radius,
        max_radius=max_radius,
        seed=seed,
        config_digest=digest.hex(),
        kind=_sidecar_kind(path),
    )
    if verify:
        _verify_spectra(dataset, verify_fraction)
    return dataset


def _sidecar_kind(path) -> str:
    try:
        with open(f"{path}.meta", encoding="utf-8") as fh:
            for line in fh:
                key, _, value = line.strip().partition("=")
                if key == "kind":
                    return value
    except OSError:
        pass
    return "unknown"


def _verify_spectra(dataset: Dataset, fraction: float) -> None:
    n_check = max(1, int(np.ceil(fraction * dataset.n_samples)))
    rng = np.random.default_rng(int(dataset.config_digest[:8], 16))
    picks = rng.choice(dataset.n_samples, size=min(n_check, dataset.n_samples), replace=False)
    for i in picks:
        geometry = StructureGeometry(
            tuple(dataset.radii[i]), dataset.layer_length, dataset.host_radius
        )
        fresh = spectrum(geometry, dataset.grid, dataset.medium)
        gap = np.max(np.abs(fresh - dataset.spectra[i]))
        if gap > 1e-12:
            raise DataFormatError(
                f"stored spectrum {i} fails re-verification "
                f"(max deviation {gap:.3e} > 1e-12)"
            )


def export_csv(dataset: Dataset, path) -> None:
    """One row per sample: spectrum values then radii, 17 significant digits."""
    if dataset.normalization is not None:
        raise InvalidArgumentError("only raw (unnormalized) datasets are exported")
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in zip(dataset.spectra, dataset.radii):
            row = np.concatenate([x, y])
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")
