"""Checkpoint serialization: one JSON document, schema "pdn-checkpoint-v1".

The document holds every config needed to run inverse design against the
trained model: network weights (base64-encoded little-endian float64 blocks,
bit-exact round trip), normalization statistics, the frequency grid, the duct
geometry context, and the medium.
"""

import base64
import json
from dataclasses import dataclass

import numpy as np

from .data import NormalizationStats
from .errors import CheckpointError
from .forward import FrequencyGrid, PhysicalMedium
from .network import NetworkConfig, NetworkWeights, layer_dims

SCHEMA = "pdn-checkpoint-v1"


@dataclass
class Checkpoint:
    weights: NetworkWeights
    normalization: NormalizationStats
    grid: FrequencyGrid
    layer_length: float
    host_radius: float
    medium: PhysicalMedium
    config_hash: str = ""


def _encode(array) -> str:
    return base64.b64encode(np.ascontiguousarray(array, dtype="<f8").tobytes()).decode()


def _decode(text: str, shape) -> np.ndarray:
    raw = base64.b64decode(text.encode())
    expected = 8 * int(np.prod(shape))
    if len(raw) != expected:
        raise CheckpointError(
            f"weight block holds {len(raw)} bytes, shape {shape} needs {expected}"
        )
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    cfg = checkpoint.weights.config
    stats = checkpoint.normalization
    doc = {
        "schema": SCHEMA,
        "config_hash": checkpoint.config_hash,
        "network": {
            "input_dim": cfg.input_dim,
            "hidden_layers": list(cfg.hidden_layers),
            "components": cfg.components,
            "output_dim": cfg.output_dim,
            "sigma_floor": cfg.sigma_floor,
            "seed": cfg.seed,
        },
        "normalization": {
            "input_mean": _encode(stats.input_mean),
            "input_std": _encode(stats.input_std),
            "constant_dims": [int(v) for v in stats.constant_dims],
            "min_radius": stats.min_radius,
            "max_radius": stats.max_radius,
        },
        "grid": {
            "start_hz": checkpoint.grid.start_hz,
            "step_hz": checkpoint.grid.step_hz,
            "count": checkpoint.grid.count,
        },
        "geometry": {
            "layer_length": checkpoint.layer_length,
            "host_radius": checkpoint.host_radius,
        },
        "medium": {
            "sound_speed": checkpoint.medium.sound_speed,
            "density": checkpoint.medium.density,
        },
        "weights": [
            {"shape": list(a.shape), "data": _encode(a)} for a in checkpoint.weights.arrays
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    if doc.get("schema") != SCHEMA:
        raise CheckpointError(
            f"unsupported checkpoint schema {doc.get('schema')!r}, expected {SCHEMA!r}"
        )
    try:
        net = doc["network"]
        config = NetworkConfig(
            input_dim=net["input_dim"],
            hidden_layers=tuple(net["hidden_layers"]),
            components=net["components"],
            output_dim=net["output_dim"],
            sigma_floor=net["sigma_floor"],
            seed=net["seed"],
        )
        blocks = doc["weights"]
        expected_shapes = []
        for fan_in, fan_out in layer_dims(config):
            expected_shapes.extend([(fan_in, fan_out), (fan_out,)])
        if len(blocks) != len(expected_shapes):
            raise CheckpointError(
                f"{len(blocks)} weight blocks do not match the declared network "
                f"({len(expected_shapes)} expected)"
            )
        arrays = []
        for block, shape in zip(blocks, expected_shapes):
            if tuple(block["shape"]) != shape:
                raise CheckpointError(
                    f"weight block shape {tuple(block['shape'])} does not match the "
                    f"declared network (expected {shape})"
                )
            arrays.append(_decode(block["data"], shape))

        norm = doc["normalization"]
        stats = NormalizationStats(
            input_mean=_decode(norm["input_mean"], (config.input_dim,)),
            input_std=_decode(norm["input_std"], (config.input_dim,)),
            constant_dims=np.array(norm["constant_dims"], dtype=bool),
            min_radius=float(norm["min_radius"]),
            max_radius=float(norm["max_radius"]),
        )
        grid = FrequencyGrid(
            doc["grid"]["start_hz"], doc["grid"]["step_hz"], doc["grid"]["count"]
        )
        medium = PhysicalMedium(doc["medium"]["sound_speed"], doc["medium"]["density"])
        return Checkpoint(
            weights=NetworkWeights(config, arrays),
            normalization=stats,
            grid=grid,
            layer_length=float(doc["geometry"]["layer_length"]),
            host_radius=float(doc["geometry"]["host_radius"]),
            medium=medium,
            config_hash=doc.get("config_hash", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
