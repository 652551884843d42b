"""Inverse design: from a conditional mixture to ranked, verified candidates.

Modes of the mixture density are the most confident design suggestions. They
are found by the Gaussian mean-shift fixed point

    y  <-  (sum_i r_i(y) mu_i / sigma_i^2) / (sum_i r_i(y) / sigma_i^2),

with responsibilities r_i(y) = pi_i N(y; mu_i, sigma_i^2 I), started once
from every component mean. Every mixture mode is a convex combination of the
means, so these starts cover all of them. Converged points are deduplicated,
thresholded against the strongest mode, denormalized to millimetres, pushed
through the forward model, and ranked by how well their spectra fit the
target. Random designs can also be drawn by ancestral sampling.
"""

import json
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .errors import InvalidArgumentError, InvalidCandidateError, InvalidConfigError, InvalidInputError
from .forward import StructureGeometry, spectrum
from .network import LOG_2PI, MixtureParams, forward

GRADIENT_TOLERANCE = 1e-6
_DENSITY_CHUNK = 65536


@dataclass(frozen=True)
class ModeSearchConfig:
    max_iterations: int = 500
    tolerance: float = 1e-8  # step norm, normalized units
    merge_radius: float = 1e-3  # normalized units
    min_relative_density: float = 1e-4  # fraction of the strongest mode

    def __post_init__(self):
        values = (
            self.max_iterations,
            self.tolerance,
            self.merge_radius,
            self.min_relative_density,
        )
        if any(v <= 0 for v in values):
            raise InvalidConfigError(f"mode search settings must all be positive, got {values}")


@dataclass
class Mode:
    point: np.ndarray  # normalized d-vector
    density: float
    converged: bool
    iterations: int


@dataclass
class DesignCandidate:
    radii_mm: np.ndarray
    density_at_mode: float
    quality_factor: float
    mse: float | None
    predicted_spectrum: np.ndarray | None
    mode_converged: bool
    iterations: int
    in_bounds: bool


def _log_density_batch(params: MixtureParams, Y):
    d = params.output_dim
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi)
    diff = Y[:, None, :] - params.mu[None, :, :]
    sq = np.einsum("nmd,nmd->nm", diff, diff)
    log_n = -0.5 * d * LOG_2PI - d * np.log(params.sigma) - sq / (2.0 * params.sigma**2)
    joint = log_pi[None, :] + log_n
    amax = joint.max(axis=1, keepdims=True)
    with np.errstate(under="ignore"):
        return amax[:, 0] + np.log(np.exp(joint - amax).sum(axis=1)), joint


def density(params: MixtureParams, y) -> float:
    """Mixture density at one point; equals exp(-nll) by construction."""
    return float(density_batch(params, np.asarray(y, dtype=float)[None])[0])


def density_batch(params: MixtureParams, Y) -> np.ndarray:
    """Mixture density at many points, evaluated in bounded-memory chunks."""
    Y = np.asarray(Y, dtype=float)
    out = np.empty(Y.shape[0])
    for lo in range(0, Y.shape[0], _DENSITY_CHUNK):
        sl = slice(lo, lo + _DENSITY_CHUNK)
        log_rho, _ = _log_density_batch(params, Y[sl])
        with np.errstate(under="ignore"):
            out[sl] = np.exp(log_rho)
    return out


def grad_log_density(params: MixtureParams, y) -> np.ndarray:
    """Gradient of log density: sum_i w_i (mu_i - y) / sigma_i^2 with posterior w."""
    y = np.asarray(y, dtype=float)
    log_rho, joint = _log_density_batch(params, y[None])
    with np.errstate(under="ignore"):
        w = np.exp(joint[0] - log_rho[0])
    return (w / params.sigma**2) @ (params.mu - y)


def _mean_shift(params: MixtureParams, start, config: ModeSearchConfig):
    """Fixed-point iteration from one start; returns (point, converged, iters).

    Convergence requires both a small step and a small log-density gradient;
    the two differ by the local inverse-variance scale, so the gradient check
    may demand a few extra contractions beyond the step tolerance."""
    y = np.array(start, dtype=float)
    inv_var = 1.0 / params.sigma**2
    for iteration in range(1, config.max_iterations + 1):
        _, joint = _log_density_batch(params, y[None])
        shifted = joint[0] - joint[0].max()
        with np.errstate(under="ignore"):
            w = np.exp(shifted) * inv_var
        y_next = (w @ params.mu) / w.sum()
        step = float(np.linalg.norm(y_next - y))
        y = y_next
        if step < config.tolerance:
            grad_norm = float(np.linalg.norm(grad_log_density(params, y)))
            if grad_norm < GRADIENT_TOLERANCE:
                return y, True, iteration
    return y, False, config.max_iterations


def find_modes(params: MixtureParams, config: ModeSearchConfig = ModeSearchConfig()):
    """Local maxima of the mixture density, strongest first.

    One mean-shift run per component mean; non-converged runs are kept but
    flagged. Points closer than the merge radius collapse onto the densest
    representative, and modes weaker than min_relative_density times the
    strongest are dropped.
    """
    raw = []
    for start in params.mu:
        point, converged, iterations = _mean_shift(params, start, config)
        raw.append(Mode(point, density(params, point), converged, iterations))

    raw.sort(key=lambda mode: (-mode.density, tuple(mode.point)))
    merged: list[Mode] = []
    for mode in raw:
        if all(
            np.linalg.norm(mode.point - kept.point) >= config.merge_radius
            for kept in merged
        ):
            merged.append(mode)
    if not merged:
        return []
    threshold = config.min_relative_density * merged[0].density
    return [mode for mode in merged if mode.density >= threshold]


def sample(params: MixtureParams, n: int, seed: int) -> np.ndarray:
    """Ancestral sampling: component index from pi, then an isotropic draw."""
    if n < 1:
        raise InvalidArgumentError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    weights = params.pi / params.pi.sum()
    idx = rng.choice(params.components, size=n, p=weights)
    noise = rng.standard_normal((n, params.output_dim))
    return params.mu[idx] + params.sigma[idx, None] * noise


def spectrum_mse(radii_mm, target, model: Checkpoint) -> tuple[float, np.ndarray]:
    """Forward-verify a candidate: (MSE against target, predicted spectrum)."""
    geometry = StructureGeometry(tuple(radii_mm), model.layer_length, model.host_radius)
    predicted = spectrum(geometry, model.grid, model.medium)
    return float(np.mean((predicted - np.asarray(target, dtype=float)) ** 2)), predicted


def quality_factor(radii_mm, target, model: Checkpoint) -> float:
    """Fit score 1 / (1 + MSE) in (0, 1]; 1 only for an exact spectrum match."""
    radii_mm = np.asarray(radii_mm, dtype=float)
    stats = model.normalization
    if np.any(radii_mm < stats.min_radius) or np.any(radii_mm > stats.max_radius):
        raise InvalidCandidateError(
            f"candidate radii {radii_mm.tolist()} fall outside the design bounds "
            f"[{stats.min_radius}, {stats.max_radius}] mm"
        )
    mse, _ = spectrum_mse(radii_mm, target, model)
    return 1.0 / (1.0 + mse)


def design(
    model: Checkpoint,
    target,
    config: ModeSearchConfig = ModeSearchConfig(),
) -> list[DesignCandidate]:
    """Ranked design candidates for one target spectrum.

    Modes outside the design bounds are reported and flagged, never clipped;
    they are still forward-verified whenever the radii remain physically
    evaluable (strictly positive). Ranking is by quality factor, then mode
    density, then lexicographic radii.
    """
    target = np.asarray(target, dtype=float)
    expected = model.weights.config.input_dim
    if target.shape != (expected,):
        raise InvalidInputError(
            f"target spectrum must have dimension {expected}, got shape {target.shape}"
        )

    stats = model.normalization
    params = forward(model.weights, stats.normalize_inputs(target))
    candidates = []
    for mode in find_modes(params, config):
        radii = stats.denormalize_outputs(mode.point)
        in_bounds = bool(
            np.all(radii >= stats.min_radius) and np.all(radii <= stats.max_radius)
        )
        if np.all(radii > 0):
            mse, predicted = spectrum_mse(radii, target, model)
            qf = 1.0 / (1.0 + mse)
        else:
            mse, predicted, qf = None, None, 0.0
        candidates.append(
            DesignCandidate(
                radii_mm=radii,
                density_at_mode=mode.density,
                quality_factor=qf,
                mse=mse,
                predicted_spectrum=predicted,
                mode_converged=mode.converged,
                iterations=mode.iterations,
                in_bounds=in_bounds,
            )
        )
    candidates.sort(
        key=lambda c: (-c.quality_factor, -c.density_at_mode, tuple(c.radii_mm))
    )
    return candidates


def report_document(candidates, target_source: str = "", config_hash: str = "") -> dict:
    return {
        "schema": "pdn-report-v1",
        "config_hash": config_hash,
        "target_source": target_source,
        "candidates": [
            {
                "radii_mm": [float(v) for v in c.radii_mm],
                "density_at_mode": c.density_at_mode,
                "quality_factor": c.quality_factor,
                "mse": c.mse,
                "mode_converged": c.mode_converged,
                "iterations": c.iterations,
                "in_bounds": c.in_bounds,
            }
            for c in candidates
        ],
    }


def write_report(candidates, path, target_source: str = "", config_hash: str = "") -> None:
    """Candidate report as deterministic JSON (one record per candidate)."""
    doc = report_document(candidates, target_source, config_hash)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
