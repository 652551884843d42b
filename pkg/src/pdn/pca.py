"""Principal-plane visualization of the learned design-space mixture.

A 2-component PCA (optionally weighted) maps the d-dimensional output space
to a plane. The density map is the slice of the full d-dimensional mixture
through that plane, not a marginal: slices preserve the positions of
in-plane modes and are cheap to evaluate. Exports are a CSV matrix and a
standalone SVG with filled contours at quantile levels.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, InvalidArgumentError
from .inverse import density_batch
from .network import MixtureParams


@dataclass
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (2, d), orthonormal rows
    explained_variance: np.ndarray  # (2,), descending


@dataclass
class DensityMap:
    x: np.ndarray  # (nx,) cell-center coordinates, first principal axis
    y: np.ndarray  # (ny,) cell-center coordinates, second principal axis
    values: np.ndarray  # (ny, nx) mixture density on the slice
    markers: np.ndarray  # (k, 2) projected mode positions


def fit_pca(points, weights=None) -> PcaModel:
    """Top-2 principal components of (optionally weighted) points.

    Sign convention: the largest-magnitude entry of each component is
    positive, so results are reproducible across eigen-solver builds.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 3:
        raise InvalidArgumentError(f"need at least 3 points, got shape {points.shape}")
    if points.shape[1] < 2:
        raise InvalidArgumentError(f"need dimension >= 2, got {points.shape[1]}")

    if weights is None:
        w = np.full(points.shape[0], 1.0 / points.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (points.shape[0],) or np.any(w < 0) or w.sum() <= 0:
            raise InvalidArgumentError("weights must be non-negative, one per point")
        w = w / w.sum()

    mean = w @ points
    centered = points - mean
    cov = (centered * w[:, None]).T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]

    scale = max(float(eigvals[0]), 0.0)
    nonzero = int(np.sum(eigvals > scale * 1e-12)) if scale > 0 else 0
    if nonzero < 2:
        raise DegenerateDataError(
            f"points span fewer than 2 directions (eigenvalues {eigvals.tolist()})"
        )

    components = eigvecs[:, :2].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance=np.maximum(eigvals[:2], 0.0),
    )


def project(model: PcaModel, points) -> np.ndarray:
    """Coordinates in the principal plane; accepts one point or a batch."""
    return (np.asarray(points, dtype=float) - model.mean) @ model.components.T


def lift(model: PcaModel, coords) -> np.ndarray:
    """Back from plane coordinates to the full space (on the plane)."""
    return np.asarray(coords, dtype=float) @ model.components + model.mean


def density_map(
    params: MixtureParams,
    model: PcaModel,
    resolution: int = 200,
    modes=None,
    margin_sigmas: float = 4.0,
) -> DensityMap:
    """Mixture density on a cell-centered grid in the principal plane.

    The extent covers the projections of all component means, padded by
    margin_sigmas times the largest deviation, so every mode marker (modes
    lie in the convex hull of the means) falls inside the map.
    """
    if resolution < 2:
        raise InvalidArgumentError(f"resolution must be >= 2, got {resolution}")
    projected_means = project(model, params.mu)
    pad = margin_sigmas * float(params.sigma.max())
    lo = projected_means.min(axis=0) - pad
    hi = projected_means.max(axis=0) + pad

    def centers(a, b):
        step = (b - a) / resolution
        return a + step * (np.arange(resolution) + 0.5)

    x = centers(lo[0], hi[0])
    y = centers(lo[1], hi[1])
    gx, gy = np.meshgrid(x, y)
    plane_points = np.column_stack([gx.ravel(), gy.ravel()])
    values = density_batch(params, lift(model, plane_points)).reshape(resolution, resolution)

    markers = (
        project(model, np.asarray(modes, dtype=float))
        if modes is not None and len(modes)
        else np.zeros((0, 2))
    )
    return DensityMap(x=x, y=y, values=values, markers=np.atleast_2d(markers))


def write_density_csv(dmap: DensityMap, path) -> None:
    """Matrix CSV: header row of x-coordinates, first column of y-coordinates."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("y\\x," + ",".join(f"{v:.17g}" for v in dmap.x) + "\n")
        for yi, row in zip(dmap.y, dmap.values):
            fh.write(f"{yi:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def write_density_svg(dmap: DensityMap, path) -> None:
    """Standalone SVG: filled contours at 10 quantile levels plus mode markers."""
    from matplotlib.figure import Figure

    levels = np.unique(np.quantile(dmap.values, np.linspace(0.0, 1.0, 11)))
    if levels.size < 2:
        levels = np.array([dmap.values.min(), dmap.values.min() + 1.0])

    fig = Figure(figsize=(6.4, 5.2))
    ax = fig.add_subplot()
    filled = ax.contourf(dmap.x, dmap.y, dmap.values, levels=levels, extend="max")
    fig.colorbar(filled, ax=ax, label="mixture density (slice)")
    if dmap.markers.size:
        ax.plot(
            dmap.markers[:, 0],
            dmap.markers[:, 1],
            "wx",
            markersize=9,
            markeredgewidth=2,
        )
    ax.set_xlabel("principal axis 1")
    ax.set_ylabel("principal axis 2")
    fig.savefig(path, format="svg")
