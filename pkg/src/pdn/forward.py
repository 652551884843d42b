"""Analytic forward model: plane-wave transmission of stepped cylindrical ducts.

A structure is a chain of constant-radius cylindrical segments embedded in a
uniform host duct. Each segment is a reciprocal acoustic two-port relating
(pressure, volume velocity) at its inlet to its outlet through the four-pole
matrix

    [[cos(kL),       i Z sin(kL)],
     [i sin(kL) / Z, cos(kL)   ]]

with wavenumber k = 2 pi f / c, segment length L in meters, and plane-wave
impedance Z = rho c / S for cross-section S. Segment matrices multiply
left-to-right in propagation order; the power transmittance of the stack
between matched host leads of impedance Z0 is |t|^2 with

    t = 2 / (T11 + T12 / Z0 + T21 * Z0 + T22).

The model is lossless and strictly one-dimensional: no thermo-viscous
dissipation, no higher-order duct modes. Two exact consequences are relied on
throughout the pipeline: transmission is invariant under layer reversal
(reciprocity), and transmittance never exceeds 1 (passivity).
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidConfigError,
    InvalidGeometryError,
    NumericalConsistencyError,
)

# Largest tolerated passivity overrun before a value is treated as a physics
# bug rather than rounding noise.
PASSIVITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PhysicalMedium:
    """Acoustic medium, default dry air near 20 C."""

    sound_speed: float = 343.0  # m/s
    density: float = 1.21  # kg/m^3

    def __post_init__(self):
        if self.sound_speed <= 0 or self.density <= 0:
            raise InvalidConfigError(
                f"medium requires positive sound_speed and density, got "
                f"c={self.sound_speed}, rho={self.density}"
            )


AIR = PhysicalMedium()


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid, default 20 Hz to 5000 Hz in 20 Hz steps."""

    start_hz: float = 20.0
    step_hz: float = 20.0
    count: int = 250

    def __post_init__(self):
        if self.start_hz <= 0 or self.step_hz <= 0 or self.count < 1:
            raise InvalidConfigError(
                f"grid requires start_hz > 0, step_hz > 0, count >= 1, got "
                f"({self.start_hz}, {self.step_hz}, {self.count})"
            )

    def frequencies(self) -> np.ndarray:
        return self.start_hz + self.step_hz * np.arange(self.count, dtype=float)


@dataclass(frozen=True)
class StructureGeometry:
    """Stepped duct: per-layer radii (mm), shared layer length (mm), host radius (mm).

    Radii must be strictly positive. Radii above the host radius describe
    expansion segments; they are valid for plane-wave evaluation but lie
    outside the sampled design domain, which dataset generation enforces
    separately.
    """

    radii: tuple[float, ...]
    layer_length: float = 10.0
    host_radius: float = 14.5

    def __post_init__(self):
        radii = tuple(float(r) for r in np.atleast_1d(np.asarray(self.radii, dtype=float)))
        object.__setattr__(self, "radii", radii)
        if len(radii) == 0:
            raise InvalidGeometryError("structure needs at least one layer")
        if not all(np.isfinite(radii)) or min(radii) <= 0:
            raise InvalidGeometryError(f"all radii must be finite and > 0, got {radii}")
        if not np.isfinite(self.layer_length) or self.layer_length <= 0:
            raise InvalidGeometryError(f"layer_length must be > 0, got {self.layer_length}")
        if not np.isfinite(self.host_radius) or self.host_radius <= 0:
            raise InvalidGeometryError(f"host_radius must be > 0, got {self.host_radius}")

    @property
    def layers(self) -> int:
        return len(self.radii)

    def reversed(self) -> "StructureGeometry":
        """Same stack traversed in the opposite direction."""
        return StructureGeometry(self.radii[::-1], self.layer_length, self.host_radius)


def _duct_impedance(radius_mm: float, medium: PhysicalMedium) -> float:
    area_m2 = np.pi * (radius_mm * 1e-3) ** 2
    return medium.sound_speed * medium.density / area_m2


def _segment_matrices(radius_mm, length_mm, frequencies_hz, medium) -> np.ndarray:
    """Four-pole matrices of one segment, one 2x2 block per frequency."""
    freqs = np.asarray(frequencies_hz, dtype=float)
    z = _duct_impedance(radius_mm, medium)
    kl = 2.0 * np.pi * freqs / medium.sound_speed * (length_mm * 1e-3)
    out = np.empty(freqs.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.cos(kl)
    out[..., 0, 1] = 1j * z * np.sin(kl)
    out[..., 1, 0] = 1j * np.sin(kl) / z
    out[..., 1, 1] = np.cos(kl)
    return out


def segment_matrix(
    radius_mm: float,
    length_mm: float,
    frequency_hz: float,
    medium: PhysicalMedium = AIR,
) -> np.ndarray:
    """Two-port matrix of a single uniform segment at one frequency."""
    if not (radius_mm > 0 and length_mm > 0 and frequency_hz > 0):
        raise InvalidGeometryError(
            f"segment requires positive radius, length, frequency, got "
            f"({radius_mm}, {length_mm}, {frequency_hz})"
        )
    return _segment_matrices(radius_mm, length_mm, np.asarray(frequency_hz), medium)


def cascade(matrices) -> np.ndarray:
    """Left-to-right product of two-port matrices in propagation order."""
    matrices = list(matrices)
    if not matrices:
        raise InvalidArgumentError("cascade requires a non-empty list of matrices")
    return reduce(np.matmul, matrices)


def _total_matrix(structure: StructureGeometry, frequencies_hz, medium) -> np.ndarray:
    blocks = [
        _segment_matrices(r, structure.layer_length, frequencies_hz, medium)
        for r in structure.radii
    ]
    return cascade(blocks)


def _power_transmittance(total, z0, frequencies_hz) -> np.ndarray:
    """|t|^2 of a cascaded stack between matched leads, with passivity check."""
    t = 2.0 / (
        total[..., 0, 0]
        + total[..., 0, 1] / z0
        + total[..., 1, 0] * z0
        + total[..., 1, 1]
    )
    tau = np.abs(t) ** 2
    overrun = tau - 1.0
    worst = int(np.argmax(overrun))
    if overrun.flat[worst] > PASSIVITY_TOLERANCE:
        freqs = np.broadcast_to(np.asarray(frequencies_hz, dtype=float), tau.shape)
        raise NumericalConsistencyError(
            f"transmittance {tau.flat[worst]!r} exceeds 1 + {PASSIVITY_TOLERANCE} "
            f"at {freqs.flat[worst]} Hz; the two-port cascade is not passive"
        )
    # Rounding overruns within tolerance are clamped; larger ones raised above.
    return np.minimum(tau, 1.0)


def transmittance(
    structure: StructureGeometry,
    frequency_hz: float,
    medium: PhysicalMedium = AIR,
) -> float:
    """Power transmittance of the structure at one frequency, in [0, 1]."""
    if not (np.isfinite(frequency_hz) and frequency_hz > 0):
        raise InvalidGeometryError(f"frequency must be finite and > 0, got {frequency_hz}")
    total = _total_matrix(structure, np.asarray(frequency_hz), medium)
    z0 = _duct_impedance(structure.host_radius, medium)
    return float(_power_transmittance(total, z0, np.asarray(frequency_hz)))


def spectrum(
    structure: StructureGeometry,
    grid: FrequencyGrid = FrequencyGrid(),
    medium: PhysicalMedium = AIR,
) -> np.ndarray:
    """Power transmittance on every grid frequency; shape (grid.count,)."""
    freqs = grid.frequencies()
    total = _total_matrix(structure, freqs, medium)
    z0 = _duct_impedance(structure.host_radius, medium)
    return _power_transmittance(total, z0, freqs)
