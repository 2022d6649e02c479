"""Rectangular wavelength grids and the wavelength/frequency mapping."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DomainError

C_LIGHT = 299_792_458.0  # m/s
TWO_PI_C = 2.0 * np.pi * C_LIGHT

# relative window width above which the affine wavelength/frequency map is refused
MAX_LINEARIZED_SPAN = 0.01


def wavelength_to_omega(wavelength_nm):
    """Angular frequency (rad/s) of a vacuum wavelength in nm."""
    return TWO_PI_C / (np.asarray(wavelength_nm, dtype=float) * 1e-9)


def omega_to_wavelength(omega):
    """Vacuum wavelength in nm of an angular frequency in rad/s."""
    return TWO_PI_C / np.asarray(omega, dtype=float) * 1e9


@dataclass(frozen=True)
class SpectralGrid:
    """Signal (axis 1) x idler (axis 2) wavelength grid, both ascending, in nm.

    Sample ``k`` of an axis sits at ``start + k * pitch``.  With ``linearized``
    set, frequencies come from the affine expansion of ``2 pi c / lambda``
    around the axis center, so equal wavelength steps are equal frequency
    steps; otherwise the exact inverse relation is used.
    """

    axis1_start: float
    axis1_pitch: float
    axis1_count: int
    axis2_start: float
    axis2_pitch: float
    axis2_count: int
    linearized: bool = True

    def __post_init__(self):
        for name in ("axis1_start", "axis2_start", "axis1_pitch", "axis2_pitch"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        for name in ("axis1_count", "axis2_count"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise DomainError(f"{name} must be an integer >= 2, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.linearized:
            for axis in (1, 2):
                span = self.span(axis) / self.center(axis)
                if span > MAX_LINEARIZED_SPAN:
                    raise DomainError(
                        f"axis {axis} spans {span:.3%} of its center wavelength; "
                        "too wide for the linearized frequency map"
                    )

    @classmethod
    def from_window(cls, axis1: tuple[float, float], axis2: tuple[float, float],
                    shape: tuple[int, int], linearized: bool = True) -> "SpectralGrid":
        """Grid whose first and last samples sit on the given window edges."""
        (a0, a1), (b0, b1) = axis1, axis2
        m, n = shape
        return cls(a0, (a1 - a0) / (m - 1), m, b0, (b1 - b0) / (n - 1), n, linearized)

    @classmethod
    def reference_window(cls) -> "SpectralGrid":
        """The 141 x 501 window over [1511.4, 1512.8] x [1523.8, 1525.2] nm."""
        return cls(1511.4, 0.01, 141, 1523.8, 0.0028, 501)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.axis1_count, self.axis2_count)

    def _axis(self, axis: int) -> tuple[float, float, int]:
        if axis == 1:
            return self.axis1_start, self.axis1_pitch, self.axis1_count
        if axis == 2:
            return self.axis2_start, self.axis2_pitch, self.axis2_count
        raise ValueError(f"axis must be 1 or 2, got {axis!r}")

    def wavelengths(self, axis: int) -> np.ndarray:
        start, pitch, count = self._axis(axis)
        return start + pitch * np.arange(count)

    def end(self, axis: int) -> float:
        start, pitch, count = self._axis(axis)
        return start + pitch * (count - 1)

    def span(self, axis: int) -> float:
        return self.end(axis) - self._axis(axis)[0]

    def center(self, axis: int) -> float:
        return 0.5 * (self._axis(axis)[0] + self.end(axis))

    def omegas(self, axis: int) -> np.ndarray:
        """Angular frequencies of the samples (descending, since wavelength ascends)."""
        lam = self.wavelengths(axis)
        if not self.linearized:
            return wavelength_to_omega(lam)
        lc = self.center(axis)
        return wavelength_to_omega(lc) - TWO_PI_C / (lc * 1e-9) ** 2 * (lam - lc) * 1e-9

    def omega_pitch(self, axis: int) -> float:
        """Magnitude of the frequency step between neighbouring samples (rad/s)."""
        _, pitch, _ = self._axis(axis)
        lc = self.center(axis)
        return TWO_PI_C * pitch * 1e-9 / (lc * 1e-9) ** 2

    @property
    def cell_weight(self) -> float:
        """Riemann weight d(omega_1) d(omega_2) of one pixel."""
        return self.omega_pitch(1) * self.omega_pitch(2)

    def subgrid(self, rows: slice, cols: slice) -> "SpectralGrid":
        i = range(self.axis1_count)[rows]
        j = range(self.axis2_count)[cols]
        if i.step != 1 or j.step != 1:
            raise ValueError("subgrid slices must be contiguous")
        return replace(
            self,
            axis1_start=self.axis1_start + i.start * self.axis1_pitch,
            axis1_count=len(i),
            axis2_start=self.axis2_start + j.start * self.axis2_pitch,
            axis2_count=len(j),
        )

    def binned(self, bx: int, by: int) -> "SpectralGrid":
        """Grid of a (bx, by) binning; each new sample sits at its block's center."""
        return replace(
            self,
            axis1_start=self.axis1_start + 0.5 * (bx - 1) * self.axis1_pitch,
            axis1_pitch=self.axis1_pitch * bx,
            axis1_count=self.axis1_count // bx,
            axis2_start=self.axis2_start + 0.5 * (by - 1) * self.axis2_pitch,
            axis2_pitch=self.axis2_pitch * by,
            axis2_count=self.axis2_count // by,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralGrid":
        return cls(**data)
