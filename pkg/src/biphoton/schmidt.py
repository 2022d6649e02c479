"""Schmidt number, its intensity-only lower bound, and DFG data conditioning."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DomainError, NumericalError, TransmittanceError, ValidationError
from .grid import SpectralGrid
from .instruments import MeasurementRecord
from .spectral import JointAmplitude

COVERAGE_THRESHOLD = 0.95
RANK_RTOL = 1e-14
# below this estimated coverage a record is treated as containing no emission;
# background-only records score under 0.05, noisy records of real emission
# stay above 0.35 even before conditioning
NO_SIGNAL_COVERAGE = 0.2


class CoverageWarning(UserWarning):
    pass


@dataclass
class AmplitudeMatrix:
    """Real non-negative modulus amplitude ``C |phi|`` on a wavelength grid.

    With ``frequency_ordered`` set, row/column 0 is the highest frequency
    (longest wavelength is last in the grid, first in the matrix).
    """

    values: np.ndarray
    grid: SpectralGrid
    frequency_ordered: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValidationError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DomainError("amplitude entries must be finite and non-negative")
        if not np.any(self.values > 0):
            raise CoverageError("amplitude matrix is all zero; no emission in the window")

    def wavelength_ordered(self) -> np.ndarray:
        return self.values[::-1, ::-1] if self.frequency_ordered else self.values


@dataclass
class SchmidtResult:
    K: float
    coefficients: np.ndarray
    mode_count: int


def _matrix(amp) -> np.ndarray:
    if isinstance(amp, (JointAmplitude, AmplitudeMatrix)):
        g = amp.values
    else:
        g = np.asarray(amp)
    if g.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericalError("matrix has non-finite entries")
    if not np.any(g != 0):
        raise CoverageError("matrix is all zero; no emission in the window")
    return g


def schmidt_decompose(amp) -> SchmidtResult:
    """Schmidt coefficients from the singular values of the amplitude matrix."""
    g = _matrix(amp)
    try:
        s = np.linalg.svd(g, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular value decomposition failed: {exc}") from exc
    c = s / math.sqrt(np.sum(s * s))
    K = 1.0 / float(np.sum(c ** 4))
    return SchmidtResult(K, c, int(np.count_nonzero(s > RANK_RTOL * s[0])))


def k_trace(amp) -> float:
    """Schmidt number from ``Tr((g^+ g)^2) / Tr(g^+ g)^2`` without a decomposition."""
    g = _matrix(amp)
    gram = g @ g.conj().T if g.shape[0] <= g.shape[1] else g.conj().T @ g
    tr = np.trace(gram).real
    return float(tr * tr / np.sum(np.abs(gram) ** 2))


def k_min(amp) -> float:
    """Lower bound on K from the modulus of the amplitude alone."""
    return k_trace(np.abs(_matrix(amp)))


def measurement_to_amplitude(rec: MeasurementRecord) -> AmplitudeMatrix:
    """Filter-normalized square root of the record, reindexed to ascending frequency."""
    trans = rec.transmittance
    bad = np.flatnonzero(~(trans > 0) | rec.flagged)
    if bad.size:
        raise TransmittanceError(
            f"filter transmittance vanishes or underflows at seed step(s) {bad.tolist()}"
        )
    r = np.maximum(rec.intensity, 0.0)
    f = np.sqrt(r[::-1, ::-1] / trans[::-1, None])
    return AmplitudeMatrix(f, rec.grid, frequency_ordered=True)


def bin_matrix(R: np.ndarray, bx: int, by: int) -> np.ndarray:
    """Sum ``bx x by`` blocks; trailing partial rows and columns are dropped."""
    R = np.asarray(R)
    if int(bx) != bx or int(by) != by or bx < 1 or by < 1:
        raise DomainError(f"bin sizes must be positive integers, got ({bx}, {by})")
    m, n = R.shape[0] // bx, R.shape[1] // by
    if m == 0 or n == 0:
        raise DomainError(f"bins ({bx}, {by}) exceed matrix shape {R.shape}")
    return R[: m * bx, : n * by].reshape(m, bx, n, by).sum(axis=(1, 3))


def _frame_pixels(pitch: float, width: float) -> int:
    # pixels strictly closer than ``width`` to the edge; tolerant to pitch rounding
    return int(math.ceil(width / pitch - 1e-6))


def crop_frame(R: np.ndarray, grid: SpectralGrid, frame_width: float) -> tuple[np.ndarray, SpectralGrid]:
    """Drop every pixel within ``frame_width`` nm of a window edge."""
    if frame_width < 0:
        raise DomainError("frame width must be non-negative")
    if frame_width >= 0.5 * min(grid.span(1), grid.span(2)):
        raise DomainError(f"frame width {frame_width} nm leaves no data")
    k1 = _frame_pixels(grid.axis1_pitch, frame_width)
    k2 = _frame_pixels(grid.axis2_pitch, frame_width)
    rows = slice(k1, grid.axis1_count - k1)
    cols = slice(k2, grid.axis2_count - k2)
    return np.asarray(R)[rows, cols], grid.subgrid(rows, cols)


def total_intensity(amp, grid: SpectralGrid | None = None) -> float:
    """Riemann sum of the joint spectral density over the window.

    ``amp`` is a :class:`JointAmplitude`, or a density matrix together with
    its grid.
    """
    if isinstance(amp, JointAmplitude):
        return amp.norm()
    if grid is None:
        raise ValidationError("a density matrix needs its grid")
    jsd = np.asarray(amp)
    if np.iscomplexobj(jsd):
        raise ValidationError("pass a JointAmplitude for complex amplitudes")
    return float(np.sum(jsd) * grid.cell_weight)


def crop_record(rec: MeasurementRecord, frame_width: float) -> MeasurementRecord:
    R, grid = crop_frame(rec.intensity, rec.grid, frame_width)
    k1 = _frame_pixels(rec.grid.axis1_pitch, frame_width)
    rows = slice(k1, rec.grid.axis1_count - k1)
    return MeasurementRecord(grid, R, rec.transmittance[rows], rec.p_ref[rows], rec.flagged[rows],
                             dict(rec.meta))


def bin_record(rec: MeasurementRecord, bx: int, by: int) -> MeasurementRecord:
    """Bin intensities; each binned seed step takes the summed transmittance of its block.

    The ratio of summed intensity to summed transmittance is the
    transmittance-weighted mean of the underlying normalized signal.
    """
    R = bin_matrix(rec.intensity, bx, by)
    m = R.shape[0]
    trans = rec.transmittance[: m * bx].reshape(m, bx).sum(axis=1)
    p_ref = rec.p_ref[: m * bx].reshape(m, bx).sum(axis=1)
    flagged = rec.flagged[: m * bx].reshape(m, bx).any(axis=1)
    return MeasurementRecord(rec.grid.binned(bx, by), R, trans, p_ref, flagged, dict(rec.meta))


def coverage_estimate(density: np.ndarray) -> float:
    """Containment of a measured density inside its window.

    Compares the mean of the outermost pixel ring with the mean over the
    whole matrix: 1 when the edges are dark, 0 when the data is as bright
    at the edges as on average (e.g. pure background).
    """
    d = np.maximum(np.asarray(density, dtype=float), 0.0)
    mean = d.mean()
    if not mean > 0:
        return 0.0
    ring = np.concatenate([d[0], d[-1], d[1:-1, 0], d[1:-1, -1]])
    return float(np.clip(1.0 - ring.mean() / mean, 0.0, 1.0))


@dataclass
class PipelineStep:
    kind: str
    crop: float = 0.0
    bins: tuple[int, int] = (1, 1)

    def describe(self) -> dict:
        if self.kind == "crop":
            return {"step": "crop", "frame_nm": self.crop}
        return {"step": "bin", "bx": self.bins[0], "by": self.bins[1]}


def parse_pipeline(steps) -> list[PipelineStep]:
    """Validate pipeline steps given as dicts (``{"crop": 0.14}``, ``{"bin": [2, 7]}``)."""
    out = []
    for step in steps or []:
        if isinstance(step, PipelineStep):
            out.append(step)
        elif isinstance(step, dict) and set(step) == {"crop"}:
            width = float(step["crop"])
            if width < 0:
                raise ValidationError("crop width must be non-negative")
            out.append(PipelineStep("crop", crop=width))
        elif isinstance(step, dict) and set(step) == {"bin"}:
            bx, by = (int(b) for b in step["bin"])
            if bx < 1 or by < 1:
                raise ValidationError("bin sizes must be positive")
            out.append(PipelineStep("bin", bins=(bx, by)))
        else:
            raise ValidationError(f"unrecognised pipeline step {step!r}")
    return out


def condition_record(rec: MeasurementRecord, steps) -> MeasurementRecord:
    for step in parse_pipeline(steps):
        rec = crop_record(rec, step.crop) if step.kind == "crop" else bin_record(rec, *step.bins)
    return rec


@dataclass
class AnalysisReport:
    K_min: float
    coefficients: np.ndarray
    coverage: float
    grid: SpectralGrid
    pipeline: list
    K: float | None = None

    def to_dict(self) -> dict:
        out = {
            "K": self.K,
            "K_min": self.K_min,
            "coefficients": [float(c) for c in self.coefficients[:10]],
            "coverage": self.coverage,
            "grid": self.grid.to_dict(),
            "pipeline": list(self.pipeline),
        }
        if out["K"] is None:
            del out["K"]
        return out


def analyze_record(rec: MeasurementRecord, steps=()) -> AnalysisReport:
    """Condition a seed-sweep record and report its Schmidt-number lower bound.

    Raises :class:`CoverageError` when the conditioned data shows no contained
    emission; warns when its coverage estimate is below 0.95.
    """
    steps = parse_pipeline(steps)
    rec = condition_record(rec, steps)
    if not np.any(rec.intensity > 0):
        raise CoverageError("coverage failure: record holds no signal")
    amp = measurement_to_amplitude(rec)
    coverage = coverage_estimate(amp.values ** 2)
    if coverage < NO_SIGNAL_COVERAGE:
        raise CoverageError(f"coverage failure: estimated coverage {coverage:.3f}; emission not contained in window")
    if coverage < COVERAGE_THRESHOLD:
        warnings.warn(f"estimated coverage {coverage:.3f} below {COVERAGE_THRESHOLD}", CoverageWarning, stacklevel=2)
    result = schmidt_decompose(amp)
    return AnalysisReport(k_min(amp), result.coefficients, coverage, rec.grid,
                          [s.describe() for s in steps])
