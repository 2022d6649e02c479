"""Virtual SPDC coincidence spectrometer and DFG seed-sweep experiment."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import kernels
from .errors import CoverageError, DomainError, ValidationError
from .grid import SpectralGrid
from .spectral import JointAmplitude

FWHM_TO_SIGMA = 1.0 / math.sqrt(8.0 * math.log(2.0))
COVERAGE_THRESHOLD = 0.95
TRANSMITTANCE_FLOOR = 1e-6

# events generated per batch in the coincidence simulation
_EVENT_CHUNK = 1 << 20


@dataclass(frozen=True)
class InstrumentConfig:
    """Parameters of both characterization set-ups.

    Times are in ps, wavelengths in nm, dispersion in ps/nm.  ``seed_power``
    is the mean seed photon number per spectral bin and ``noise_floor`` the
    standard deviation of the additive analyzer noise, in record units.  The
    default noise floor is calibrated for the default seed power and pair
    probability so that the raw DFG lower bound lands near the measured one.
    ``tau_deadtime`` (0 = unknown) only caps the reported coincidence rate.
    """

    pair_probability: float = 1e-4
    detection_efficiency: tuple[float, float] = (0.2, 0.2)
    tau_pp: float = 200.0
    tau_apd: float = 250.0
    tau_tdc: float = 81.0
    dispersion: float = -1475.0
    spdc_pulses: int = 27_360_000_000  # 120 min at 3.8 MHz
    dfg_seed_step: float = 0.010
    dfg_analyzer_resolution: float = 0.020
    dfg_analyzer_points: int = 501
    filter_center: float = 1512.1
    filter_fwhm: float = 1.1
    seed_power: float = 1e9
    noise_floor: float = 1.37
    tau_deadtime: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "detection_efficiency", tuple(float(e) for e in self.detection_efficiency))
        if len(self.detection_efficiency) != 2:
            raise DomainError("detection_efficiency needs one value per arm")
        if not 0.0 <= self.pair_probability <= 1.0:
            raise DomainError(f"pair_probability must lie in [0, 1], got {self.pair_probability!r}")
        if not all(0.0 <= e <= 1.0 for e in self.detection_efficiency):
            raise DomainError("detection efficiencies must lie in [0, 1]")
        for name in ("tau_pp", "tau_apd", "tau_tdc", "dfg_analyzer_resolution", "noise_floor", "seed_power",
                     "tau_deadtime"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative")
        if self.dispersion == 0:
            raise DomainError("dispersion must be non-zero")
        if self.dfg_seed_step <= 0 or self.filter_fwhm <= 0:
            raise DomainError("seed step and filter width must be positive")
        if self.dfg_analyzer_points < 2 or self.spdc_pulses < 0:
            raise DomainError("analyzer needs at least two points and pulses must be non-negative")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise DomainError("rng_seed must be an unsigned 64-bit integer")

    @property
    def retention(self) -> float:
        return self.detection_efficiency[0] * self.detection_efficiency[1]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["detection_efficiency"] = list(self.detection_efficiency)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "InstrumentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown instrument parameters: {sorted(unknown)}")
        return cls(**data)


@dataclass
class CoincidenceHistogram:
    counts: np.ndarray
    grid: SpectralGrid
    pulses_simulated: int
    pairs_generated: int = 0
    pairs_detected: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MeasurementRecord:
    """Seed-sweep data: ``intensity[m, n]`` for seed step ``m`` and analyzer bin ``n``.

    ``transmittance`` and ``p_ref`` hold one value per seed step; ``flagged``
    marks steps whose filter transmittance underflowed.
    """

    grid: SpectralGrid
    intensity: np.ndarray
    transmittance: np.ndarray
    p_ref: np.ndarray | None = None
    flagged: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.intensity = np.asarray(self.intensity, dtype=float)
        self.transmittance = np.asarray(self.transmittance, dtype=float)
        m = self.grid.axis1_count
        if self.intensity.shape != self.grid.shape:
            raise ValidationError(f"intensity shape {self.intensity.shape} != grid shape {self.grid.shape}")
        if self.transmittance.shape != (m,):
            raise ValidationError(f"transmittance has {self.transmittance.size} entries, grid has {m} seed steps")
        if self.p_ref is None:
            self.p_ref = self.transmittance.copy()
        self.p_ref = np.asarray(self.p_ref, dtype=float)
        if self.p_ref.shape != (m,):
            raise ValidationError(f"p_ref has {self.p_ref.size} entries, grid has {m} seed steps")
        if self.flagged is None:
            self.flagged = self.transmittance < TRANSMITTANCE_FLOOR
        self.flagged = np.asarray(self.flagged, dtype=bool)


def spdc_resolution(cfg: InstrumentConfig) -> float:
    """Fiber-spectrometer resolution in nm from the timing jitters and dispersion."""
    return math.sqrt(cfg.tau_pp ** 2 + cfg.tau_apd ** 2 + cfg.tau_tdc ** 2) / abs(cfg.dispersion)


def spdc_pixel_pitch(cfg: InstrumentConfig) -> float:
    return cfg.tau_tdc / abs(cfg.dispersion)


def histogram_grid(amp_grid: SpectralGrid, cfg: InstrumentConfig) -> tuple[SpectralGrid, float, float]:
    """Histogram grid plus the lower wavelength edge of its first bin on each axis.

    Bins are ``tau_tdc / |D|`` wide and tile the pixel footprint of the
    amplitude window from its lower edge.  Without a TDC bin size the
    amplitude grid itself is used.
    """
    if cfg.tau_tdc == 0:
        return (amp_grid,
                amp_grid.axis1_start - 0.5 * amp_grid.axis1_pitch,
                amp_grid.axis2_start - 0.5 * amp_grid.axis2_pitch)
    pitch = spdc_pixel_pitch(cfg)
    edge1 = amp_grid.axis1_start - 0.5 * amp_grid.axis1_pitch
    edge2 = amp_grid.axis2_start - 0.5 * amp_grid.axis2_pitch
    n1 = int(math.floor(amp_grid.axis1_count * amp_grid.axis1_pitch / pitch))
    n2 = int(math.floor(amp_grid.axis2_count * amp_grid.axis2_pitch / pitch))
    grid = SpectralGrid(edge1 + 0.5 * pitch, pitch, n1, edge2 + 0.5 * pitch, pitch, n2,
                        amp_grid.linearized)
    return grid, edge1, edge2


def _event_positions(lam, edge, pitch, jitter_ps, dispersion):
    # arrival time relative to the bin edge, in units of one bin
    return (lam - edge) / pitch + jitter_ps / (abs(dispersion) * pitch)


def simulate_spdc(amp: JointAmplitude, cfg: InstrumentConfig, pulses: int | None = None) -> CoincidenceHistogram:
    """Monte-Carlo coincidence histogram of the fiber spectrometer.

    At most one pair per pulse is emitted, with probability
    ``pair_probability``, at a pixel drawn from the joint spectral density,
    and kept with the product of the arm efficiencies.  Each photon gets an
    independent Gaussian timing jitter whose FWHM combines the pulse-picker
    and detector jitters, and is binned in TDC bins mapped back to wavelength.
    """
    pulses = cfg.spdc_pulses if pulses is None else int(pulses)
    if pulses < 0:
        raise DomainError("pulse count must be non-negative")
    coverage = amp.norm()
    if coverage < COVERAGE_THRESHOLD:
        raise CoverageError(f"amplitude grid holds {coverage:.3f} of the intensity, need {COVERAGE_THRESHOLD}")

    grid, edge1, edge2 = histogram_grid(amp.grid, cfg)
    counts = np.zeros(grid.shape, dtype=np.int64)
    rng = np.random.default_rng(cfg.rng_seed)
    generated = int(rng.binomial(pulses, cfg.pair_probability)) if pulses else 0
    detected = int(rng.binomial(generated, cfg.retention)) if generated else 0

    prob = amp.jsd().ravel()
    cdf = np.cumsum(prob)
    cdf /= cdf[-1]
    lam1 = amp.grid.wavelengths(1)
    lam2 = amp.grid.wavelengths(2)
    ncols = amp.grid.axis2_count
    sigma = math.hypot(cfg.tau_pp, cfg.tau_apd) * FWHM_TO_SIGMA
    pitch1 = grid.axis1_pitch
    pitch2 = grid.axis2_pitch

    remaining = detected
    while remaining > 0:
        batch = min(remaining, _EVENT_CHUNK)
        remaining -= batch
        pix = np.searchsorted(cdf, rng.random(batch), side="right")
        np.minimum(pix, prob.size - 1, out=pix)
        i, j = np.divmod(pix, ncols)
        if sigma > 0:
            jit = rng.normal(0.0, sigma, size=(2, batch))
        else:
            jit = np.zeros((2, batch))
        pos1 = _event_positions(lam1[i], edge1, pitch1, jit[0], cfg.dispersion)
        pos2 = _event_positions(lam2[j], edge2, pitch2, jit[1], cfg.dispersion)
        kernels.bin_events(np.ascontiguousarray(pos1), np.ascontiguousarray(pos2), counts)

    return CoincidenceHistogram(counts, grid, pulses, generated, detected)


def binned_jsd(amp: JointAmplitude, cfg: InstrumentConfig) -> tuple[np.ndarray, SpectralGrid]:
    """Jitter-free histogram expectation: pixel probabilities summed per TDC bin."""
    grid, edge1, edge2 = histogram_grid(amp.grid, cfg)
    zero1 = np.zeros(amp.grid.axis1_count)
    zero2 = np.zeros(amp.grid.axis2_count)
    b1 = np.floor(_event_positions(amp.grid.wavelengths(1), edge1, grid.axis1_pitch, zero1, cfg.dispersion))
    b2 = np.floor(_event_positions(amp.grid.wavelengths(2), edge2, grid.axis2_pitch, zero2, cfg.dispersion))
    out = np.zeros(grid.shape)
    p = amp.jsd() / amp.jsd().sum()
    k1 = (b1 >= 0) & (b1 < grid.axis1_count)
    k2 = (b2 >= 0) & (b2 < grid.axis2_count)
    np.add.at(out, (b1[k1].astype(int)[:, None], b2[k2].astype(int)[None, :]), p[np.ix_(k1, k2)])
    return out, grid


def _linear_weights(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Dense linear-interpolation matrix mapping samples at ``src`` onto ``dst``."""
    idx = np.clip(np.searchsorted(src, dst, side="right") - 1, 0, src.size - 2)
    frac = (dst - src[idx]) / (src[idx + 1] - src[idx])
    frac = np.clip(frac, 0.0, 1.0)
    w = np.zeros((dst.size, src.size))
    rows = np.arange(dst.size)
    w[rows, idx] = 1.0 - frac
    w[rows, idx + 1] += frac
    return w


def resample(values: np.ndarray, src: SpectralGrid, dst: SpectralGrid) -> np.ndarray:
    out = values
    if (src.axis1_start, src.axis1_pitch, src.axis1_count) != (dst.axis1_start, dst.axis1_pitch, dst.axis1_count):
        out = _linear_weights(src.wavelengths(1), dst.wavelengths(1)) @ out
    if (src.axis2_start, src.axis2_pitch, src.axis2_count) != (dst.axis2_start, dst.axis2_pitch, dst.axis2_count):
        out = out @ _linear_weights(src.wavelengths(2), dst.wavelengths(2)).T
    return out


def dfg_grid(amp_grid: SpectralGrid, cfg: InstrumentConfig) -> SpectralGrid:
    """Seed steps across the signal axis, analyzer samples across the idler axis."""
    steps = int(math.floor(amp_grid.span(1) / cfg.dfg_seed_step + 1e-9)) + 1
    pitch2 = amp_grid.span(2) / (cfg.dfg_analyzer_points - 1)
    if math.isclose(pitch2, amp_grid.axis2_pitch, rel_tol=1e-12):
        pitch2 = amp_grid.axis2_pitch
    return SpectralGrid(amp_grid.axis1_start, cfg.dfg_seed_step, steps,
                        amp_grid.axis2_start, pitch2, cfg.dfg_analyzer_points, amp_grid.linearized)


def filter_transmittance(cfg: InstrumentConfig, wavelength):
    """Gaussian clean-up filter transmission at the seed wavelength."""
    x = (np.asarray(wavelength, dtype=float) - cfg.filter_center) / cfg.filter_fwhm
    return np.exp(-4.0 * math.log(2.0) * x * x)


def simulate_dfg(amp: JointAmplitude, cfg: InstrumentConfig) -> MeasurementRecord:
    """Idler spectra recorded while a CW seed steps across the signal band.

    Each spectrum is the stimulated photon number
    ``2 |B|^2 T_m |gamma|^2 |phi|^2 d(omega_1) d(omega_2)``, blurred by the
    analyzer's Gaussian response, with additive Gaussian noise clamped at 0.
    """
    grid = dfg_grid(amp.grid, cfg)
    jsd = amp.jsd()
    if cfg.dfg_analyzer_resolution > 0:
        sigma_px = cfg.dfg_analyzer_resolution * FWHM_TO_SIGMA / amp.grid.axis2_pitch
        jsd = gaussian_filter1d(jsd, sigma_px, axis=1, mode="nearest", truncate=6.0)
    jsd = resample(jsd, amp.grid, grid)

    trans = filter_transmittance(cfg, grid.wavelengths(1))
    photons = (2.0 * cfg.seed_power) * trans
    scale = cfg.pair_probability * grid.omega_pitch(1) * grid.omega_pitch(2)
    intensity = photons[:, None] * (scale * jsd)
    if cfg.noise_floor > 0:
        rng = np.random.default_rng(cfg.rng_seed)
        intensity = np.maximum(intensity + rng.normal(0.0, cfg.noise_floor, size=intensity.shape), 0.0)
    return MeasurementRecord(
        grid, intensity, trans, p_ref=cfg.seed_power * trans,
        meta={"seed": cfg.rng_seed, "source": "simulate_dfg"},
    )
