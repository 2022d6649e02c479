"""End-to-end comparison of the SPDC and DFG characterizations, plus fringe metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .grid import SpectralGrid
from .instruments import (
    InstrumentConfig, MeasurementRecord, CoincidenceHistogram,
    simulate_dfg, simulate_spdc, spdc_resolution,
)
from .schmidt import (
    condition_record, k_min, k_trace, measurement_to_amplitude,
    parse_pipeline, schmidt_decompose, crop_frame, total_intensity,
)
from .spectral import (
    JointAmplitude, Polarization, SourceModel, assemble_jsa, free_spectral_range,
)

DEFAULT_PIPELINE = ({"crop": 0.14}, {"bin": [2, 7]})

# relative fringe amplitude above which the facet pattern counts as resolved,
# and below which it counts as washed out
FRINGE_RESOLVED = 0.1
FRINGE_ABSENT = 0.05
_DETREND_NM = 0.1


def _detrended(profile, pitch: float, smooth_nm: float = _DETREND_NM):
    p = np.asarray(profile, dtype=float)
    smooth = gaussian_filter1d(p, smooth_nm / pitch, mode="nearest")
    ok = smooth > 0.05 * smooth.max()
    x = np.flatnonzero(ok) * pitch
    return x, p[ok] / smooth[ok] - 1.0


def autocorrelation(x) -> np.ndarray:
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.size
    spec = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(spec * np.conj(spec))[:n]
    return ac / ac[0] if ac[0] > 0 else ac


def fringe_period(profile, pitch: float, search=(0.1, 0.3)) -> tuple[float, float]:
    """Dominant modulation period (nm) of a spectral profile and its autocorrelation.

    The slowly varying envelope is divided out first; the period is the
    highest autocorrelation maximum inside ``search``, refined by a
    parabola through its neighbours.
    """
    _, rel = _detrended(profile, pitch)
    ac = autocorrelation(rel)
    lags = np.arange(ac.size) * pitch
    idx = np.flatnonzero((lags >= search[0]) & (lags <= search[1]))
    idx = idx[(idx > 0) & (idx < ac.size - 1)]
    if idx.size == 0:
        return math.nan, 0.0
    i = idx[np.argmax(ac[idx])]
    y0, y1, y2 = ac[i - 1], ac[i], ac[i + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    return float((i + shift) * pitch), float(y1)


def fringe_contrast(profile, pitch: float, period: float) -> float:
    """Least-squares amplitude of a sinusoid of ``period`` in the detrended profile."""
    x, rel = _detrended(profile, pitch)
    if x.size < 4:
        return 0.0
    phase = 2 * math.pi * x / period
    design = np.column_stack([np.cos(phase), np.sin(phase), np.ones_like(x)])
    coef = np.linalg.lstsq(design, rel, rcond=None)[0]
    return float(math.hypot(coef[0], coef[1]))


def fringe_metrics(density: np.ndarray, grid: SpectralGrid, model: SourceModel) -> dict:
    """Facet-fringe period and contrast along both axes of a density map."""
    out = {}
    for axis, pol in ((1, Polarization.TE), (2, Polarization.TM)):
        profile = density.sum(axis=2 - axis)
        pitch = grid.axis1_pitch if axis == 1 else grid.axis2_pitch
        fsr = free_spectral_range(model, pol)
        period, peak = fringe_period(profile, pitch)
        out[f"axis{axis}"] = {
            "fsr_nm": fsr,
            "period_nm": period,
            "autocorrelation": peak,
            "contrast": fringe_contrast(profile, pitch, fsr),
        }
    return out


@dataclass
class RecoveryReport:
    theory: dict
    dfg: dict
    spdc: dict
    jsd: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"theory": self.theory, "dfg": self.dfg, "spdc": self.spdc}


def theory_summary(amp: JointAmplitude) -> dict:
    schmidt = schmidt_decompose(amp)
    return {
        "K": schmidt.K,
        "K_trace": k_trace(amp),
        "K_min": k_min(amp),
        "coefficients": [float(c) for c in schmidt.coefficients[:10]],
        "mode_count": schmidt.mode_count,
        "total_intensity": total_intensity(amp),
        "emission_fraction": amp.emission_fraction,
    }


def recover_from_record(rec: MeasurementRecord, steps=DEFAULT_PIPELINE) -> dict:
    """K_min of the raw record and after each successive conditioning step."""
    steps = parse_pipeline(steps)
    values = {"raw": k_min(measurement_to_amplitude(rec))}
    done = []
    for step in steps:
        done.append(step)
        label = "+".join("crop" if s.kind == "crop" else "bin" for s in done)
        values[label] = k_min(measurement_to_amplitude(condition_record(rec, done)))
    return values


def end_to_end_recovery(model: SourceModel, cfg: InstrumentConfig, grid: SpectralGrid | None = None,
                        steps=DEFAULT_PIPELINE, pulses: int | None = None) -> RecoveryReport:
    """Theory, DFG reconstruction and SPDC histogram of one source, side by side."""
    grid = SpectralGrid.reference_window() if grid is None else grid
    amp = assemble_jsa(model, grid, "full_phase", estimate_emission=True)
    theory = theory_summary(amp)
    theory["fringes"] = fringe_metrics(amp.jsd(), grid, model)
    frame = next((s.crop for s in parse_pipeline(steps) if s.kind == "crop"), 0.0)
    if frame > 0:
        cropped, cgrid = crop_frame(amp.jsd(), grid, frame)
        theory["cropped"] = {
            "frame_nm": frame,
            "total_intensity": total_intensity(cropped, cgrid),
            "K_min": k_min(np.sqrt(cropped)),
        }

    rec = simulate_dfg(amp, cfg)
    dfg_amp = measurement_to_amplitude(rec)
    dfg_density = dfg_amp.wavelength_ordered() ** 2
    dfg = {
        "shape": list(rec.grid.shape),
        "pitch_nm": [rec.grid.axis1_pitch, rec.grid.axis2_pitch],
        "K_min": recover_from_record(rec, steps),
        "fringes": fringe_metrics(dfg_density, rec.grid, model),
        "noise_floor": cfg.noise_floor,
    }

    hist = simulate_spdc(amp, cfg, pulses)
    spdc = _spdc_summary(hist, cfg, model)
    return RecoveryReport(theory, dfg, spdc, jsd={
        "theory": (amp.jsd(), grid),
        "dfg": (dfg_density, rec.grid),
        "spdc": (hist.counts, hist.grid),
        "record": rec,
        "histogram": hist,
        "amplitude": amp,
    })


def _spdc_summary(hist: CoincidenceHistogram, cfg: InstrumentConfig, model: SourceModel) -> dict:
    out = {
        "shape": list(hist.grid.shape),
        "pitch_nm": [hist.grid.axis1_pitch, hist.grid.axis2_pitch],
        "resolution_nm": spdc_resolution(cfg),
        "pulses": hist.pulses_simulated,
        "pairs_generated": hist.pairs_generated,
        "pairs_detected": hist.pairs_detected,
        "coincidences": hist.total,
        "max_coincidence_rate_hz": (1e12 / cfg.tau_deadtime) if cfg.tau_deadtime else None,
    }
    if hist.total > 0:
        out["K_min"] = k_min(np.sqrt(hist.counts.astype(float)))
        out["fringes"] = fringe_metrics(hist.counts.astype(float), hist.grid, model)
    return out
