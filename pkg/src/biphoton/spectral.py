"""Theoretical joint spectral amplitude of the counterpropagating waveguide source.

Every factor is evaluated on angular frequencies in rad/s.  Source lengths
follow the units of the instrument tables: wavelengths in nm, the
waveguide length and pump waist in mm.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import erf

from . import kernels
from .errors import DomainError, GridMismatchError, NumericalError, OutOfRangeError
from .grid import C_LIGHT, TWO_PI_C, SpectralGrid, omega_to_wavelength, wavelength_to_omega

QUAD_RTOL = 1e-10
_QUAD_START_NODES = 64
_QUAD_MAX_NODES = 8192


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"


class PhaseMode(str, enum.Enum):
    FULL_PHASE = "full_phase"
    MODULUS_ONLY = "modulus_only"


@dataclass(frozen=True)
class SourceModel:
    """Pump, waveguide and cavity parameters of the photon-pair source.

    ``dn_te``/``dn_tm`` give an optional affine index dispersion
    ``n(omega) = n + dn * (omega - omega_peak)`` (units s/rad) about the
    facet peak frequency; both default to a constant index.
    """

    pump_center_wavelength: float = 759.1  # nm
    pump_bandwidth: float = 2 * math.pi * 84e9  # rad/s, scale of the sech argument
    waveguide_length: float = 2.1  # mm
    pump_waist: float = 0.24  # mm
    incidence_angle: float = math.radians(1.11)
    n_te: float = 3.099
    n_tm: float = 3.086
    r_te: float = 0.267
    r_tm: float = 0.247
    microcavity_center: float = 759.1  # nm
    microcavity_fwhm: float = 0.28  # nm
    facet_peak_te: float = 1511.99  # nm
    facet_peak_tm: float = 1524.53  # nm
    dn_te: float = 0.0
    dn_tm: float = 0.0

    def __post_init__(self):
        for name in ("pump_center_wavelength", "pump_bandwidth", "waveguide_length",
                     "pump_waist", "microcavity_center", "microcavity_fwhm",
                     "facet_peak_te", "facet_peak_tm"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")
        for name in ("r_te", "r_tm"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise DomainError(f"{name} must lie in [0, 1), got {value!r}")
        if not abs(self.incidence_angle) < math.pi / 2:
            raise DomainError(f"incidence_angle must satisfy |theta| < pi/2, got {self.incidence_angle!r}")
        for name in ("n_te", "n_tm"):
            if not getattr(self, name) > 1.0:
                raise DomainError(f"{name} must exceed 1, got {getattr(self, name)!r}")

    @property
    def length_m(self) -> float:
        return self.waveguide_length * 1e-3

    @property
    def waist_m(self) -> float:
        return self.pump_waist * 1e-3

    @property
    def pump_omega(self) -> float:
        return float(wavelength_to_omega(self.pump_center_wavelength))

    def index(self, polarization, omega):
        pol = Polarization(polarization)
        if pol is Polarization.TE:
            n0, dn, peak = self.n_te, self.dn_te, self.facet_peak_te
        else:
            n0, dn, peak = self.n_tm, self.dn_tm, self.facet_peak_tm
        if dn == 0.0:
            return n0
        return n0 + dn * (np.asarray(omega, dtype=float) - wavelength_to_omega(peak))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SourceModel":
        data = dict(data)
        if "incidence_angle_deg" in data:
            data["incidence_angle"] = math.radians(data.pop("incidence_angle_deg"))
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown source parameters: {sorted(unknown)}")
        return cls(**data)


def _check_omega(omega):
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise DomainError("angular frequency must be finite")
    if np.any(omega <= 0):
        raise DomainError("angular frequency must be positive")
    return omega


def _sech(x):
    ax = np.abs(x)
    e = np.exp(-ax)
    return 2.0 * e / (1.0 + e * e)


def pump_amplitude(model: SourceModel, omega):
    """Hyperbolic-secant pump spectral amplitude, 1 at the pump center."""
    omega = _check_omega(omega)
    return _sech((omega - model.pump_omega) / model.pump_bandwidth)


def delta_k(model: SourceModel, omega1, omega2, theta: float | None = None):
    """Phase mismatch (1/m) of the TE signal / TM idler process at pump angle ``theta``."""
    if theta is None:
        theta = model.incidence_angle
    w1 = np.asarray(omega1, dtype=float)
    w2 = np.asarray(omega2, dtype=float)
    n1 = model.index(Polarization.TE, w1)
    n2 = model.index(Polarization.TM, w2)
    return ((w1 + w2) * math.sin(theta) - w1 * n1 + w2 * n2) / C_LIGHT


def _gauss_nodes(n: int, length: float, waist: float):
    x, w = leggauss(n)
    z = 0.5 * length * x
    wenv = 0.5 * length * w * np.exp(-(z / waist) ** 2)
    return z, wenv


def phase_matching_dk(model: SourceModel, dk):
    """Phase-matching integral of the Gaussian pump profile over the waveguide (m).

    Gauss-Legendre quadrature over ``[-L/2, L/2]``; the node count doubles
    until two successive estimates agree to ``QUAD_RTOL`` relative to the
    integral of the envelope itself.
    """
    dk = np.asarray(dk, dtype=float)
    if not np.all(np.isfinite(dk)):
        raise DomainError("phase mismatch must be finite")
    flat = np.ascontiguousarray(dk.ravel())
    length, waist = model.length_m, model.waist_m
    scale = waist * math.sqrt(math.pi) * math.erf(length / (2 * waist))

    n = _QUAD_START_NODES
    prev = kernels.phase_sums(flat, *_gauss_nodes(n, length, waist))
    while True:
        n *= 2
        cur = kernels.phase_sums(flat, *_gauss_nodes(n, length, waist))
        err = max(np.max(np.abs(cur[0] - prev[0]), initial=0.0),
                  np.max(np.abs(cur[1] - prev[1]), initial=0.0))
        if err <= QUAD_RTOL * scale:
            break
        if n >= _QUAD_MAX_NODES:
            raise NumericalError(
                f"phase-matching quadrature did not converge (error {err / scale:.2e} at {n} nodes)"
            )
        prev = cur
    return (cur[0] + 1j * cur[1]).reshape(dk.shape)


def phase_matching(model: SourceModel, omega1, omega2):
    return phase_matching_dk(model, delta_k(model, omega1, omega2))


def gaussian_phase_matching_peak(model: SourceModel) -> float:
    """Closed form of the phase-matching integral at zero mismatch (m)."""
    return model.waist_m * math.sqrt(math.pi) * float(erf(model.length_m / (2 * model.waist_m)))


def _microcavity_detuning(model: SourceModel, omega):
    omega = _check_omega(omega)
    w_m = wavelength_to_omega(model.microcavity_center)
    dw_m = TWO_PI_C * model.microcavity_fwhm * 1e-9 / (model.microcavity_center * 1e-9) ** 2
    return (omega - w_m) / dw_m


def microcavity_transmission(model: SourceModel, omega):
    x = _microcavity_detuning(model, omega)
    return 1.0 / (1.0 + 4.0 * x * x)


def microcavity_amplitude(model: SourceModel, omega):
    """Single-pole Lorentzian amplitude; its squared modulus is the transmission."""
    x = _microcavity_detuning(model, omega)
    return 1.0 / (1.0 - 2j * x)


def facet_finesse(model: SourceModel, polarization) -> float:
    r = model.r_te if Polarization(polarization) is Polarization.TE else model.r_tm
    return 4.0 * r / (1.0 - r)


def _facet_phase(model: SourceModel, polarization, omega):
    omega = _check_omega(omega)
    pol = Polarization(polarization)
    if pol is Polarization.TE:
        n, peak = model.n_te, model.facet_peak_te
    else:
        n, peak = model.n_tm, model.facet_peak_tm
    return model.length_m * n * (omega - wavelength_to_omega(peak)) / C_LIGHT


def facet_response(model: SourceModel, polarization, omega):
    """Airy transmission of the waveguide facets for one polarization."""
    delta = _facet_phase(model, polarization, omega)
    return 1.0 / (1.0 + facet_finesse(model, polarization) * np.sin(delta) ** 2)


def _effective_mirror(finesse: float) -> float:
    # r with 4 r / (1 - r)^2 == finesse, so the Airy amplitude below has the
    # intensity response of the chosen finesse convention
    if finesse == 0.0:
        return 0.0
    # a - sqrt(a^2 - 1) written without cancellation or overflow of a^2
    a = 1.0 + 2.0 / finesse
    return 1.0 / (a * (1.0 + math.sqrt(1.0 - 1.0 / (a * a))))


def facet_amplitude(model: SourceModel, polarization, omega):
    """Minimal-phase Airy amplitude, peak value exactly 1."""
    delta = _facet_phase(model, polarization, omega)
    r = _effective_mirror(facet_finesse(model, polarization))
    return (1.0 - r) / (1.0 - r * np.exp(2j * delta))


def free_spectral_range(model: SourceModel, polarization, wavelength: float | None = None) -> float:
    """Facet fringe spacing in nm, ``lambda^2 / (2 L n)``."""
    pol = Polarization(polarization)
    if pol is Polarization.TE:
        n, peak = model.n_te, model.facet_peak_te
    else:
        n, peak = model.n_tm, model.facet_peak_tm
    lam = peak if wavelength is None else wavelength
    return lam ** 2 / (2.0 * model.waveguide_length * 1e6 * n)


@dataclass
class JointAmplitude:
    """Complex biphoton amplitude on a :class:`SpectralGrid`.

    ``values[m, n]`` belongs to signal wavelength ``m`` and idler wavelength
    ``n`` of the grid (both ascending).  ``emission_fraction`` is the share
    of the whole (unwindowed) emission inside the grid, when it was estimated.
    """

    grid: SpectralGrid
    values: np.ndarray
    emission_fraction: float | None = None
    normalization_weight: float = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("joint amplitude has non-finite entries")
        self.normalization_weight = self.grid.cell_weight

    def jsd(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sum(self.jsd()) * self.normalization_weight)

    def normalize(self) -> "JointAmplitude":
        total = self.norm()
        if not total > 0:
            raise GridMismatchError("joint amplitude vanishes on the grid; the window misses the emission")
        self.values = self.values / math.sqrt(total)
        return self

    def modulus(self) -> np.ndarray:
        return np.abs(self.values)


def _jsa_factors(model: SourceModel, grid: SpectralGrid, phase_mode: PhaseMode):
    w1 = grid.omegas(1)[:, None]
    w2 = grid.omegas(2)[None, :]
    wsum = w1 + w2
    pump = pump_amplitude(model, wsum)
    pm = phase_matching(model, *np.broadcast_arrays(w1, w2))
    if phase_mode is PhaseMode.FULL_PHASE:
        cav = microcavity_amplitude(model, wsum)
        te = facet_amplitude(model, Polarization.TE, w1)
        tm = facet_amplitude(model, Polarization.TM, w2)
    else:
        pm = np.abs(pm)
        cav = np.sqrt(microcavity_transmission(model, wsum))
        te = np.sqrt(facet_response(model, Polarization.TE, w1))
        tm = np.sqrt(facet_response(model, Polarization.TM, w2))
    return pump * pm * cav * te * tm


def estimate_coverage(model: SourceModel, grid: SpectralGrid, pad: int = 1) -> float:
    """Fraction of the emission inside ``grid``, from a coarse padded grid.

    The padded grid extends the window by ``pad`` spans on every side at a
    pitch coarse enough to keep its pixel count close to the original.
    """
    factor = 2 * pad + 1
    coarse = SpectralGrid(
        grid.axis1_start - pad * grid.span(1), grid.axis1_pitch * factor, grid.axis1_count,
        grid.axis2_start - pad * grid.span(2), grid.axis2_pitch * factor, grid.axis2_count,
        linearized=False,
    )
    dens = np.abs(_jsa_factors(model, coarse, PhaseMode.MODULUS_ONLY)) ** 2
    lam1 = coarse.wavelengths(1)[:, None]
    lam2 = coarse.wavelengths(2)[None, :]
    # half a fine pitch of slack so window edge samples count as inside
    inside = ((lam1 >= grid.axis1_start - 0.5 * grid.axis1_pitch)
              & (lam1 <= grid.end(1) + 0.5 * grid.axis1_pitch)
              & (lam2 >= grid.axis2_start - 0.5 * grid.axis2_pitch)
              & (lam2 <= grid.end(2) + 0.5 * grid.axis2_pitch))
    total = dens.sum()
    if not total > 0:
        return 0.0
    return float(np.sum(dens * inside) / total)


def assemble_jsa(model: SourceModel, grid: SpectralGrid, phase_mode="full_phase",
                 estimate_emission: bool = False) -> JointAmplitude:
    """Normalized joint spectral amplitude of ``model`` sampled on ``grid``.

    The normalization is over the grid window, so the Riemann sum of the
    returned density is 1.  ``estimate_emission`` additionally records how
    much of the unwindowed emission the window holds.
    """
    mode = PhaseMode(phase_mode)
    values = _jsa_factors(model, grid, mode)
    if not np.any(np.abs(values) > 0):
        raise GridMismatchError(
            "joint amplitude is identically zero on the grid; the window misses the emission"
        )
    fraction = estimate_coverage(model, grid) if estimate_emission else None
    return JointAmplitude(grid, values, emission_fraction=fraction).normalize()


def tuning_curve(model: SourceModel, theta: float, window: tuple[float, float] | None = None):
    """Signal and idler center wavelengths (nm) phase matched at pump angle ``theta``.

    Energy conservation pins ``omega1 + omega2`` to the pump frequency.  With
    constant indices the matching condition is linear in the inverse
    wavelengths and is solved directly; with dispersion the residual is
    bracketed on ``window`` and solved by Brent's method.
    """
    lam_p = model.pump_center_wavelength
    if window is None:
        window = (1.5 * lam_p, 3.0 * lam_p)
    lo, hi = window
    s = math.sin(theta)
    w_p = model.pump_omega

    if model.dn_te == 0.0 and model.dn_tm == 0.0:
        inv1 = (s + model.n_tm) / (model.n_te + model.n_tm) / lam_p
        inv2 = 1.0 / lam_p - inv1
        if inv1 <= 0 or inv2 <= 0:
            raise OutOfRangeError(f"no phase-matched pair at theta={theta!r}")
        w1 = TWO_PI_C * inv1 * 1e9
    else:
        def residual(w1):
            return float(delta_k(model, w1, w_p - w1, theta))

        w_lo = float(wavelength_to_omega(hi))
        w_hi = float(wavelength_to_omega(lo))
        # both photons must land inside the window
        a = max(w_lo, w_p - w_hi)
        b = min(w_hi, w_p - w_lo)
        if not (a < b) or residual(a) * residual(b) > 0:
            raise OutOfRangeError(f"no phase-matched pair in window {window} at theta={theta!r}")
        w1 = brentq(residual, a, b, xtol=1e-6, rtol=4 * np.finfo(float).eps, maxiter=200)

    w2 = w_p - w1
    lam1 = float(omega_to_wavelength(w1))
    lam2 = float(omega_to_wavelength(w2))
    if not (lo <= lam1 <= hi and lo <= lam2 <= hi):
        raise OutOfRangeError(f"phase-matched pair ({lam1:.2f}, {lam2:.2f}) nm outside window {window}")
    tol = 1e-6 * 2 * math.pi / model.length_m
    if abs(float(delta_k(model, w1, w2, theta))) >= tol:
        raise NumericalError("tuning-curve root does not meet the phase-mismatch tolerance")
    return lam1, lam2


def tuning_table(model: SourceModel, theta_min: float, theta_max: float, steps: int):
    """Rows of (theta_rad, lambda_signal_nm, lambda_idler_nm) over an angle range."""
    thetas = np.linspace(theta_min, theta_max, steps)
    return [(float(t), *tuning_curve(model, float(t))) for t in thetas]


def with_overrides(model: SourceModel, **changes) -> SourceModel:
    return replace(model, **changes)
