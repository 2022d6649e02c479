"""Joint spectral amplitude model, virtual SPDC/DFG experiments and Schmidt analysis
of a counterpropagating waveguide photon-pair source."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BiphotonError, CoverageError, DomainError, GridMismatchError, NumericalError,
    OutOfRangeError, ParseError, TransmittanceError, ValidationError,
)
from .grid import SpectralGrid  # noqa: E402
from .spectral import (  # noqa: E402
    JointAmplitude, PhaseMode, Polarization, SourceModel, assemble_jsa, delta_k,
    facet_amplitude, facet_response, free_spectral_range, microcavity_amplitude,
    microcavity_transmission, phase_matching, phase_matching_dk, pump_amplitude,
    tuning_curve, tuning_table,
)
from .instruments import (  # noqa: E402
    CoincidenceHistogram, InstrumentConfig, MeasurementRecord, simulate_dfg,
    simulate_spdc, spdc_resolution,
)
from .schmidt import (  # noqa: E402
    AmplitudeMatrix, SchmidtResult, analyze_record, bin_matrix, bin_record, crop_frame,
    crop_record, k_min, k_trace, measurement_to_amplitude, schmidt_decompose, total_intensity,
)
from .pipeline import end_to_end_recovery  # noqa: E402
