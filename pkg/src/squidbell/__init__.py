"""squidbell: double-well flux dynamics under repeated selective measurements.

Builds the quartic double-well spectrum, models recorded (filtered)
measurements with box or Gaussian instrument profiles, evaluates temporal
correlation-inequality maps over quiescent-time pairs and the effective
flux uncertainties the measurements induce, and analyzes where inequality
violations and flux distinguishability live in that plane.
"""

from .errors import (
    BasisTruncationError,
    ConfigError,
    DegenerateDensityError,
    DegenerateDoubletError,
    EigensolverError,
    FormatError,
    ImpossibleOutcomeError,
    NumericsError,
    ScanPointError,
    SquidBellError,
)
from .measurement import (
    EffectMatrix,
    FilterSpec,
    MeasurementContext,
    OutcomeDensity,
    OutcomeGrid,
    UncertaintyResult,
    WeightMatrix,
    apply_measurement,
    effect_matrix,
    effective_uncertainty,
    outcome_density,
    sign_probability_position,
    weight_matrix,
    weight_value,
)
from .protocol import (
    CorrelationResult,
    InitialStateSpec,
    ScanGrid,
    SequencePlan,
    correlation_triple,
    joint_sign_probability,
    joint_sign_probability_bruteforce,
    make_initial_state,
    prepare_state,
    scan,
    sequence_uncertainty,
)
from .regions import (
    Region,
    RegionReport,
    extract_regions,
    intersection_report,
    spatial_delta_p,
    spatial_surface,
)
from .spectral import (
    GridSpec,
    PotentialParams,
    SpectralBasis,
    StateVector,
    build_basis,
    build_basis_with_doublet_check,
    evolve,
    gaussian_packet,
    potential_value,
    project_state,
    tunneling_period,
)

__version__ = "0.1.0"
