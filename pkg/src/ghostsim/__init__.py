"""One-dimensional wave-optics simulator for pseudothermal and computational ghost imaging."""

from .correlation import (
    CorrelationAccumulator,
    ImageResult,
    ObjectSpec,
    accumulate,
    bucket_signal,
    cgi_expected_image,
    coincidence_kernel,
    ensemble_image,
    eq1_bruteforce,
    eq1_factored,
    eq1_profile,
    finalize,
    gaussian_covariance_profile,
    image_term,
    klyshko_psf,
    merge,
)
from .errors import (
    ConfigError,
    DegenerateDistributionError,
    DimensionError,
    FormatError,
    GhostsimError,
    InsufficientDataError,
    ParameterError,
    SamplingError,
)
from .optics import (
    ComplexField,
    Geometry,
    PlaneGrid,
    PropagatorMatrix,
    apply_propagator,
    fresnel_propagator,
    identity_propagator,
    intensity,
    propagator_from_matrix,
)
from .photon import (
    CoincidenceHistogram,
    JointDetectionTable,
    PhotonRunConfig,
    image_from_histogram,
    joint_table,
    sample_pairs,
    single_photon_cgi,
    tv_distance,
)
from .sources import (
    PatternId,
    SourceKind,
    SourceModel,
    SourceRealization,
    mutual_coherence,
    pattern_block,
    replay_pattern,
    sample_realization,
)

__version__ = "0.1.0"
