"""Quantization on real and complex Grassmann manifolds.

Ball volumes, packing and distortion-rate bounds, max-min codebooks, and a
limited-feedback MIMO rate simulator built on them.
"""

__version__ = "0.1.0"

from .core import (
    ArgumentError,
    DimensionError,
    FieldTag,
    GrassmannError,
    PrincipalAngles,
    ShapeError,
    Subspace,
    apply_isometry,
    chordal_distance,
    haar_sample,
    haar_unitary,
    principal_angles,
    reference_subspace,
)
from .volume import (
    BallVolumeModel,
    VolumeEstimate,
    ball_volume,
    ball_volume_model,
    barg_volume,
    complex_constant,
    empirical_volume,
    real_constant,
)
from .bounds import drf_lower, drf_upper, gv_bound, hamming_bound
from .codebook import (
    Codebook,
    design_maxmin,
    load_codebook,
    mean_distortion,
    quantize,
    random_code_experiment,
    save_codebook,
)
from .mimo import MimoConfig, mimo_sweep, rate_finite_feedback, rate_perfect_csi, rate_predicted
