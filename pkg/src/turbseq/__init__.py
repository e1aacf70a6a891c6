"""turbseq: restoration and metrology for turbulence-degraded image sequences.

Temporal mean/median filtering, diffeomorphic warping correction toward the
median reference, a line/zone pseudo-MTF metric for barchart imagery, and a
synthetic degradation simulator with ground truth.
"""

from .imgseq import Frame, Sequence, load_sequence, read_pgm, save_frame, write_pgm
from .nlam import (
    NLAMCurve,
    ZonePartition,
    average_nlam,
    build_partition,
    extract_signal,
    load_partition_file,
    make_barchart,
    nlam_curve,
    normalize_curve,
)
from .registration import (
    DisplacementMap,
    RegParams,
    RegistrationResult,
    VelocityField,
    apply_warp,
    correct_sequence,
    integrate_flow,
    min_jacobian,
    register,
)
from .simulate import (
    GroundTruth,
    SimConfig,
    degrade,
    load_displacement_maps,
    random_smooth_displacement,
    save_displacement_maps,
)
from .temporal import (
    FilterKind,
    WindowSpec,
    sliding_filter,
    temporal_mean,
    temporal_median,
)

__version__ = "0.1.0"

__all__ = [
    "Frame",
    "Sequence",
    "load_sequence",
    "read_pgm",
    "save_frame",
    "write_pgm",
    "FilterKind",
    "WindowSpec",
    "temporal_mean",
    "temporal_median",
    "sliding_filter",
    "SimConfig",
    "GroundTruth",
    "degrade",
    "random_smooth_displacement",
    "save_displacement_maps",
    "load_displacement_maps",
    "DisplacementMap",
    "VelocityField",
    "RegParams",
    "RegistrationResult",
    "register",
    "integrate_flow",
    "apply_warp",
    "min_jacobian",
    "correct_sequence",
    "ZonePartition",
    "NLAMCurve",
    "build_partition",
    "extract_signal",
    "nlam_curve",
    "average_nlam",
    "normalize_curve",
    "load_partition_file",
    "make_barchart",
    "__version__",
]
