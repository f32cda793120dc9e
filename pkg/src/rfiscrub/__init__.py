"""Fast RFI subspace removal for radio-telescope array covariances.

Lanczos/Rayleigh-Ritz partial eigendecomposition, a quadratic-mean vs
arithmetic-mean interference counter, subspace subtraction, and the
beamforming and simulation tooling needed to evaluate them.
"""

from .beamform import (
    ArrayGeometry,
    DriftScan,
    SkyDirection,
    SteeringVector,
    beam_power,
    image_projection_and_sdr,
    iterative_sinr_clean,
    point_spread_function,
    sinr,
    sinr_for_source,
    sky_image,
    source_range,
    steering_vector,
)
from .detect import (
    DetectConfig,
    DetectionResult,
    EpsilonCalibration,
    calibrate_epsilon,
    detect_mdl,
    detect_qmam,
    gmam,
    qmam_from_eigenvalues,
    qmam_from_ritz,
)
from .lanczos import LanczosState, lanczos_init, lanczos_step, ritz_pairs, run_lanczos
from .linalg import CovarianceMatrix, EigenDecomposition, Tridiagonal, eigh, tridiag_eigh
from .mitigate import MitigationReport, clean_qmam, clean_with_eigh, subtract_subspace

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "CovarianceMatrix",
    "DetectConfig",
    "DetectionResult",
    "DriftScan",
    "EigenDecomposition",
    "EpsilonCalibration",
    "LanczosState",
    "MitigationReport",
    "SkyDirection",
    "SteeringVector",
    "Tridiagonal",
    "beam_power",
    "calibrate_epsilon",
    "clean_qmam",
    "clean_with_eigh",
    "detect_mdl",
    "detect_qmam",
    "eigh",
    "gmam",
    "image_projection_and_sdr",
    "iterative_sinr_clean",
    "lanczos_init",
    "lanczos_step",
    "point_spread_function",
    "qmam_from_eigenvalues",
    "qmam_from_ritz",
    "ritz_pairs",
    "run_lanczos",
    "sinr",
    "sinr_for_source",
    "sky_image",
    "source_range",
    "steering_vector",
    "subtract_subspace",
    "tridiag_eigh",
]
