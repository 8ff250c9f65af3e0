"""Aeroacoustic source mapping in a uniform subsonic flow.

Convected Green's functions, the discrete cross-spectral forward model,
snapshot synthesis and three reconstruction methods (conventional
beamforming, DAMAS, covariance matrix fitting).
"""

from .errors import (
    AeromapError,
    ConvergenceError,
    DimensionError,
    DomainError,
    FileFormatError,
    GeometryError,
    HermitianError,
    ScenarioError,
    SingularPointError,
)
from .geometry import (
    Csm,
    FocusGrid,
    MicArray,
    PropagationMatrix,
    SourceMap,
    adjoint_csm,
    forward_csm,
    monopole_matrix,
    propagation_matrix,
    steering_matrix,
    steering_vector,
    vec_linearization,
)
from .hankel import hankel_h1_0
from .physics import (
    FlowConfig,
    far_field_pattern,
    farfield_leading,
    greens,
    greens_2d,
    greens_3d,
    lorentz_reference,
    mach_norm,
    plane_wave,
)
from .recon import (
    ReconConfig,
    beamform,
    cmf_solve,
    damas_gauss_seidel,
    damas_tikhonov,
    normal_matrix,
    normalize_map,
    psf_matrix,
)
from .scenario import Scenario
from .synth import add_noise, estimate_csm, simulate_ensemble, simulate_snapshot

__version__ = "0.1.0"
