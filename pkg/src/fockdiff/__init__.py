"""Truncated-Fock-space simulation of optical fields in the quantum diffusion channel."""

from .diffusion import (
    ChannelConfig,
    EvolvedNbsParams,
    KrausTerm,
    apply_channel_kraus,
    evolve_ode,
    evolved_mean_photon,
    evolved_nbs_diagonal,
    kraus_terms,
    master_equation_rhs,
    mean_curve,
)
from .fock import (
    DensityError,
    DensityMatrix,
    FockSpace,
    Operator,
    TracePolicy,
    TruncationError,
    expectation,
    ladder_ops,
    validate_density,
)
from .special import laguerre, log_factorial
from .states import (
    ChaoticParams,
    LwcsParams,
    NbsParams,
    chaotic_state,
    lwcs_state,
    nbs_state,
    nbs_via_subtraction,
    number_state,
    thermal_occupancy,
)

__version__ = "0.1.0"
