"""Unimodular lattices, the diagonal flow, lattice-point counting and their Cauchy/Poisson limit laws."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    CauchylatError,
    ConfigError,
    DomainError,
    InvalidBasisError,
    SizeError,
    UnstableGridError,
)
from .lattice_core import (  # noqa: F401
    Basis2,
    FlowState,
    Vec2,
    canonical_shortest,
    dual,
    gauss_reduce,
    geodesic_step,
    num,
    shortest_norm,
    weak_admissibility_nu,
)
from .sampling import (  # noqa: F401
    RngStream,
    ThetaDist,
    sample_fundamental_point,
    sample_haar_lattice,
    sample_theta,
    sample_translation,
)
from .counting import CountResult, Square, brute_force_count, count_points, error_R  # noqa: F401
from .geodesic_process import (  # noqa: F401
    MarkedPointProcess,
    OrbitRecord,
    SigmaTerm,
    ergodic_sum_S,
    fundamental_index_h,
    index_set_I_tilde,
    l_of,
    local_minima_A2,
    orbit_norms,
    sigma_sum,
    threshold_set_A1,
    xi_gamma_process,
)
from .stats import (  # noqa: F401
    CauchyVerdict,
    PoissonVerdict,
    SampleSet,
    cauchy_scale_median,
    ecf_log_slope,
    hill_tail_index,
    ks_statistic,
    pair_correlation_check,
    poisson_battery,
    symmetry_sign_test,
)
