"""Translation-invariant splitting Gibbs measures of the ferromagnetic Potts
model on Cayley trees: enumeration, transition chains, extremality
certificates and an empirical reconstruction probe."""

from .errors import BudgetExceeded, DomainError, SolverError
from .model import (
    Branch,
    PottsParams,
    TisgmSolution,
    branch_solution,
    count_tisgms,
    enumerate_tisgms,
    f_m,
    fold_theta,
    iterate_bounds,
    solve_boundary_laws,
    theta_c,
    theta_m,
)
from .thresholds import CriticalThresholds, critical_thresholds
from .chains import ChainMatrices, IsingImage, build_chain, ising_lift, verify_fuzzy_projection
from .extremality import (
    ExtremalityVerdict,
    MswBound,
    Verdict,
    classify,
    count_extremal_lower_bound,
    kesten_stigum,
    martin_condition,
    msw_bound,
    verify_gamma_bounds,
)
from .recon import (
    Decision,
    Estimator,
    ReconEstimate,
    RootPrior,
    SimConfig,
    broadcast_sample,
    estimate_reconstruction,
)
from .scan import ScanRow, scan

__version__ = "0.1.0"
