"""First-difference, forward-orthogonal-deviations and system GMM for dynamic panels."""

from .estimators import (
    EquivalenceReport,
    GmmEstimate,
    equivalence_report,
    estimate,
    gmm_kernel,
    one_step,
    system_one_step,
    system_two_step,
    two_step,
)
from .instruments import (
    ALL_LAGS,
    RECENT_LAGS,
    InstrumentScheme,
    nesting_check,
    transfer_matrix,
)
from .panel import PanelData
from .simulation import DesignPoint, EstimatorSpec, generate_panel, run_battery, summarize
from .transforms import (
    equivalent_transform,
    first_difference_matrix,
    fod_matrix,
    system_extend,
    upper_cholesky,
)

__version__ = "0.1.0"
