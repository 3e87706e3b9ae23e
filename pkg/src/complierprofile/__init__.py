"""Profile compliers, always-takers and never-takers in binary IV designs."""

__version__ = "0.1.0"

from .errors import ProfilingError, ProfilingWarning  # noqa: E402
from .moments import (  # noqa: E402
    Dataset,
    MomentVector,
    Observation,
    StrataMeans,
    StrataShares,
    complier_mean,
    compute_moments,
    observable_strata_means,
    strata_means,
    strata_shares,
)
from .variance import (  # noqa: E402
    EstimateWithUncertainty,
    bootstrap_se,
    confidence_interval,
    gradient,
    observable_strata_se,
    plugin_estimate,
    plugin_se,
    sample_covariance,
    strata_share_se,
)

__all__ = [
    "__version__",
    "Dataset",
    "EstimateWithUncertainty",
    "MomentVector",
    "Observation",
    "ProfilingError",
    "ProfilingWarning",
    "StrataMeans",
    "StrataShares",
    "bootstrap_se",
    "complier_mean",
    "compute_moments",
    "confidence_interval",
    "gradient",
    "observable_strata_means",
    "observable_strata_se",
    "plugin_estimate",
    "plugin_se",
    "sample_covariance",
    "strata_means",
    "strata_share_se",
    "strata_shares",
]
