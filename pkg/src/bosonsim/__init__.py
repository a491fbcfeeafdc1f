"""Noisy boson sampling with partially distinguishable bosons, and its lower-order approximations."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BosonSimError,
    BudgetOverflowError,
    DegenerateDistributionError,
    InvalidArgumentError,
    SizeLimitError,
    ValidationError,
)
from .params import CutoffPolicy, NoiseParams  # noqa: E402
from .interferometer import InputSpec, Interferometer, balanced_port, fourier, haar_random  # noqa: E402
from .permanent import (  # noqa: E402
    cycle_restricted_sum,
    glynn_estimate,
    permanent_bruteforce,
    permanent_exact,
    weighted_perm_sum,
    xi_rescale,
)
from .probability import (  # noqa: E402
    configurations,
    delta_p1,
    gram_submatrix,
    lossy_dark_probability,
    output_probability,
    subset_probability,
    truncated_subset_probability,
    tv_distance_exact,
)
from .bounds import bound_report, relative_variance, sample_budget, w1_bound  # noqa: E402
from .samplers import (  # noqa: E402
    SampleSet,
    distinguish,
    estimate_subset_probability,
    sample_exact,
    sample_k_interfering,
    sample_truncated,
)
