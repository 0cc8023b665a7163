"""Bayesian two-phase estimation in a three-mode interferometer.

Simulates single-photon probes through a tritter-phase-tritter circuit,
tracks the phase posterior with a particle filter, and evaluates
Cramer-Rao, Van Trees and Ziv-Zakai lower bounds against the Monte Carlo
Bayes risk in the limited-data regime.
"""

from .interferometer import (
    InterferometerSpec,
    PhasePair,
    dft_tritter,
    fisher_correlation,
    fisher_matrix,
    likelihood,
    load_unitary,
    phase_screen,
    sample_outcome,
)
from .priors import (
    GaussianPrior,
    NonDerivablePriorError,
    Prior,
    RectPrior,
    density,
    gamma_from,
    gaussian_prior,
    pearson,
    prior_information_matrix,
    sample,
)
from .particle_filter import (
    DegeneratePosteriorError,
    ParticleSet,
    PosteriorSummary,
    ResampleParams,
    UndefinedMeanError,
    bayes_update,
    circular_covariance,
    circular_mean,
    ess,
    init_particles,
    liu_west_resample,
    run_estimation,
)
from .bounds import (
    BoundRecord,
    SingularInformationError,
    VanTreesMatrix,
    ZZSettings,
    bound_records,
    crb_total_variance,
    direction_pair_from,
    min_error_probability,
    van_trees_matrix,
    van_trees_total_variance,
    zz_directional,
    zz_total_variance,
)

__version__ = "0.1.0"
