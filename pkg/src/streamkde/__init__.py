"""Streaming kernel density estimation under missing-at-random data.

A recursive stochastic-approximation KDE with Horvitz-Thompson inverse
propensity weighting and automatic plug-in bandwidth selection, its
nonrecursive baseline, and a simulation/benchmark harness.
"""

from .bandwidth import (
    BandwidthChoice,
    FunctionalEstimates,
    batch_bandwidth_coefficient,
    batch_functionals,
    estimate_i1_batch,
    estimate_i1_recursive,
    estimate_i2_batch,
    estimate_i2_recursive,
    global_bandwidth_coefficient,
    local_bandwidth,
    pilot_bandwidth,
    plug_in_amwise,
    recursive_functionals,
    select_global_bandwidth,
)
from .density import (
    DensityEstimate,
    EvaluationGrid,
    RecursiveKdeState,
    batch_ht_kde,
    evaluate_recursive,
    recursive_update,
    resume,
)
from .kernels import GAUSSIAN, Kernel, KernelConstants, KernelFamily
from .propensity import (
    EmpiricalPropensity,
    KnownPropensity,
    NWPropensity,
    Observation,
    RecursiveNWPropensity,
    RecursiveNWPropensityModel,
    empirical_proportion,
    nw_propensity,
)
from .schedules import (
    BandwidthSchedule,
    ProductAccumulator,
    StepsizeSchedule,
    gs_exponent_estimate,
    recursion_weights,
    update_product,
)
from .simulate import (
    Cauchy,
    DistributionSpec,
    Exponential,
    MissingnessSpec,
    Normal,
    NormalMixture,
    SimulationConfig,
    Weibull,
    sample_replication,
    true_density,
    true_functionals,
    true_second_derivative,
)

__version__ = "0.1.0"
