"""Unnormalized measures: extended divergence, thinning, projections and tests."""

__version__ = "0.1.0"

from .errors import (
    CertificateError,
    ConditionError,
    ConvergenceError,
    GridSizeError,
    InfeasibleError,
    MeanMismatchError,
    NegativeWeightError,
    SupportMismatchError,
    UnmeasureError,
    ZeroMassError,
)
from .measure import (
    CodelengthFn,
    KraftReport,
    Measure,
    add,
    as_measure,
    codelengths_from,
    condition,
    kraft_check,
    multiply,
    normalize,
    scale,
)
from .divergence import KL, REVERSE_KL, FDivergenceSpec, f_divergence, kl_extended, kl_poisson_product, kl_terms
from .poisson import (
    CountDistribution,
    bernoulli_sum,
    bernoulli_vector,
    binomial_pmf,
    convolve,
    convolve_power,
    kl_to_product_poisson,
    maxent_check,
    poisson_pmf,
    product_poisson,
    thin,
    thin_divergence_identity,
    thin_law_experiment,
    total_variation,
)
from .gof import (
    QQTable,
    binom_cdf,
    binom_divergence,
    classical_qq,
    g_statistic,
    intersection_check,
    mach_zehnder,
    poisson_qq,
    poisson_two_sample_divergence,
)
from .projections import (
    ConstraintSet,
    ProjectionResult,
    asymptotic_sequence_check,
    kkt_report,
    project,
    thm7_check,
    thm8_check,
)
from .altmin import AltMinTrace, altmin_accelerated, altmin_cyclic, orthogonalize, project_normalized, project_tilde
from .poly import OrthoPoly, charlier, epsilon_sweep, inequality_scan, krawtchouk, mgf_condition
from .dutchbook import DichotomyCertificate, PayoffSystem, decide, verify
