"""snmix: skew-normal mixture models with penalized maximum likelihood.

Fit finite skew-normal mixtures by penalized ECM/ECME (preventing variance
collapse and shape blow-up), draw samples, compare mixing distributions,
and reproduce the associated Monte-Carlo study designs.
"""

from .core import (
    AzzaliniShapePenalty,
    PenaltySpec,
    ScalePenalty,
    ShapePenalty,
    SnComponent,
    SnMixture,
    delta_of_lambda,
    inverse_mills,
    loglik,
    mixture_logpdf,
    penalized_loglik,
    penalty_lambda,
    penalty_lambda_azzalini,
    penalty_sigma,
    sn_logpdf,
    tuning,
)
from .estimator import (
    DegenerateComponentError,
    EStepCache,
    FitConfig,
    FitResult,
    MEValidityError,
    cm_step_lambda,
    cm_step_lambda_azzalini,
    cm_step_mu,
    cm_step_pi,
    cm_step_sigma2,
    cml_step,
    e_step,
    fit,
    label_sort,
    profile_lrt_me,
    q_function,
)
from .init import (
    ExplicitStart,
    InitReport,
    KMeansMoments,
    PerturbedStart,
    TrueValue,
    kmeans_moments_init,
    perturbed_init,
    true_value_init,
)
from .metrics import (
    THETA_STAR,
    BoxRegion,
    DegeneracyFlags,
    bias_rmse,
    degeneracy_flags,
    distance_D,
    distance_Dstar,
    mixing_cdf,
)
from .sampler import child_rng, make_rng, sample_half_normal, sample_mixture, sample_sn

__version__ = "0.1.0"
