"""Model-based clustering of count data with multinomial mixtures."""

from .core import (
    CountDataset,
    DimensionMismatchError,
    EmConfig,
    FitResult,
    MixtureModel,
    e_step,
    em_fit,
    hard_assignments,
    log_multinomial_pmf,
    m_step,
    mixture_log_likelihood,
    total_log_coefficient,
)
from .estimators import AutoMultinomialMixture, MultinomialMixture
from .evaluation import (
    BenchmarkReport,
    MethodSpec,
    adjusted_rand_index,
    run_benchmark,
    stability,
)
from .initialization import (
    InitConfig,
    init_cem,
    init_random,
    init_rnd_em,
    init_sem,
    init_sm_em,
    initialize,
)
from .modelgen import (
    CandidateModelSet,
    em_hac,
    generate_candidates,
    int_em,
    merge_components,
    mul_em,
    symmetric_kl_divergence,
)
from .modelsel import (
    CriterionCurve,
    bic,
    criterion_curve,
    icl,
    l_method,
    mml,
    select_model,
)
from .synth import SeparationRejectionError, SynthSpec, classify_separation, generate

__version__ = "0.1.0"

__all__ = [
    "AutoMultinomialMixture",
    "BenchmarkReport",
    "CandidateModelSet",
    "CountDataset",
    "CriterionCurve",
    "DimensionMismatchError",
    "EmConfig",
    "FitResult",
    "InitConfig",
    "MethodSpec",
    "MixtureModel",
    "MultinomialMixture",
    "SeparationRejectionError",
    "SynthSpec",
    "adjusted_rand_index",
    "bic",
    "classify_separation",
    "criterion_curve",
    "e_step",
    "em_fit",
    "em_hac",
    "generate",
    "generate_candidates",
    "hard_assignments",
    "icl",
    "init_cem",
    "init_random",
    "init_rnd_em",
    "init_sem",
    "init_sm_em",
    "initialize",
    "int_em",
    "l_method",
    "log_multinomial_pmf",
    "total_log_coefficient",
    "m_step",
    "merge_components",
    "mixture_log_likelihood",
    "mml",
    "mul_em",
    "run_benchmark",
    "select_model",
    "stability",
    "symmetric_kl_divergence",
]
