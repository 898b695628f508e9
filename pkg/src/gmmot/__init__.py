"""Gaussian mixture summaries compared with a component-level Wasserstein distance."""

from .classifier import (
    ClassModelSet,
    EvalProtocol,
    EvaluationReport,
    LabeledChunk,
    MatchResult,
    classify_chunk,
    evaluate,
    fit_class_models,
    gmm_l2_baseline,
    knn_baseline,
)
from .gaussian import Gaussian, SpdSqrtResult, gaussian_w2, gaussian_w2_squared, spd_sqrt
from .mixture import (
    FitConfig,
    FitReport,
    Gmm,
    e_step,
    fit,
    load_model,
    log_likelihood,
    m_step,
    save_model,
    select_n_components,
)
from .transport import (
    DualSolution,
    TransportPlan,
    build_cost_matrix,
    gmm_wasserstein,
    solve_transport,
    verify_duality,
)
from .wasserstein1d import EmpiricalDistribution, check_rearrangement_inequality, empirical_wn, sample_gmm

__version__ = "0.1.0"
