"""privopt: pure epsilon-DP stochastic convex optimization for heavy-tailed
losses via localized double output perturbation of Lipschitz extensions."""

from .dp import (
    NoiseSpec,
    PrivacyBudget,
    exponential_mechanism,
    sample_isotropic_laplace,
)
from .erm import (
    ErmInstance,
    ErmReport,
    direct_extension_erm,
    double_outputpert,
    em_pgm,
    outputpert_localize,
)
from .estimators import PrivateERM, PrivateSCO
from .extension import (
    extension_bias_diag,
    extension_subgradient_approx,
    extension_value_approx,
    joint_objective,
    joint_subgradient,
)
from .geometry import (
    Ball,
    Box,
    LocalizedDomain,
    Product,
    inexact_project_localized,
    project_exact,
)
from .losses import (
    Dataset,
    InstanceSpec,
    LossModel,
    MomentSpec,
    Sample,
    eval_loss,
    eval_subgradient,
    gen_packing_hard,
    gen_pareto_linear,
    gen_two_point,
)
from .sco import ScoConfig, aggregate_geometric, pop_localize
from .subgrad import FirstOrderOracle, SolveCertificate, adaptive_projsubgrad, biased_psg

__version__ = "0.1.0"

__all__ = [
    "Ball", "Box", "LocalizedDomain", "Product",
    "project_exact", "inexact_project_localized",
    "LossModel", "Dataset", "Sample", "MomentSpec", "InstanceSpec",
    "eval_loss", "eval_subgradient",
    "gen_pareto_linear", "gen_packing_hard", "gen_two_point",
    "joint_objective", "joint_subgradient",
    "extension_value_approx", "extension_subgradient_approx",
    "extension_bias_diag",
    "SolveCertificate", "FirstOrderOracle",
    "adaptive_projsubgrad", "biased_psg",
    "PrivacyBudget", "NoiseSpec",
    "sample_isotropic_laplace", "exponential_mechanism",
    "ErmInstance", "ErmReport",
    "outputpert_localize", "double_outputpert", "direct_extension_erm",
    "em_pgm",
    "ScoConfig", "pop_localize", "aggregate_geometric",
    "PrivateERM", "PrivateSCO",
    "__version__",
]
