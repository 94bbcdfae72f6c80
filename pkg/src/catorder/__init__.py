"""Category-order selection for multinomial logit models.

Fits baseline-category, cumulative, adjacent-categories, and
continuation-ratio logit models (po/npo/ppo) by maximum likelihood,
searches over response-category orders with exact equivalence-class
pruning, ranks orders by AIC/BIC, and ships simulation plus
cross-validation harnesses for order-identifiability studies.
"""

__version__ = "0.1.0"

from .errors import (
    CatorderError,
    DataError,
    DimensionError,
    InfeasibleError,
    JTooLargeError,
    NonConvergenceError,
    NonFiniteLikelihoodError,
    NotEquivalentError,
    SingularHessianError,
    UnsupportedTransformError,
)
from .fitting import FitConfig, FitResult, fit_mle, information_matrix, score_vector
from .model import (
    Dataset,
    EtaMatrix,
    FeasibilityReport,
    ModelSpec,
    Theta,
    category_log_probabilities,
    category_probabilities,
    check_cumulative_feasibility,
    linear_predictors,
    log_likelihood,
)
from .orders import (
    EquivalenceClasses,
    Permutation,
    enumerate_orders,
    equivalence_classes,
    transform_theta,
)
from .selection import (
    AllModelsResult,
    ClassFit,
    OrderSearchResult,
    rank_of_order,
    search_all_models,
    search_orders,
)
from .simulate import (
    CrossValPlan,
    CrossValResult,
    ExperimentOutcome,
    ReplicateTable,
    SimulationPlan,
    cross_validate,
    paired_t_test_one_sided,
    replicate_experiment,
    simulate_dataset,
    true_order_experiment,
)

__all__ = [
    "CatorderError",
    "DataError",
    "DimensionError",
    "InfeasibleError",
    "JTooLargeError",
    "NonConvergenceError",
    "NonFiniteLikelihoodError",
    "NotEquivalentError",
    "SingularHessianError",
    "UnsupportedTransformError",
    "FitConfig",
    "FitResult",
    "fit_mle",
    "information_matrix",
    "score_vector",
    "Dataset",
    "EtaMatrix",
    "FeasibilityReport",
    "ModelSpec",
    "Theta",
    "category_log_probabilities",
    "category_probabilities",
    "check_cumulative_feasibility",
    "linear_predictors",
    "log_likelihood",
    "EquivalenceClasses",
    "Permutation",
    "enumerate_orders",
    "equivalence_classes",
    "transform_theta",
    "AllModelsResult",
    "ClassFit",
    "OrderSearchResult",
    "rank_of_order",
    "search_all_models",
    "search_orders",
    "CrossValPlan",
    "CrossValResult",
    "ExperimentOutcome",
    "ReplicateTable",
    "SimulationPlan",
    "cross_validate",
    "paired_t_test_one_sided",
    "replicate_experiment",
    "simulate_dataset",
    "true_order_experiment",
]
