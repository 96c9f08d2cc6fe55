"""Label-free accuracy estimation under covariate shift.

Confidence-based estimators (ATC, DoC, COT, GDE) augmented with a K-NN
distance check that rejects test samples lying far from the training
embedding distribution, plus the evaluation protocol and a synthetic
verification lab.
"""

from .bundle import BundleError, Manifest, SplitBundle, load_bundle, save_bundle
from .calibration import (
    ConfidenceVector,
    TemperatureModel,
    confidences,
    fit_temperature_classwise,
    fit_temperature_global,
    softmax,
)
from .confidence import AtcModel, atc_estimate, doc_estimate, fit_atc
from .cot import CotConfig, cot_estimate
from .distance import (
    DistanceChecker,
    MahalanobisChecker,
    average_knn_distance,
    distance_kept_mask,
    fit_distance_checker,
    fit_mahalanobis_checker,
    mahalanobis_scores,
)
from .estimators import (
    EstimateReport,
    atc_dist_estimate,
    gde_dist_estimate,
    gde_estimate,
)
from .evaluation import (
    ErrorRecord,
    MethodComparison,
    SignificanceResult,
    compare_methods,
    emit_report,
    mae,
    wilcoxon_signed_rank,
)
from .pipeline import (
    METHODS,
    EstimatorConfig,
    run_estimate,
    run_evaluate,
    true_test_accuracy,
)
from .synthetic import (
    PRESETS,
    ShiftSpec,
    SyntheticScenario,
    generate,
    scenario_from_dict,
    scenario_suite,
    sibling_scenario,
)

__version__ = "0.1.0"
