"""Online Mahalanobis metric tracking under nonstationary drift.

Building blocks: a margin-hinge metric objective (metric), one proximal
mirror-descent learner (comid), a dyadic ensemble of them (rice), a
strongly-adaptive convex-combination combiner (ocelad), a synthetic drift
simulator (driftsim), evaluation utilities (evaluation), and an experiment
runner with CSV/checkpoint IO (experiment, cli).
"""

from .backend import BACKEND
from .metric import (
    Constraint,
    LossConfig,
    MetricState,
    Regularizer,
    composite_loss,
    hinge_loss,
    identity_state,
    loss_subgradient,
    mahalanobis_sq,
    make_state,
    regularizer_value,
)
from .comid import ComidLearner, StepFailure, comid_step, new_learner, prox_l1_psd, prox_nuclear_psd
from .rice import DyadicInterval, RiceConfig, RiceEnsemble, active_intervals
from .ocelad import (
    EnsembleWeights,
    LearnerOutput,
    combine,
    empty_weights,
    estimated_regret,
    ocelad_step,
    sync_active,
    update_weights,
    weight_rate,
)
from .driftsim import (
    DriftScenario,
    DriftSegment,
    ScenarioStream,
    SyntheticDataset,
    generate_dataset,
    rotation_step,
    sample_constraint,
    skew_rotation,
)
from .evaluation import (
    EmbeddingMap,
    RegretLedger,
    best_fixed_state,
    dynamic_regret,
    embedding_from_metric,
    kmeans,
    knn_error,
    nmi,
)

__version__ = "0.1.0"
