"""Active learning for multi-instance multi-label data with incomplete
bag-level labels: a discriminative instance-level classifier trained from
partially labeled bags, query selection over bag-class pairs, and online or
batch model updates."""

from .data import (
    Bag,
    MimlDataset,
    OracleTruth,
    SyntheticSample,
    cross_validation_splits,
    dataset_from_truth,
    derive_index_sets,
    generate_synthetic,
    load_dataset,
    load_truth,
    mask_labels,
    reveal_label,
    select_bags,
    write_features,
    write_labels,
)
from .model import (
    bag_class_logprob,
    bag_class_prob_positive,
    bag_positive_probs,
    instance_posterior,
    load_weights,
    log_prob_not_class,
    predict_bag,
    predict_matrix,
    save_weights,
)
from .objective import (
    bag_gradient,
    logprob_gradient_for_label,
    mml_gradient,
    mml_objective,
    pair_gradient,
    pair_loss,
)
from .training import (
    SgdState,
    TrainConfig,
    compute_tau,
    full_gd,
    online_update,
    project,
    sgd_epochs,
    sgd_step,
    train,
)
from .selection import (
    PairScore,
    SelectionResult,
    average_label_cardinality,
    egl_pair_score,
    score_pool,
    select,
    select_bag_all,
    select_bag_then_label,
    select_pair,
    uncertainty_pair_score,
)
from .active_loop import QueryRecord, RunConfig, RunResult, run, simulated_oracle
from .metrics import MetricsRow, aggregate_runs, evaluate, evaluate_probs
from .bruteforce import (
    bruteforce_joint_loglik,
    bruteforce_marginal,
    finite_diff_gradient,
    run_suite,
)
from .estimator import MimlClassifier

__version__ = "0.1.0"
