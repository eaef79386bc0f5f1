"""Audit, simulate and undo label and selection bias on discrete tabular data."""

from .audit import (
    audit_all,
    audit_sp_label,
    audit_sp_selection,
    audit_wae_label,
    audit_wae_selection,
)
from .bias import (
    LabelBiasSpec,
    SelectionBiasSpec,
    apply_label_bias,
    apply_selection_bias,
    delta,
    inject_dataset_label_bias,
    inject_dataset_selection_bias,
    label_bias_coefficients,
)
from .distribution import (
    Dataset,
    JointDistribution,
    Schema,
    cond_y,
    from_dataset,
    marg_y,
    marg_y_given_a,
    support,
    total_variation,
    validate,
)
from .errors import (
    AuditError,
    BiasLensError,
    DistributionError,
    InfeasibleError,
    SpecError,
    TrainingDivergence,
    UndefinedConditionalError,
)
from .measures import check_statistical_parity, check_wae, dpd_distributional, dpd_empirical, odds
from .models import LinearModel, Metrics, ScoreTable, TrainConfig, evaluate, fit_plugin_bayes, predict, train_logistic
from .recovery import (
    f_delta,
    feasible_c_specs_sp,
    feasible_c_specs_wae,
    feasible_k_specs_sp,
    recover_selection,
    recover_sp_label,
    recover_sp_selection,
    recover_wae_label,
    recover_wae_selection,
    reweighing_weights,
    selection_dpd_gap,
)
from .synth import SynthConfig, fixture, generate_fair_sp_network, sample_dataset

__version__ = "0.1.0"
