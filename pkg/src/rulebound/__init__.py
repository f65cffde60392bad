"""Rule-consistent multi-label text classification.

Pipeline pieces: implication-rule mining over label co-occurrence, ASP
weak-constraint export with a solver-free violation auditor, rule-based
training-set augmentation, TF-IDF + linear classification under a combined
weighted-BCE / fuzzy-implication objective, and per-class threshold tuning.
"""

from .augment import AugmentationSummary, augment_dataset
from .corpus import (
    Dataset,
    LabelVocab,
    Record,
    decode_labels,
    encode_labels,
    generate_synthetic,
    labels_matrix,
    load_dataset,
    split_dataset,
    write_dataset,
)
from .errors import ParseError, RuleboundError, TrainingDiverged, VocabularyError
from .features import (
    FeatureVector,
    Vectorizer,
    VectorizerConfig,
    fit_vectorizer,
    load_vectorizer,
    save_vectorizer,
    vectorize,
    vectorize_all,
)
from .metrics import (
    MetricsReport,
    PredictionBatch,
    Thresholds,
    apply_thresholds,
    compute_metrics,
    hamming_loss,
    macro_f1,
    micro_f1,
    render_metrics_report,
    tune_thresholds,
)
from .model import (
    ClassWeights,
    Model,
    TrainConfig,
    TrainLog,
    bce_loss,
    compute_class_weights,
    forward,
    fuzzy_loss,
    load_checkpoint,
    predict_probs,
    save_checkpoint,
    total_loss,
    train,
)
from .rules import (
    Rule,
    RuleSet,
    ValidationReport,
    merge_rulesets,
    mine_rules,
    parse_rules,
    serialize_rules,
    validate_ruleset,
)
from .asp import (
    AspProgram,
    ViolationReport,
    audit_violations,
    check_with_clingo,
    emit_prediction_facts,
    emit_weak_constraints,
    render_violation_report,
)

__version__ = "0.1.0"
