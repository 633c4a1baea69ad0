from .metrics import (
    BleuBreakdown,
    ClassificationF1Report,
    F1Counts,
    PredictionRecord,
    bleu4,
    classification_f1,
    closed_vqa_accuracy,
    green_score,
    load_predictions,
    normalize_answer,
    open_vqa_exact_match,
    rouge_1,
    rouge_l,
    tokenize,
)
from .scaling import LossObservation, ScalingLawParams, fit_scaling_law, load_loss_csv, predict_loss
from .stats import McNemarTable, mcnemar, paired_table

__all__ = [
    "BleuBreakdown",
    "ClassificationF1Report",
    "F1Counts",
    "PredictionRecord",
    "bleu4",
    "classification_f1",
    "closed_vqa_accuracy",
    "green_score",
    "load_predictions",
    "normalize_answer",
    "open_vqa_exact_match",
    "rouge_1",
    "rouge_l",
    "tokenize",
    "LossObservation",
    "ScalingLawParams",
    "fit_scaling_law",
    "load_loss_csv",
    "predict_loss",
    "McNemarTable",
    "mcnemar",
    "paired_table",
]
