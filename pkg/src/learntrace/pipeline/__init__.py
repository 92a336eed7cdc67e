from .dataset import StimulusStore, compile_sessions
from .evaluate import (
    ProbabilityTrace,
    choose_probes,
    evaluate_model,
    gt_label_reports,
    probability_trace,
    reshuffle_protocol,
    session_probabilities,
)
from .export import export_states
from .loss import sequence_loss
from .metrics import APReport, aggregate_reports, ap_report_from_probs, average_precision, gt_label_probs
from .split import SplitAssignment, split_learners, split_sessions
from .stats import correctness_stats, skewness
from .train import Hyperparams, TrainReport, build_model, train

__all__ = [
    "StimulusStore", "compile_sessions", "ProbabilityTrace", "choose_probes",
    "evaluate_model", "gt_label_reports", "probability_trace", "reshuffle_protocol",
    "session_probabilities", "export_states", "sequence_loss", "APReport",
    "aggregate_reports", "ap_report_from_probs", "average_precision", "gt_label_probs",
    "SplitAssignment", "split_learners", "split_sessions", "correctness_stats",
    "skewness", "Hyperparams", "TrainReport", "build_model", "train",
]
