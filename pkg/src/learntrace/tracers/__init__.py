from .cognitive import CognitiveParams, exemplar_predict, prototype_predict, similarity
from .inputs import encode_step_input, per_class_accuracy, step_input_length
from .linear import PredictedClassifier, classify, softmax_np, static_predict, time_indexed_predict
from .model import CompiledBatch, TracerModel, TracerState
from .variant import KINDS, RECURRENT_KINDS, TracerVariant

__all__ = [
    "CognitiveParams", "exemplar_predict", "prototype_predict", "similarity",
    "encode_step_input", "per_class_accuracy", "step_input_length",
    "PredictedClassifier", "classify", "softmax_np", "static_predict",
    "time_indexed_predict", "CompiledBatch", "TracerModel", "TracerState",
    "KINDS", "RECURRENT_KINDS", "TracerVariant",
]
