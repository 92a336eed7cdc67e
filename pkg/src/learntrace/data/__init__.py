from .adapter import adapt_jsonl, adapt_session
from .greebles import FEATURE_NAMES, GreeblesSpec, generate_greebles, render_greeble, sample_features
from .manifest import DatasetManifest, ManifestItem, load_manifest, save_manifest
from .sessions import (
    SESSION_STEPS,
    TEST_STEPS,
    TRAIN_STEPS,
    Interaction,
    LearnerSession,
    load_sessions,
    save_sessions,
    session_from_dict,
    session_to_dict,
    validate_session,
)

__all__ = [
    "adapt_jsonl", "adapt_session", "FEATURE_NAMES", "GreeblesSpec", "generate_greebles",
    "render_greeble", "sample_features", "DatasetManifest", "ManifestItem", "load_manifest",
    "save_manifest", "SESSION_STEPS", "TEST_STEPS", "TRAIN_STEPS", "Interaction",
    "LearnerSession", "load_sessions", "save_sessions", "session_from_dict",
    "session_to_dict", "validate_session",
]
