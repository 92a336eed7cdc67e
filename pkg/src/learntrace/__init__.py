"""learntrace: models, simulation, and data collection for tracing how human
learners' classification behavior evolves over a feedback-driven session."""

__version__ = "0.1.0"
