from .appmodel import APP_MODEL_SCHEMA, AppModel, ConfigurationError
from .notes import BUILTIN_APPS, FAULTS, build_notes_app, load_app_model, notes_reference_properties
from .simulator import (
    Backend,
    RejectedEvent,
    Session,
    SimulatedBackend,
    SimulatedSession,
    launch,
    perform,
    reset,
)

__all__ = [
    "APP_MODEL_SCHEMA",
    "AppModel",
    "Backend",
    "BUILTIN_APPS",
    "ConfigurationError",
    "FAULTS",
    "RejectedEvent",
    "Session",
    "SimulatedBackend",
    "SimulatedSession",
    "build_notes_app",
    "launch",
    "load_app_model",
    "notes_reference_properties",
    "perform",
    "reset",
]
