"""HTTP probe service supplying base distributions to the evaluation harness."""

from .app import ServeConfig, TASKS, create_app
from .backends import (
    Backend,
    HashBackend,
    STUB_MODEL,
    TransformersBackend,
    make_backend,
)

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "HashBackend",
    "STUB_MODEL",
    "ServeConfig",
    "TASKS",
    "TransformersBackend",
    "create_app",
    "make_backend",
]
