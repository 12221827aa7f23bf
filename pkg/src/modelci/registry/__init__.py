from modelci.registry.registry import ModelRegistry
from modelci.registry.store import FileStore, StoreBackend
from modelci.registry.types import (
    LIFECYCLE,
    ModelQuery,
    ModelRecord,
    ModelVariant,
    RegistrationManifest,
    TensorSpec,
    legal_transition,
)

__all__ = [
    "ModelRegistry",
    "FileStore",
    "StoreBackend",
    "LIFECYCLE",
    "ModelQuery",
    "ModelRecord",
    "ModelVariant",
    "RegistrationManifest",
    "TensorSpec",
    "legal_transition",
]
