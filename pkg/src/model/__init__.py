from src.model.universe import (
    COMPONENTS,
    USERS,
    DataItem,
    Dimension,
    Op,
    Principal,
    Request,
    Universe,
    UniverseBuilder,
)
from src.model.oracle import affected_principal, req_valid, sb, scope_data, shares_component, shares_user
from src.model.soundness import SoundnessReport, Violation, soundness_check

__all__ = [
    "COMPONENTS",
    "USERS",
    "DataItem",
    "Dimension",
    "Op",
    "Principal",
    "Request",
    "Universe",
    "UniverseBuilder",
    "affected_principal",
    "req_valid",
    "sb",
    "scope_data",
    "shares_component",
    "shares_user",
    "SoundnessReport",
    "Violation",
    "soundness_check",
]
