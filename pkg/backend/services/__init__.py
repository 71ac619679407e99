__all__ = [
    "estimators",
    "experiments",
    "geometry",
    "limits",
    "stable",
    "walks",
]

from backend.services import estimators, experiments, geometry, limits, stable, walks
