"""Class-competitive attribution refinement and evaluation on synthetic grid data."""

from ._alens import (
    AlensError,
    Model,
    class_distribution,
    localization,
    refine,
    run_cli,
    select_classes,
    similarity,
)

__all__ = [
    "AlensError",
    "Model",
    "class_distribution",
    "localization",
    "refine",
    "run_cli",
    "select_classes",
    "similarity",
]
