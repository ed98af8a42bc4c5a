"""Density-matrix and nonnegative recommender models.

Users are density matrices, items are measurement outcome operators, and
predicted like probabilities are Born-rule traces.  Submodules load lazily
so importing the package stays cheap.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_SUBMODULES = frozenset(
    {"cli", "data", "exceptions", "linalg", "metrics", "models", "tags", "train"}
)

__all__ = sorted(_SUBMODULES | {"__version__"})


def __getattr__(name):
    if name in _SUBMODULES:
        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
