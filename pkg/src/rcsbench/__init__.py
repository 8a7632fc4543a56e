"""Random-circuit sampling benchmark toolkit: circuits, noisy simulation, estimators."""

__version__ = "0.1.0"
