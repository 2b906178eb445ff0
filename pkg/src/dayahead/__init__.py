"""Day-ahead electricity price forecasting toolkit.

Hybrid recurrent forecasting models combined with feature selection,
walk-forward evaluation, Diebold-Mariano model comparison, and
Shapley-value feature attribution. Everything is seeded and
deterministic; no wall-clock entropy is used anywhere.
"""

__version__ = "0.1.0"
