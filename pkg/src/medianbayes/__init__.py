# ---
# title: Пакет medianbayes
# purpose: Bayesian nonparametric tests for multivariate location via the spatial median
# status: work
# tests: yes
# deps: numpy, scipy
# ---
"""Spatial-median location tests: NPBayes credible regions and classical comparators."""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = [
    "asymptotics",
    "bnp_tests",
    "classical",
    "datagen",
    "dp",
    "numerics",
    "spatial",
]
