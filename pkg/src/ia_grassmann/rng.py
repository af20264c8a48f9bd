"""Seed handling shared by all stochastic entry points."""

from __future__ import annotations

import numpy as np

__all__ = ["as_rng"]


def as_rng(seed) -> np.random.Generator:
    """Return a Generator for an int / tuple seed, passing generators through.

    Tuples feed numpy's SeedSequence, so hierarchical seeds such as
    ``(base_seed, trial, receiver)`` produce independent, reproducible
    streams without any shared RNG state.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
