"""Shared instance generators for the suite."""

import numpy as np
import pytest

from fairpost.core import FairnessSpec, ScoreBundle


def tiny_instance(seed, kind="single", alpha=0.2):
    """Random exact instance small enough for basis enumeration.

    ``single`` is one two-group constraint on class 1; ``sp`` is full
    statistical parity (only n = 2 stays under the enumeration cap there).
    """
    rng = np.random.default_rng(seed)
    if kind == "sp":
        n, ny, k = 2, 2, 2
        constraints = ((0, (0, 1)), (1, (0, 1)))
    elif kind == "single3":
        n, ny, k = 2, 2, 3
        constraints = ((1, (0, 1, 2)),)
    else:
        n, ny, k = int(rng.integers(2, 5)), 2, 2
        constraints = ((1, (0, 1)),)
    risks = rng.uniform(0.0, 1.0, size=(n, ny))
    groups = rng.dirichlet(np.ones(k), size=n)
    weights = rng.dirichlet(np.ones(n)) if rng.random() < 0.5 else np.full(n, 1.0 / n)
    bundle = ScoreBundle(risks=risks, groups=groups, weights=weights)
    spec = FairnessSpec(num_classes=ny, num_groups=k, constraints=constraints, alpha=alpha)
    return bundle, spec


def random_exact_instance(seed, n=6, ny=2, k=2, alpha=0.2):
    """Exact atomic instance of moderate size (not capped for enumeration)."""
    rng = np.random.default_rng(seed)
    risks = rng.uniform(0.0, 1.0, size=(n, ny))
    groups = rng.dirichlet(np.ones(k), size=n)
    weights = rng.dirichlet(np.ones(n) * 3.0)
    bundle = ScoreBundle(risks=risks, groups=groups, weights=weights)
    constraints = tuple((y, tuple(range(k))) for y in range(ny))
    spec = FairnessSpec(num_classes=ny, num_groups=k, constraints=constraints, alpha=alpha)
    return bundle, spec


@pytest.fixture
def rng():
    return np.random.default_rng(0)
