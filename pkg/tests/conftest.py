from __future__ import annotations

import numpy as np
import pytest

from doilab import perturbed_pair, random_commuting_pair


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_pairs(n, seed, scale=0.1):
    """A commuting pair and its perturbed partner, seeded reproducibly."""
    pair_a = random_commuting_pair(n, seed)
    pair_b = perturbed_pair(pair_a, scale, seed + 7919)
    return pair_a, pair_b


@pytest.fixture
def small_pairs():
    return make_pairs(5, 42)
