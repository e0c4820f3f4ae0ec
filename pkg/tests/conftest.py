import numpy as np
import pytest
from hypothesis import strategies as st

from picbalance.grid import CostField


def brute_force_cut(costs_along, target_fraction, k_min=1, k_max=None):
    """Exhaustive boundary scan: smallest k minimizing |left - fraction*total|."""
    costs_along = [int(c) for c in costs_along]
    total = sum(costs_along)
    target = target_fraction * total
    k_max = len(costs_along) - 1 if k_max is None else k_max
    best_k, best_err = None, None
    for k in range(k_min, k_max + 1):
        left = 0
        for c in costs_along[:k]:
            left += c
        err = abs(left - target)
        if best_err is None or err < best_err:
            best_k, best_err = k, err
    return best_k


def slab_profile(costs, rect, dim):
    ix0, ix1, iy0, iy1 = rect
    sub = np.asarray(costs)[ix0:ix1, iy0:iy1]
    return sub.sum(axis=1) if dim == 0 else sub.sum(axis=0)


def tree_signature(tree):
    return [(n.rect, n.rank0, n.nranks, n.height, n.cut_dim, n.cut_index) for n in tree.nodes()]


@st.composite
def cost_fields(draw, max_side=32, max_cost=50):
    gx = draw(st.integers(1, max_side))
    gy = draw(st.integers(1, max_side))
    seed = draw(st.integers(0, 2**32 - 1))
    sparse = draw(st.booleans())
    rng = np.random.default_rng(seed)
    costs = rng.integers(0, max_cost + 1, size=(gx, gy))
    if sparse:
        costs[rng.random((gx, gy)) < 0.8] = 0
    return CostField(costs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
