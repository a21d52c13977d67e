import numpy as np
import pytest

from qg2p.bc_maps import BoundaryMap
from qg2p.graph_core import build_graph


@pytest.fixture
def interval():
    """Single unit edge."""
    return build_graph({"edges": [["a", "b", 1.0]]})


@pytest.fixture
def two_edges():
    """Path graph with lengths 1 and 1.5."""
    return build_graph({"edges": [["a", "b", 1.0], ["b", "c", 1.5]]})


@pytest.fixture
def star3():
    """3-star, unit legs."""
    return build_graph({"edges": [["c", "l1", 1.0], ["c", "l2", 1.0],
                                  ["c", "l3", 1.0]]})


def smooth_bump(y, center=0.5, radius=0.4):
    """C-infinity bump supported in [center - radius, center + radius]."""
    z = (y - center) / radius
    if abs(z) >= 1.0:
        return 0.0
    return float(np.exp(1.0 - 1.0 / (1.0 - z * z)))


def bump_interaction_map(dim=4, L0=None):
    """Block-structured, corner-regular, genuinely y-dependent map on a
    single-edge graph: P = 0, L(y) = bump(y) * L0 per half."""
    half = dim // 2
    if L0 is None:
        L0 = np.array([[2.0, 0.5], [0.5, 1.0]])

    def ev(y):
        g = smooth_bump(y)
        L = np.zeros((dim, dim))
        L[:half, :half] = g * L0
        L[half:, half:] = g * L0
        return np.zeros((dim, dim)), L

    return BoundaryMap(dim=dim, eval_fn=ev, kind="callable")
