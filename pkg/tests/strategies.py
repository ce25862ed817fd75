"""Hypothesis strategies for random scalar graphs."""

import numpy as np
from hypothesis import strategies as st

from reebgw.graph import random_graph


@st.composite
def graphs(draw, min_nodes=1, max_nodes=12, max_extra=4, integer_values=False):
    n = draw(st.integers(min_nodes, max_nodes))
    extra = draw(st.integers(0, max_extra))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_graph(np.random.default_rng(seed), n, extra, integer_values=integer_values)
