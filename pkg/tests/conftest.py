import numpy as np
import pytest
from hypothesis import strategies as st

from lvlingam.sem import random_canonical_dag


@st.composite
def canonical_dags(draw, max_obs=6, max_lat=3):
    p_o = draw(st.integers(2, max_obs))
    p_l = draw(st.integers(0, max_lat))
    prob = draw(st.floats(0.1, 0.9))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_canonical_dag(p_o, p_l, prob, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
