import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from superpack.geometry import BlockSpec, SpaceParams

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("default")


@st.composite
def block_specs(draw, max_n=10):
    n = draw(st.integers(min_value=1, max_value=max_n))
    interior = draw(st.sets(st.integers(1, n - 1), max_size=n - 1)) if n > 1 else set()
    return BlockSpec((0, *sorted(interior), n))


@st.composite
def spaces(draw, max_n=10, p_strategy=None):
    blocks = draw(block_specs(max_n=max_n))
    if p_strategy is None:
        p_strategy = st.floats(1.0, 2.0)
    p = draw(p_strategy)
    return SpaceParams.create(p, blocks.cuts)


def bounded_floats(magnitude=1e6):
    """Zero or sign * [1e-9, magnitude]: keeps squared block norms in range."""
    return st.builds(
        lambda s, m: s * m,
        st.sampled_from([-1.0, 0.0, 1.0]),
        st.floats(1e-9, magnitude, allow_nan=False),
    )


@st.composite
def points(draw, n, magnitude=1e6):
    coords = draw(st.lists(bounded_floats(magnitude), min_size=n, max_size=n))
    return np.asarray(coords)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
