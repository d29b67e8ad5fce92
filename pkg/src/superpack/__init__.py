"""Hard superball packings in mixed block-norm spaces.

Subpackages:

- ``geometry``: block norms, distances, volumes, regions
- ``constants``: uniform convexity chain, intersection constant, density bound
- ``gibbs``: grand canonical hard-core model and birth-death sampler
- ``lattice_graph``: cube lattice, geometric graph, greedy packings
- ``thermo``: pressure and entropy estimators
- ``cli``: the ``superpack`` command line entry point
"""

__version__ = "0.1.0"

from .errors import ComputationError, InputError
from .geometry import (
    BlockSpec,
    SpaceParams,
    SuperballRegion,
    TorusRegion,
    contains,
    distance,
    norm,
    r_unit,
    unit_ball_volume,
)

__all__ = [
    "__version__",
    "ComputationError",
    "InputError",
    "BlockSpec",
    "SpaceParams",
    "SuperballRegion",
    "TorusRegion",
    "contains",
    "distance",
    "norm",
    "r_unit",
    "unit_ball_volume",
]
