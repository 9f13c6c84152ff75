"""Multi-UAV grid coverage path planning with small online-trained Q-networks."""

__version__ = "0.1.0"

from .gridworld import Action, GridMap  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = ["Action", "BACKEND", "GridMap", "__version__"]
