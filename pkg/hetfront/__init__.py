"""
hetfront - front dynamics in a bistable FitzHugh-Nagumo system with spatial
heterogeneities: background states, stationary fronts, wave speeds, PDE runs
and the delay equation for the front position.
"""

__version__ = "0.1.0"

from .config import Config
from .errors import HetfrontError
from .experiments import ExperimentReport, compare_trajectories, run_example, time_align
from .heterogeneity import HeterogeneitySpec, build_example_heterogeneity
from .history import FrontHistory
from .model import GridProfile, ModelParams, Trajectory
