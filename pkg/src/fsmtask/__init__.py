"""Satellite tasking over food-security reward grids."""

from .errors import (ContractError, DimensionError, DomainError, InputError, PreconditionError,
                     TaskingError)
from .grid import (DegenerateScaleWarning, FsmBin, PredictionSet, RewardGrid, TileSet, bin_fsm,
                   estimate_global_variance, load_grid, load_predictions, resize_bilinear,
                   save_grid, scale_rewards, tile_image, upsample_tile)
from .heatmap import render_heatmap
from .mdp import (ACTIONS, CloudField, CloudModel, MdpState, TaskingMdp, cloud_stationary,
                  realize_clouds, reward, simulate_trajectory, transition, value_iteration)
from .search import CostModel, GridPos, Path, neighbors, select_goal, ucs
from .stochastic import GoalMode, McConfig, path_probability_matrix, sample_realization
from .synth import synth_grid

__version__ = "0.1.0"
