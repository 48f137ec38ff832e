"""Monte Carlo propagation of prediction noise into path probabilities.

Each realization perturbs every tile of the mean grid with independent
Gaussian noise of shared variance ``sigma2``, solves UCS on the perturbed
grid, and marks the tiles on the optimal path. The path probability
matrix is the fraction of realizations whose path crosses each tile.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._rng import spawn_rngs
from .errors import DomainError
from .grid import RewardGrid
from .search import CostModel, GridPos, _check_pos, select_goal, ucs


class GoalMode(str, Enum):
    PER_REALIZATION = "per_realization"
    FIXED = "fixed"


@dataclass(frozen=True)
class McConfig:
    iterations: int = 1000
    sigma2: float = 0.0
    seed: int = 0
    cost: CostModel = CostModel.FSM_SUM
    fixed_start: GridPos = GridPos(0, 0)
    goal_mode: GoalMode = GoalMode.PER_REALIZATION

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise DomainError(f"iterations must be >= 1, got {self.iterations}")
        if not self.sigma2 >= 0:
            raise DomainError(f"sigma2 must be >= 0, got {self.sigma2}")
        object.__setattr__(self, "cost", CostModel.parse(self.cost))
        object.__setattr__(self, "goal_mode", GoalMode(self.goal_mode))
        object.__setattr__(self, "fixed_start", GridPos(*self.fixed_start))


def sample_realization(mean_grid: RewardGrid, sigma2: float, rng: np.random.Generator,
                       clamp: bool = False) -> RewardGrid:
    """Draw one noisy grid, tile-wise ``N(mean, sigma2)``.

    ``clamp`` truncates negative draws to 0 so the result is a valid
    ``fsm_sum`` cost grid. A full grid of normals is always drawn, so the
    generator advances by the same amount whatever ``sigma2`` is.
    """
    if not sigma2 >= 0:
        raise DomainError(f"sigma2 must be >= 0, got {sigma2}")
    noise = rng.standard_normal(mean_grid.shape)
    if sigma2 == 0:
        values = mean_grid.values.copy()
    else:
        values = mean_grid.values + np.sqrt(sigma2) * noise
    if clamp:
        values = np.maximum(values, 0.0)
    return RewardGrid(values)


def realization_path(mean_grid: RewardGrid, cfg: McConfig, rng: np.random.Generator):
    """Sample one realization and return its optimal path.

    The per-realization goal is the minimum of the raw draw; clamping for
    ``fsm_sum`` applies to move costs only, so it cannot tie many tiles at
    zero and bias the goal towards the top-left corner.
    """
    sample = sample_realization(mean_grid, cfg.sigma2, rng)
    if cfg.goal_mode is GoalMode.FIXED:
        goal = select_goal(mean_grid)
    else:
        goal = select_goal(sample)
    if cfg.cost is CostModel.FSM_SUM and sample.value_min < 0:
        sample = RewardGrid(np.maximum(sample.values, 0.0))
    return ucs(sample, cfg.fixed_start, goal, cfg.cost)


def path_counts(mean_grid: RewardGrid, cfg: McConfig) -> np.ndarray:
    """Integer count of realizations whose optimal path visits each tile."""
    _check_pos(cfg.fixed_start, mean_grid, "start")
    counts = np.zeros(mean_grid.shape, dtype=np.int64)
    for rng in spawn_rngs(cfg.seed, cfg.iterations):
        on_path = np.zeros(mean_grid.shape, dtype=bool)
        for r, c in realization_path(mean_grid, cfg, rng).positions:
            on_path[r, c] = True
        counts += on_path
    return counts


def path_probability_matrix(mean_grid: RewardGrid, cfg: McConfig) -> np.ndarray:
    """Fraction of Monte Carlo realizations whose optimal path crosses each tile."""
    return path_counts(mean_grid, cfg) / cfg.iterations


def path_indicator(grid: RewardGrid, positions) -> np.ndarray:
    out = np.zeros(grid.shape)
    for r, c in positions:
        out[r, c] = 1.0
    return out


def sharpness(probs: np.ndarray, threshold: float = 0.05) -> int:
    """Number of tiles whose path probability exceeds ``threshold``."""
    return int(np.count_nonzero(np.asarray(probs) > threshold))
