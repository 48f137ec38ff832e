"""Cloud-aware tasking as a Markov decision process.

State is ``(row, col, cloud)`` where ``cloud`` is the occlusion bit of the
tile the agent occupies. The bit evolves as a two-state Markov chain;
positions move deterministically in one of four directions (a move off
the grid leaves the position unchanged). Entering a clear tile earns its
scaled food-insecurity value, entering a cloudy tile earns nothing.

Terminal semantics (``terminal_mode``):

``episodic``
    The most food-insecure tile ends the episode. Its value is fixed to
    its own reward and entering it earns that reward once.
``absorbing``
    The terminal tile traps the agent, which keeps collecting the tile's
    (cloud-masked) reward with discounting. Useful when the grid values
    are large enough that wandering would otherwise out-earn arrival.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._rng import make_rng
from .errors import ContractError, DomainError, InputError
from .grid import RewardGrid, scale_rewards
from .search import MOVES, GridPos, _check_pos

ACTIONS = ("up", "down", "left", "right")
NO_ACTION = -1
TERMINAL_MODES = ("episodic", "absorbing")


@dataclass(frozen=True)
class CloudModel:
    """Initial cloud probability plus the two 'becomes cloudy' transition probabilities.

    Defaults are the symmetric setting p(C=1) = 0.2, p(C'=1|C=0) = p(C'=1|C=1) = 0.5.
    """

    p_init: float = 0.2
    p_1_given_0: float = 0.5
    p_1_given_1: float = 0.5

    def __post_init__(self):
        for name in ("p_init", "p_1_given_0", "p_1_given_1"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {p}")

    def p_cloudy_next(self, cloud: int) -> float:
        return self.p_1_given_1 if cloud else self.p_1_given_0

    def transition_matrix(self) -> np.ndarray:
        """``P[c, c']`` = probability of cloud bit ``c'`` after ``c``."""
        return np.array([[1.0 - self.p_1_given_0, self.p_1_given_0],
                         [1.0 - self.p_1_given_1, self.p_1_given_1]])


def cloud_stationary(clouds: CloudModel) -> float:
    """Long-run probability that a tile is cloudy."""
    denom = clouds.p_1_given_0 + 1.0 - clouds.p_1_given_1
    if denom <= 0.0:
        raise DomainError("degenerate cloud chain: p_1_given_0 = 0 and p_1_given_1 = 1 "
                          "have no unique stationary distribution")
    return clouds.p_1_given_0 / denom


class MdpState(NamedTuple):
    pos: GridPos
    cloud: int


def _argmax_pos(grid: RewardGrid) -> GridPos:
    return GridPos(*divmod(int(np.argmax(grid.values)), grid.cols))


@dataclass(frozen=True)
class TaskingMdp:
    grid: RewardGrid
    clouds: CloudModel = field(default_factory=CloudModel)
    gamma: float = 0.95
    terminal: GridPos | None = None
    terminal_mode: str = "episodic"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.grid.value_min < 0.0 or self.grid.value_max > 1.0:
            raise DomainError("MDP reward grid must be scaled into [0, 1]")
        if self.terminal_mode not in TERMINAL_MODES:
            raise DomainError(f"terminal_mode must be one of {TERMINAL_MODES}")
        term = _argmax_pos(self.grid) if self.terminal is None else _check_pos(
            self.terminal, self.grid, "terminal")
        object.__setattr__(self, "terminal", GridPos(*term))

    @classmethod
    def from_fsm(cls, fsm_grid: RewardGrid, clouds: CloudModel | None = None, gamma: float = 0.95,
                 terminal_mode: str = "episodic") -> "TaskingMdp":
        """Build from raw FSM values, where low values mean food insecurity."""
        return cls(scale_rewards(fsm_grid, invert=True), clouds or CloudModel(), gamma,
                   terminal_mode=terminal_mode)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def is_terminal(self, pos) -> bool:
        return tuple(pos) == tuple(self.terminal)

    def states(self):
        for r in range(self.grid.rows):
            for c in range(self.grid.cols):
                for cloud in (0, 1):
                    yield MdpState(GridPos(r, c), cloud)


def move(mdp: TaskingMdp, pos, action: int) -> GridPos:
    dr, dc = MOVES[action]
    r, c = pos[0] + dr, pos[1] + dc
    if 0 <= r < mdp.grid.rows and 0 <= c < mdp.grid.cols:
        return GridPos(r, c)
    return GridPos(*pos)


def reward(mdp: TaskingMdp, state: MdpState) -> float:
    """Scaled tile value when clear, zero under cloud."""
    if state.cloud:
        return 0.0
    return mdp.grid[state.pos]


def transition(mdp: TaskingMdp, state: MdpState, action) -> list[tuple[MdpState, float]]:
    """Successor distribution; zero-probability outcomes are omitted."""
    if isinstance(action, str):
        action = ACTIONS.index(action)
    if mdp.terminal_mode == "absorbing" and mdp.is_terminal(state.pos):
        nxt = GridPos(*state.pos)
    else:
        nxt = move(mdp, state.pos, action)
    p1 = mdp.clouds.p_cloudy_next(state.cloud)
    out = []
    if p1 > 0.0:
        out.append((MdpState(nxt, 1), p1))
    if p1 < 1.0:
        out.append((MdpState(nxt, 0), 1.0 - p1))
    return out


@dataclass
class ValueIterationResult:
    values: np.ndarray  # (rows, cols, 2), last axis is the cloud bit
    policy: np.ndarray  # same shape, action index or NO_ACTION at the terminal
    iterations: int
    converged: bool
    residual: float
    residuals: list

    def value(self, state: MdpState) -> float:
        return float(self.values[state.pos[0], state.pos[1], state.cloud])

    def action(self, state: MdpState) -> int:
        return int(self.policy[state.pos[0], state.pos[1], state.cloud])


def _successor_index(mdp: TaskingMdp):
    rows, cols = mdp.shape
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    nr, nc = [], []
    for dr, dc in MOVES:
        r2, c2 = rr + dr, cc + dc
        off = (r2 < 0) | (r2 >= rows) | (c2 < 0) | (c2 >= cols)
        r2 = np.where(off, rr, r2)
        c2 = np.where(off, cc, c2)
        if mdp.terminal_mode == "absorbing":
            r2[mdp.terminal] = mdp.terminal[0]
            c2[mdp.terminal] = mdp.terminal[1]
        nr.append(r2)
        nc.append(c2)
    return nr, nc


def reward_table(mdp: TaskingMdp) -> np.ndarray:
    table = np.zeros(mdp.shape + (2,))
    table[:, :, 0] = mdp.grid.values
    return table


def bellman_sweep(mdp: TaskingMdp, values: np.ndarray, _cache=None):
    """One synchronous (Jacobi) Bellman backup; returns ``(new_values, q)``.

    ``q`` has shape ``(4, rows, cols, 2)`` in action order up, down, left, right.
    """
    nr, nc, rtab, ptrans = _cache or _sweep_cache(mdp)
    cont = rtab + mdp.gamma * values
    if mdp.terminal_mode == "episodic":
        # entering the terminal earns its value and stops
        cont[mdp.terminal] = values[mdp.terminal]
    q = np.stack([cont[nr[a], nc[a]] @ ptrans.T for a in range(len(ACTIONS))])
    new = q.max(axis=0)
    if mdp.terminal_mode == "episodic":
        new[mdp.terminal] = rtab[mdp.terminal]
    return new, q


def _sweep_cache(mdp: TaskingMdp):
    nr, nc = _successor_index(mdp)
    return nr, nc, reward_table(mdp), mdp.clouds.transition_matrix()


def initial_values(mdp: TaskingMdp) -> np.ndarray:
    values = np.zeros(mdp.shape + (2,))
    if mdp.terminal_mode == "episodic":
        values[mdp.terminal] = reward_table(mdp)[mdp.terminal]
    return values


def greedy_policy(mdp: TaskingMdp, q: np.ndarray) -> np.ndarray:
    """Argmax over actions, ties resolved by the order up, down, left, right."""
    policy = np.argmax(q, axis=0).astype(np.int64)
    policy[mdp.terminal] = NO_ACTION
    return policy


def value_iteration(mdp: TaskingMdp, tol: float = 1e-6, max_iters: int = 10_000) -> ValueIterationResult:
    """Synchronous value iteration until the sup-norm change drops below ``tol``.

    The returned policy is greedy with respect to the returned values.
    Hitting ``max_iters`` first yields ``converged=False`` with the last
    residual.
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    if max_iters < 1:
        raise DomainError(f"max_iters must be >= 1, got {max_iters}")
    cache = _sweep_cache(mdp)
    values = initial_values(mdp)
    residuals = []
    converged = False
    for _ in range(max_iters):
        new, _q = bellman_sweep(mdp, values, cache)
        residuals.append(float(np.max(np.abs(new - values))))
        values = new
        if residuals[-1] < tol:
            converged = True
            break
    _, q = bellman_sweep(mdp, values, cache)
    return ValueIterationResult(values, greedy_policy(mdp, q), len(residuals), converged,
                                residuals[-1], residuals)


@dataclass(frozen=True)
class CloudField:
    """Realized per-tile cloud masks; ``history[t]`` is the mask at step ``t``."""

    history: np.ndarray

    def __post_init__(self):
        hist = np.asarray(self.history, dtype=bool)
        if hist.ndim == 2:
            hist = hist[None]
        if hist.ndim != 3 or 0 in hist.shape:
            raise DomainError(f"cloud history must have shape (T, rows, cols), got {hist.shape}")
        object.__setattr__(self, "history", hist)

    @property
    def mask(self) -> np.ndarray:
        return self.history[0]

    @property
    def rows(self) -> int:
        return self.history.shape[1]

    @property
    def cols(self) -> int:
        return self.history.shape[2]

    def __len__(self):
        return self.history.shape[0]

    def cloud_at(self, t: int, pos) -> int:
        return int(self.history[t, pos[0], pos[1]])


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(rng)


def realize_clouds(clouds: CloudModel, rows: int, cols: int, timesteps: int, rng,
                   p_init=None) -> CloudField:
    """Sample independent per-tile cloud chains for ``timesteps`` masks.

    ``p_init`` optionally overrides the initial cloud probability per tile
    (an array broadcastable to ``(rows, cols)``), e.g. to force a cloud
    bank into a region.
    """
    if rows < 1 or cols < 1 or timesteps < 1:
        raise DomainError("rows, cols and timesteps must be >= 1")
    rng = _as_rng(rng)
    p0 = np.broadcast_to(clouds.p_init if p_init is None else np.asarray(p_init, float), (rows, cols))
    if np.any((p0 < 0) | (p0 > 1)):
        raise DomainError("p_init values must lie in [0, 1]")
    hist = np.empty((timesteps, rows, cols), dtype=bool)
    hist[0] = rng.random((rows, cols)) < p0
    for t in range(1, timesteps):
        p = np.where(hist[t - 1], clouds.p_1_given_1, clouds.p_1_given_0)
        hist[t] = rng.random((rows, cols)) < p
    return CloudField(hist)


@dataclass
class Trajectory:
    states: list
    reward: float
    discounted_reward: float
    reached_terminal: bool

    @property
    def positions(self) -> list:
        return [s.pos for s in self.states]


def simulate_trajectory(mdp: TaskingMdp, policy: np.ndarray, field: CloudField, start,
                        max_steps: int) -> Trajectory:
    """Roll out ``policy`` against a realized cloud field.

    At step ``t`` the agent observes ``field.history[t]`` at its own tile,
    acts, and earns the reward of its new tile under ``field.history[t+1]``.
    The trajectory holds at most ``max_steps`` states and stops early on
    reaching the terminal tile.
    """
    start = _check_pos(start, mdp.grid, "start")
    policy = np.asarray(policy)
    if policy.shape != mdp.shape + (2,):
        raise ContractError(f"policy shape {policy.shape} does not match MDP {mdp.shape + (2,)}")
    if (field.rows, field.cols) != mdp.shape:
        raise ContractError("cloud field dimensions do not match the grid")
    if max_steps < 1 or len(field) < max_steps:
        raise ContractError(f"cloud history has {len(field)} masks, need >= max_steps={max_steps}")

    pos = start
    states = [MdpState(pos, field.cloud_at(0, pos))]
    total = disc = 0.0
    t = 0
    while not mdp.is_terminal(pos) and len(states) < max_steps:
        action = int(policy[pos[0], pos[1], states[-1].cloud])
        if not 0 <= action < len(ACTIONS):
            raise ContractError(f"policy has no action for state {states[-1]}")
        pos = move(mdp, pos, action)
        t += 1
        state = MdpState(pos, field.cloud_at(t, pos))
        r = reward(mdp, state)
        total += r
        disc += mdp.gamma ** (t - 1) * r
        states.append(state)
    return Trajectory(states, total, disc, mdp.is_terminal(pos))


def save_policy(policy: np.ndarray, path) -> None:
    """Write ``row col cloud action`` lines; the terminal tile's action is ``none``."""
    lines = []
    rows, cols, _ = policy.shape
    for r in range(rows):
        for c in range(cols):
            for cloud in (0, 1):
                a = int(policy[r, c, cloud])
                lines.append(f"{r} {c} {cloud} {ACTIONS[a] if a >= 0 else 'none'}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_policy(path) -> np.ndarray:
    path = Path(path)
    entries = []
    for k, ln in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        parts = ln.split()
        if not parts:
            continue
        if len(parts) != 4 or parts[3] not in ACTIONS + ("none",):
            raise InputError(f"{path}: line {k} must be 'row col cloud action'")
        try:
            r, c, cloud = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise InputError(f"{path}: line {k} has a non-integer index") from None
        if r < 0 or c < 0 or cloud not in (0, 1):
            raise InputError(f"{path}: line {k} has an invalid state")
        entries.append((r, c, cloud, NO_ACTION if parts[3] == "none" else ACTIONS.index(parts[3])))
    if not entries:
        raise InputError(f"{path}: empty policy file")
    rows = max(e[0] for e in entries) + 1
    cols = max(e[1] for e in entries) + 1
    policy = np.full((rows, cols, 2), NO_ACTION, dtype=np.int64)
    for r, c, cloud, a in entries:
        policy[r, c, cloud] = a
    return policy


def save_cloud_field(field: CloudField, path) -> None:
    """One 0/1 mask grid per timestep, blocks separated by a blank line."""
    blocks = ["\n".join(" ".join("1" if v else "0" for v in row) for row in mask)
              for mask in field.history]
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def load_cloud_field(path) -> CloudField:
    path = Path(path)
    blocks = [b for b in path.read_text(encoding="utf-8").split("\n\n") if b.strip()]
    try:
        masks = [[[int(t) for t in ln.split()] for ln in b.strip().splitlines()] for b in blocks]
        arr = np.array(masks)
    except ValueError:
        raise InputError(f"{path}: cloud masks must be equally sized 0/1 grids") from None
    if arr.ndim != 3 or not np.isin(arr, (0, 1)).all():
        raise InputError(f"{path}: cloud masks must be equally sized 0/1 grids")
    return CloudField(arr.astype(bool))
