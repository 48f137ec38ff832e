"""Deterministic path search on a reward grid with Uniform Cost Search."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path as FilePath
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InputError, PreconditionError
from .grid import RewardGrid


class GridPos(NamedTuple):
    row: int
    col: int


# fixed neighbour / action order: up, down, left, right
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


class CostModel(str, Enum):
    """Per-move cost: ``unit`` counts moves, ``fsm_sum`` pays the entered tile's value."""

    UNIT = "unit"
    FSM_SUM = "fsm_sum"

    @classmethod
    def parse(cls, name) -> "CostModel":
        if isinstance(name, cls):
            return name
        aliases = {"unit": cls.UNIT, "fsm": cls.FSM_SUM, "fsm_sum": cls.FSM_SUM}
        try:
            return aliases[str(name).lower()]
        except KeyError:
            raise DomainError(f"unknown cost model {name!r}") from None


@dataclass(frozen=True)
class Path:
    positions: list
    total_cost: float

    def __len__(self):
        return len(self.positions)


def in_bounds(pos, grid: RewardGrid) -> bool:
    return 0 <= pos[0] < grid.rows and 0 <= pos[1] < grid.cols


def _check_pos(pos, grid: RewardGrid, what="position") -> GridPos:
    pos = GridPos(int(pos[0]), int(pos[1]))
    if not in_bounds(pos, grid):
        raise DomainError(f"{what} {tuple(pos)} outside {grid.rows}x{grid.cols} grid")
    return pos


def neighbors(pos, grid: RewardGrid) -> list[GridPos]:
    """In-bounds 4-connected neighbours of ``pos`` in the order up, down, left, right."""
    r, c = _check_pos(pos, grid)
    out = []
    for dr, dc in MOVES:
        nxt = GridPos(r + dr, c + dc)
        if in_bounds(nxt, grid):
            out.append(nxt)
    return out


def select_goal(grid: RewardGrid) -> GridPos:
    """Position of the lowest value; ties go to the first in row-major order."""
    flat = int(np.argmin(grid.values))
    return GridPos(*divmod(flat, grid.cols))


def move_cost(grid: RewardGrid, entered, cost: CostModel) -> float:
    if cost is CostModel.UNIT:
        return 1.0
    return float(grid.values[entered[0], entered[1]])


def path_cost(grid: RewardGrid, positions, cost=CostModel.FSM_SUM) -> float:
    """Cost of a position sequence, summed left to right exactly as UCS does."""
    cost = CostModel.parse(cost)
    total = 0.0
    for p in positions[1:]:
        total += move_cost(grid, p, cost)
    return total


def ucs(grid: RewardGrid, start, goal, cost=CostModel.FSM_SUM) -> Path:
    """Minimum-cost 4-connected path from ``start`` to ``goal``.

    The frontier is ordered by (accumulated cost, row, col, insertion
    order), which makes the returned path deterministic when several
    optimal paths exist.
    """
    cost = CostModel.parse(cost)
    start = _check_pos(start, grid, "start")
    goal = _check_pos(goal, grid, "goal")
    if cost is CostModel.FSM_SUM and grid.value_min < 0:
        raise PreconditionError("fsm_sum cost requires non-negative tile values "
                                f"(minimum is {grid.value_min})")

    values = grid.values
    rows, cols = grid.shape
    counter = itertools.count()
    best = {start: 0.0}
    parent = {start: None}
    done = set()
    frontier = [(0.0, start.row, start.col, next(counter))]

    while frontier:
        g, r, c, _ = heapq.heappop(frontier)
        node = GridPos(r, c)
        if node in done:
            continue
        done.add(node)
        if node == goal:
            break
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols):
                continue
            nxt = GridPos(nr, nc)
            if nxt in done:
                continue
            step = 1.0 if cost is CostModel.UNIT else float(values[nr, nc])
            ng = g + step
            if nxt not in best or ng < best[nxt]:
                best[nxt] = ng
                parent[nxt] = node
                heapq.heappush(frontier, (ng, nr, nc, next(counter)))

    positions = [goal]
    while parent[positions[-1]] is not None:
        positions.append(parent[positions[-1]])
    positions.reverse()
    return Path(positions, best[goal])


def check_path(path: Path, grid: RewardGrid, cost=CostModel.FSM_SUM, tol: float = 1e-9) -> None:
    """Raise ``AssertionError`` if ``path`` breaks adjacency, bounds or cost consistency."""
    assert path.positions, "empty path"
    for p in path.positions:
        assert in_bounds(p, grid), f"{p} out of bounds"
    for a, b in zip(path.positions, path.positions[1:]):
        assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1, f"{a} -> {b} is not a 4-connected move"
    expected = path_cost(grid, path.positions, cost)
    assert math.isclose(path.total_cost, expected, rel_tol=0, abs_tol=tol), \
        f"stored cost {path.total_cost} != recomputed {expected}"


def format_path(path: Path) -> str:
    lines = [f"cost {path.total_cost!r}"]
    lines += [f"{p[0]} {p[1]}" for p in path.positions]
    return "\n".join(lines) + "\n"


def save_path(path: Path, out) -> None:
    FilePath(out).write_text(format_path(path), encoding="utf-8")


def load_path(src) -> Path:
    src = FilePath(src)
    lines = [ln.split() for ln in src.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines or lines[0][0] != "cost" or len(lines[0]) != 2:
        raise InputError(f"{src}: first line must be 'cost <value>'")
    try:
        total = float(lines[0][1])
        positions = [GridPos(int(r), int(c)) for r, c in lines[1:]]
    except ValueError:
        raise InputError(f"{src}: malformed path line") from None
    return Path(positions, total)
