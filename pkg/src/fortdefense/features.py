"""The 39-entry attribute vector that behavior models consume.

Layout (fixed, position-indexed by the model cues):

* Six agent blocks of six entries each.  Block order: the modeled agent
  first, then its teammates by ascending id, then its opponents by
  ascending id; rosters larger than six agents truncate in that order,
  smaller rosters pad with sentinel blocks.
* Block fields: ``x``, ``y``, Euclidean distance to the grid center,
  bearing from north around the grid center (radians in (-pi, pi],
  0 at the exact center), orientation index (N=0, E=1, S=2, W=3), and
  Euclidean distance to the nearest fort cell.
* Three globals: distance of the nearest *alive* attacker to the fort
  (grid diagonal when none is alive), number of attackers not alive, and
  the modeled agent's previous action kind (noop before the first step).

Bearings are measured clockwise from north (``atan2(dx, dy)``), the same
convention the simulator uses for facing cones; reflecting the world
left-right therefore negates them.  Dead agents keep contributing their
frozen pose; their absence shows up in the not-alive count.

A padding block is ``(-1, -1, diagonal, 0, 0, diagonal)``: impossible
coordinates plus max-distance sentinels.

Datasets are CSV files with the 39 feature columns followed by one
``action`` label column (the modeled agent's action kind at that step).
"""

from __future__ import annotations

import csv
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from fortdefense.env import (
    Action,
    ActionKind,
    AgentKind,
    AgentState,
    DIRECTION_INDEX,
    GridConfig,
    WorldState,
)

#: Entries per agent block and number of blocks.
BLOCK_FIELDS = ("x", "y", "dist_center", "bearing", "orient", "dist_fort")
N_BLOCKS = 6
N_FEATURES = N_BLOCKS * len(BLOCK_FIELDS) + 3

_BLOCK_ROLES = ("self", "mate1", "mate2", "opp1", "opp2", "opp3")
FEATURE_NAMES = tuple(
    f"{role}_{field}" for role in _BLOCK_ROLES for field in BLOCK_FIELDS
) + ("nearest_attacker_fort_dist", "attackers_down", "prev_action")

#: Indices holding categorical values (orientation per block, previous
#: action); models split these by equality rather than by threshold.
CATEGORICAL_FEATURES = frozenset(
    b * len(BLOCK_FIELDS) + BLOCK_FIELDS.index("orient") for b in range(N_BLOCKS)
) | {N_FEATURES - 1}


def grid_center(config: GridConfig) -> tuple[float, float]:
    """Geometric center of the cell grid (a half-cell point on even sizes)."""
    return ((config.width - 1) / 2, (config.height - 1) / 2)


def grid_diagonal(config: GridConfig) -> float:
    """Longest possible distance between two cells; the padding sentinel."""
    return math.hypot(config.width - 1, config.height - 1)


def _fort_dist(config: GridConfig, x: float, y: float) -> float:
    return min(math.hypot(x - fx, y - fy) for fx, fy in config.fort_cells)


def _agent_block(config: GridConfig, agent: AgentState) -> list[float]:
    cx, cy = grid_center(config)
    dx, dy = agent.x - cx, agent.y - cy
    dist_center = math.hypot(dx, dy)
    bearing = 0.0 if dist_center == 0 else math.atan2(dx, dy)
    return [
        float(agent.x),
        float(agent.y),
        dist_center,
        bearing,
        float(DIRECTION_INDEX[agent.direction]),
        _fort_dist(config, agent.x, agent.y),
    ]


def pad_sentinel_block(config: GridConfig) -> list[float]:
    diag = grid_diagonal(config)
    return [-1.0, -1.0, diag, 0.0, 0.0, diag]


def extract(
    state: WorldState, modeled: int, prev_action: Optional[Action] = None
) -> np.ndarray:
    """The feature vector for one agent in one state.

    Pure: identical inputs give identical vectors.  Raises ``KeyError``
    when no agent has id ``modeled``.
    """
    config = state.config
    me = state.get(modeled)
    mates = sorted(
        (
            a
            for a in state.agents
            if a.id != modeled and a.kind.is_guard == me.kind.is_guard
        ),
        key=lambda a: a.id,
    )
    opponents = sorted(
        (a for a in state.agents if a.kind.is_guard != me.kind.is_guard),
        key=lambda a: a.id,
    )
    blocks = ([me] + mates + opponents)[:N_BLOCKS]
    values: list[float] = []
    for agent in blocks:
        values.extend(_agent_block(config, agent))
    pad = pad_sentinel_block(config)
    while len(values) < N_BLOCKS * len(BLOCK_FIELDS):
        values.extend(pad)

    alive_attackers = [
        a for a in state.agents if a.kind is AgentKind.ATTACKER and a.alive
    ]
    if alive_attackers:
        nearest = min(_fort_dist(config, a.x, a.y) for a in alive_attackers)
    else:
        nearest = grid_diagonal(config)
    down = sum(1 for a in state.agents if a.kind is AgentKind.ATTACKER and not a.alive)
    prev = ActionKind.NOOP if prev_action is None else prev_action.kind
    values.extend([nearest, float(down), float(int(prev))])
    return np.array(values, dtype=float)


def write_dataset(path, rows: Iterable[tuple[Sequence[float], int]]) -> int:
    """Write (feature vector, action label) rows as CSV; returns row count."""
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURE_NAMES) + ["action"])
        for vec, label in rows:
            if len(vec) != N_FEATURES:
                raise ValueError(f"feature vector has {len(vec)} entries, not {N_FEATURES}")
            writer.writerow([repr(float(v)) for v in vec] + [int(label)])
            count += 1
    return count


def read_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a dataset written by :func:`write_dataset` -> (X, y)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != list(FEATURE_NAMES) + ["action"]:
            raise ValueError(f"unrecognized dataset header in {path}")
        X: list[list[float]] = []
        y: list[int] = []
        for row in reader:
            X.append([float(v) for v in row[:N_FEATURES]])
            y.append(int(row[N_FEATURES]))
    return np.array(X, dtype=float).reshape(len(y), N_FEATURES), np.array(y, dtype=int)
