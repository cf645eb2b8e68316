"""Tests for the 39-entry feature vector.

The core oracle recomputes every entry independently (plain ``math`` calls,
no reuse of the module under test) over a thousand randomly evolved states.
"""

import math
import random

import numpy as np
import pytest

from fortdefense.env import (
    Action,
    ActionKind,
    AgentKind,
    AgentState,
    Direction,
    GridConfig,
    WorldState,
    default_fort_cells,
    legal_actions,
    reset,
    step,
    terminal,
)
from fortdefense.features import (
    CATEGORICAL_FEATURES,
    FEATURE_NAMES,
    N_FEATURES,
    extract,
    pad_sentinel_block,
    read_dataset,
    write_dataset,
)

DIR_INDEX = {Direction.N: 0, Direction.E: 1, Direction.S: 2, Direction.W: 3}


def make_state(config, agents):
    ids = [a.id for a in agents]
    return WorldState(
        config=config,
        agents=agents,
        step_count=0,
        shots_fired={i: 0 for i in ids},
        shots_hit={i: 0 for i in ids},
    )


def random_states(n_states, seed=0, steps_per_state=3):
    """Yield (state, modeled_id, prev_action) via random legal rollouts."""
    rng = random.Random(seed)
    produced = 0
    episode_seed = 0
    while produced < n_states:
        config = GridConfig()
        state = reset(config, seed=episode_seed)
        episode_seed += 1
        prev = {a.id: None for a in state.agents}
        while terminal(state) is None and produced < n_states:
            for _ in range(steps_per_state):
                if terminal(state) is not None:
                    break
                acts = {
                    a.id: rng.choice(legal_actions(state, a.id))
                    for a in state.agents
                    if a.alive
                }
                state, _ = step(state, acts)
                for i, act in acts.items():
                    prev[i] = act
            alive = [a for a in state.agents]
            modeled = rng.choice(alive).id
            yield state, modeled, prev[modeled]
            produced += 1


def oracle_vector(state, modeled, prev_action):
    """Recompute all 39 entries from first principles."""
    cfg = state.config
    cx, cy = (cfg.width - 1) / 2, (cfg.height - 1) / 2
    diag = math.hypot(cfg.width - 1, cfg.height - 1)

    def block(agent):
        dx, dy = agent.x - cx, agent.y - cy
        d_center = math.hypot(dx, dy)
        bearing = 0.0 if d_center == 0 else math.atan2(dx, dy)
        d_fort = min(math.hypot(agent.x - fx, agent.y - fy) for fx, fy in cfg.fort_cells)
        return [
            float(agent.x),
            float(agent.y),
            d_center,
            bearing,
            float(DIR_INDEX[agent.direction]),
            d_fort,
        ]

    me = state.get(modeled)
    mates = sorted(
        (a for a in state.agents if a.id != modeled and a.kind.is_guard == me.kind.is_guard),
        key=lambda a: a.id,
    )
    opps = sorted(
        (a for a in state.agents if a.kind.is_guard != me.kind.is_guard),
        key=lambda a: a.id,
    )
    ordered = ([me] + mates + opps)[:6]
    vec = []
    for a in ordered:
        vec.extend(block(a))
    while len(vec) < 36:
        vec.extend([-1.0, -1.0, diag, 0.0, 0.0, diag])
    alive_attackers = [a for a in state.agents if a.kind is AgentKind.ATTACKER and a.alive]
    if alive_attackers:
        nearest = min(
            min(math.hypot(a.x - fx, a.y - fy) for fx, fy in cfg.fort_cells)
            for a in alive_attackers
        )
    else:
        nearest = diag
    down = sum(1 for a in state.agents if a.kind is AgentKind.ATTACKER and not a.alive)
    prev = ActionKind.NOOP if prev_action is None else prev_action.kind
    vec.extend([nearest, float(down), float(int(prev))])
    return vec


def test_layout_constants():
    assert N_FEATURES == 39
    assert len(FEATURE_NAMES) == 39
    assert len(set(FEATURE_NAMES)) == 39
    # orientation slot of each of the six agent blocks, plus previous action
    assert CATEGORICAL_FEATURES == frozenset({4, 10, 16, 22, 28, 34, 38})


def test_independent_recomputation_over_1000_states():
    checked = 0
    for state, modeled, prev in random_states(1000, seed=7):
        got = extract(state, modeled, prev)
        want = oracle_vector(state, modeled, prev)
        assert got.shape == (39,)
        np.testing.assert_allclose(got, np.array(want), rtol=0, atol=1e-12)
        checked += 1
    assert checked == 1000


def test_center_singularity_distance_zero_angle_zero():
    config = GridConfig(
        width=5,
        height=5,
        fort_cells=default_fort_cells(5, 5),
        n_guards=1,
        n_attackers=1,
    )
    agents = [
        AgentState(0, AgentKind.AD_HOC_GUARD, 2, 2, Direction.N),
        AgentState(1, AgentKind.ATTACKER, 0, 0, Direction.N),
    ]
    vec = extract(make_state(config, agents), 0, None)
    assert vec[2] == 0.0  # distance to center
    assert vec[3] == 0.0  # polar angle defined as 0 at the center


def test_attackers_not_alive_count():
    state = reset(GridConfig(), seed=3)
    assert extract(state, 0, None)[37] == 0.0
    state.attackers()[0].alive = False
    state.attackers()[2].alive = False
    vec = extract(state, 0, None)
    assert vec[37] == 2.0
    assert 0 <= vec[37] <= state.config.n_attackers


def test_dead_agent_contributes_frozen_pose():
    state = reset(GridConfig(), seed=4)
    victim = state.attackers()[1]
    vx, vy = victim.x, victim.y
    victim.alive = False
    vec = extract(state, 0, None)
    # guard 0's opponents occupy blocks 3..5 ordered by id; victim is opp2
    base = 4 * 6
    assert vec[base] == float(vx)
    assert vec[base + 1] == float(vy)


def test_nearest_attacker_fort_distance_uses_alive_only():
    state = reset(GridConfig(), seed=5)
    cfg = state.config
    atts = state.attackers()
    full = extract(state, 0, None)[36]
    dists = sorted(
        min(math.hypot(a.x - fx, a.y - fy) for fx, fy in cfg.fort_cells) for a in atts
    )
    assert full == pytest.approx(dists[0])
    # kill the closest attacker: the figure must move to the next-closest
    closest = min(
        atts, key=lambda a: min(math.hypot(a.x - fx, a.y - fy) for fx, fy in cfg.fort_cells)
    )
    closest.alive = False
    assert extract(state, 0, None)[36] == pytest.approx(dists[1])
    for a in atts:
        a.alive = False
    sentinel = math.hypot(cfg.width - 1, cfg.height - 1)
    assert extract(state, 0, None)[36] == pytest.approx(sentinel)


def test_padding_blocks_use_documented_sentinel():
    config = GridConfig(
        width=7,
        height=7,
        fort_cells=default_fort_cells(7, 7),
        n_guards=1,
        n_attackers=1,
    )
    state = reset(config, seed=0)
    vec = extract(state, 0, None)
    diag = math.hypot(6, 6)
    assert list(pad_sentinel_block(config)) == [-1.0, -1.0, diag, 0.0, 0.0, diag]
    # blocks: self, opponent, then four sentinel pads
    for b in range(2, 6):
        base = b * 6
        assert list(vec[base : base + 6]) == [-1.0, -1.0, diag, 0.0, 0.0, diag]


def test_mirror_negates_bearing_and_swaps_east_west():
    for state, modeled, prev in random_states(60, seed=13):
        cfg = state.config
        m_fort = frozenset((cfg.width - 1 - x, y) for x, y in cfg.fort_cells)
        m_cfg = GridConfig(
            width=cfg.width,
            height=cfg.height,
            fort_cells=m_fort,
            n_guards=cfg.n_guards,
            n_attackers=cfg.n_attackers,
            shoot_range=cfg.shoot_range,
            shoot_arc_deg=cfg.shoot_arc_deg,
            max_steps=cfg.max_steps,
        )
        swap = {
            Direction.N: Direction.N,
            Direction.S: Direction.S,
            Direction.E: Direction.W,
            Direction.W: Direction.E,
        }
        m_agents = [
            AgentState(a.id, a.kind, cfg.width - 1 - a.x, a.y, swap[a.direction], a.alive)
            for a in state.agents
        ]
        m_state = make_state(m_cfg, m_agents)
        kind_swap = {ActionKind.MOVE_E: ActionKind.MOVE_W, ActionKind.MOVE_W: ActionKind.MOVE_E}
        if prev is None:
            m_prev = None
        elif prev.kind in kind_swap:
            m_prev = Action(kind_swap[prev.kind])
        else:
            m_prev = prev
        v = extract(state, modeled, prev)
        mv = extract(m_state, modeled, m_prev)
        orient_swap = {0.0: 0.0, 1.0: 3.0, 2.0: 2.0, 3.0: 1.0}
        for b in range(6):
            base = b * 6
            assert mv[base] == pytest.approx(cfg.width - 1 - v[base])
            assert mv[base + 1] == v[base + 1]
            assert mv[base + 2] == pytest.approx(v[base + 2])
            # angles negate modulo 2*pi (pi maps to itself)
            s = v[base + 3] + mv[base + 3]
            assert min(abs(s), abs(s - 2 * math.pi), abs(s + 2 * math.pi)) < 1e-9
            assert mv[base + 4] == orient_swap[v[base + 4]]
            assert mv[base + 5] == pytest.approx(v[base + 5])
        assert mv[36] == pytest.approx(v[36])
        assert mv[37] == v[37]


def test_extract_is_pure():
    state = reset(GridConfig(), seed=9)
    a = extract(state, 2, Action(ActionKind.ROTATE_CW))
    b = extract(state, 2, Action(ActionKind.ROTATE_CW))
    assert np.array_equal(a, b)


def test_prev_action_encoding():
    state = reset(GridConfig(), seed=1)
    assert extract(state, 0, None)[38] == float(int(ActionKind.NOOP))
    for kind in ActionKind:
        act = Action.shoot(3) if kind is ActionKind.SHOOT else Action(kind)
        assert extract(state, 0, act)[38] == float(int(kind))


def test_unknown_agent_raises():
    state = reset(GridConfig(), seed=2)
    with pytest.raises(KeyError):
        extract(state, 99, None)


def test_csv_round_trip(tmp_path):
    rows = []
    for state, modeled, prev in random_states(20, seed=21):
        vec = extract(state, modeled, prev)
        label = int(vec[38]) % 8
        rows.append((vec, label))
    path = tmp_path / "data.csv"
    write_dataset(path, rows)
    X, y = read_dataset(path)
    assert X.shape == (20, 39)
    assert y.shape == (20,)
    for i, (vec, label) in enumerate(rows):
        np.testing.assert_allclose(X[i], vec, rtol=0, atol=0)
        assert y[i] == label
    header = path.read_text().splitlines()[0]
    assert header.split(",") == list(FEATURE_NAMES) + ["action"]
