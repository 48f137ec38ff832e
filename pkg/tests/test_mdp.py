import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsmtask.errors import ContractError, DomainError, InputError
from fsmtask.grid import RewardGrid
from fsmtask.mdp import (ACTIONS, NO_ACTION, CloudField, CloudModel, MdpState, TaskingMdp,
                         bellman_sweep, cloud_stationary, greedy_policy, load_cloud_field,
                         load_policy, realize_clouds, reward, save_cloud_field, save_policy,
                         simulate_trajectory, transition, value_iteration)
from fsmtask.search import GridPos

from oracles import greedy_rollout, state_backup

CLEAR = CloudModel(0.0, 0.0, 0.0)


def _random_mdp(seed, rows=5, cols=6, mode="episodic", gamma=0.9):
    rng = np.random.default_rng(seed)
    clouds = CloudModel(*rng.uniform(0, 1, 3))
    return TaskingMdp(RewardGrid(rng.random((rows, cols))), clouds, gamma, terminal_mode=mode)


# --- reward / transition -----------------------------------------------------------

def _mdp_08():
    return TaskingMdp(RewardGrid([[0.8, 1.0], [0.0, 0.3]]))


def test_reward_masked_by_cloud():
    mdp = _mdp_08()
    assert reward(mdp, MdpState(GridPos(0, 0), 1)) == 0.0
    assert reward(mdp, MdpState(GridPos(0, 0), 0)) == 0.8
    assert reward(mdp, MdpState(GridPos(1, 0), 0)) == 0.0
    assert reward(mdp, MdpState(GridPos(1, 0), 1)) == 0.0


def test_transition_default_probability():
    mdp = TaskingMdp(RewardGrid([[0.0, 0.5], [0.2, 1.0]]), CloudModel(0.2, 0.5, 0.5))
    out = transition(mdp, MdpState(GridPos(0, 0), 0), "right")
    assert out == [(MdpState((0, 1), 1), 0.5), (MdpState((0, 1), 0), 0.5)]


def test_transition_degenerate_chain_clears():
    mdp = TaskingMdp(RewardGrid([[0.0, 1.0]]), CloudModel(0.2, 0.5, 0.0))
    out = transition(mdp, MdpState(GridPos(0, 0), 1), "right")
    assert out == [(MdpState((0, 1), 0), 1.0)]


def test_transition_off_grid_keeps_position():
    mdp = TaskingMdp(RewardGrid([[0.0, 1.0]]), CloudModel(0.2, 0.3, 0.6))
    out = dict(transition(mdp, MdpState(GridPos(0, 0), 1), "up"))
    assert out == {MdpState((0, 0), 1): 0.6, MdpState((0, 0), 0): pytest.approx(0.4)}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["episodic", "absorbing"]))
def test_transition_sums_to_one(seed, mode):
    mdp = _random_mdp(seed, 3, 4, mode)
    for s in mdp.states():
        for a in range(len(ACTIONS)):
            assert abs(sum(p for _, p in transition(mdp, s, a)) - 1.0) <= 1e-12


def test_mdp_validation():
    with pytest.raises(DomainError):
        TaskingMdp(RewardGrid([[0.0, 2.0]]))
    with pytest.raises(DomainError):
        TaskingMdp(RewardGrid([[0.0, 1.0]]), gamma=1.0)
    with pytest.raises(DomainError):
        CloudModel(p_init=1.2)


def test_from_fsm_inverts_and_sets_terminal():
    mdp = TaskingMdp.from_fsm(RewardGrid([[0.4, 0.1], [0.3, 0.2]]))
    assert mdp.terminal == (0, 1)
    assert mdp.grid[(0, 1)] == 1.0 and mdp.grid[(0, 0)] == 0.0


# --- value iteration ---------------------------------------------------------------

def test_vi_two_tile_hand_value():
    mdp = TaskingMdp(RewardGrid([[0.0, 1.0]]), CLEAR, gamma=0.9)
    res = value_iteration(mdp)
    assert res.converged
    # step right earns 1 on entering the terminal; stepping left earns 0 then at best 0.9
    assert res.value(MdpState((0, 0), 0)) == 1.0
    assert res.value(MdpState((0, 1), 0)) == 1.0
    assert res.action(MdpState((0, 0), 0)) == ACTIONS.index("right")
    assert res.action(MdpState((0, 1), 0)) == NO_ACTION


def test_vi_absorbing_two_tile():
    mdp = TaskingMdp(RewardGrid([[0.0, 1.0]]), CLEAR, gamma=0.9, terminal_mode="absorbing")
    res = value_iteration(mdp, tol=1e-12)
    # terminal collects 1 forever: 1 / (1 - 0.9); start gets the same after one move
    assert res.value(MdpState((0, 1), 0)) == pytest.approx(10.0, abs=1e-9)
    assert res.value(MdpState((0, 0), 0)) == pytest.approx(10.0, abs=1e-9)


@pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99])
def test_vi_value_bound(gamma):
    mdp = _random_mdp(3, gamma=gamma, mode="absorbing")
    res = value_iteration(mdp, tol=1e-8)
    assert res.values.max() <= 1.0 / (1.0 - gamma) + 1e-9
    assert np.all(np.isfinite(res.values))


@pytest.mark.parametrize("mode", ["episodic", "absorbing"])
@pytest.mark.parametrize("seed", range(4))
def test_vi_satisfies_bellman_via_state_api(seed, mode):
    mdp = _random_mdp(seed, mode=mode)
    tol = 1e-8
    res = value_iteration(mdp, tol=tol)
    assert res.converged
    for s in mdp.states():
        backed, best_a = state_backup(mdp, res.value, s, transition, reward)
        assert abs(backed - res.value(s)) < tol
        if best_a is not None and not (mode == "episodic" and mdp.is_terminal(s.pos)):
            # greedy action must achieve the max (ties allowed)
            q = [sum(p * ((res.value(n) if mode == "episodic" and mdp.is_terminal(n.pos)
                           else reward(mdp, n) + mdp.gamma * res.value(n)))
                     for n, p in transition(mdp, s, a)) for a in range(4)]
            assert q[res.action(s)] >= max(q) - 1e-12


@pytest.mark.parametrize("mode", ["episodic", "absorbing"])
def test_vi_residual_contraction(mode):
    mdp = _random_mdp(11, 8, 8, mode, gamma=0.95)
    res = value_iteration(mdp)
    r = np.array(res.residuals)
    assert np.all(np.diff(r) <= 1e-15)
    k = np.arange(len(r))
    assert np.all(r <= r[0] * mdp.gamma ** k + 1e-15)


def test_vi_policy_stable_under_extra_sweep():
    mdp = _random_mdp(5, 8, 8, gamma=0.95)
    res = value_iteration(mdp)
    _, q = bellman_sweep(mdp, res.values)
    assert np.array_equal(greedy_policy(mdp, q), res.policy)


def test_vi_not_converged_flag():
    res = value_iteration(_random_mdp(2, gamma=0.99, mode="absorbing"), tol=1e-12, max_iters=3)
    assert not res.converged
    assert res.iterations == 3
    assert res.residual == res.residuals[-1] > 1e-12


def test_vi_bad_args():
    with pytest.raises(DomainError):
        value_iteration(_random_mdp(0), tol=0)


def test_vi_repeatable_bit_identical():
    a = value_iteration(_random_mdp(9))
    b = value_iteration(_random_mdp(9))
    assert a.policy.tobytes() == b.policy.tobytes()
    assert a.values.tobytes() == b.values.tobytes()


# --- clouds ------------------------------------------------------------------------

@pytest.mark.parametrize("p10,p11,expected", [(0.5, 0.5, 0.5), (0.2, 0.8, 0.5), (0.0, 0.3, 0.0),
                                              (0.1, 0.1, 0.1)])
def test_cloud_stationary(p10, p11, expected):
    assert cloud_stationary(CloudModel(0.2, p10, p11)) == pytest.approx(expected, abs=1e-15)


def test_cloud_stationary_degenerate():
    with pytest.raises(DomainError):
        cloud_stationary(CloudModel(0.2, 0.0, 1.0))


def test_realize_all_clear():
    field = realize_clouds(CloudModel(0.0, 0.0, 0.7), 4, 5, 50, 1)
    assert not field.history.any()


def test_realize_all_cloudy():
    field = realize_clouds(CloudModel(1.0, 0.3, 1.0), 4, 5, 50, 1)
    assert field.history.all()


def test_realize_symmetric_long_run():
    field = realize_clouds(CloudModel(0.2, 0.5, 0.5), 3, 3, 10_000, 17)
    freq = field.history.mean(axis=0)
    assert np.all(np.abs(freq - 0.5) < 0.02)


def test_realize_initial_probability():
    field = realize_clouds(CloudModel(0.2, 0.5, 0.5), 200, 200, 1, 3)
    assert abs(field.mask.mean() - 0.2) < 0.01


def test_realize_region_override_and_determinism():
    p0 = np.zeros((6, 6))
    p0[2:4] = 1.0
    a = realize_clouds(CloudModel(0.2, 0.5, 0.5), 6, 6, 20, 8, p_init=p0)
    b = realize_clouds(CloudModel(0.2, 0.5, 0.5), 6, 6, 20, 8, p_init=p0)
    assert a.mask[2:4].all() and not a.mask[:2].any() and not a.mask[4:].any()
    assert np.array_equal(a.history, b.history)


# --- simulation --------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["episodic", "absorbing"])
@pytest.mark.parametrize("seed", range(3))
def test_simulate_clear_matches_rollout(seed, mode):
    mdp = _random_mdp(seed, 6, 6, mode, gamma=0.9)
    res = value_iteration(mdp, tol=1e-10)
    field = CloudField(np.zeros((40, 6, 6), dtype=bool))
    traj = simulate_trajectory(mdp, res.policy, field, (5, 0), 40)

    def act(pos):
        return state_backup(mdp, res.value, MdpState(GridPos(*pos), 0), transition, reward)[1]

    positions, total = greedy_rollout(mdp.grid.values, act, (5, 0), mdp.terminal, 40)
    assert traj.positions == positions
    assert traj.reward == pytest.approx(total, abs=1e-12)
    assert all(s.cloud == 0 for s in traj.states)


def test_simulate_reward_uses_realized_clouds():
    mdp = TaskingMdp(RewardGrid([[0.0, 0.5, 1.0]]), CLEAR, 0.9, terminal_mode="absorbing")
    policy = value_iteration(mdp).policy
    hist = np.zeros((5, 1, 3), dtype=bool)
    hist[1, 0, 1] = True  # the first tile entered is cloudy at t=1
    traj = simulate_trajectory(mdp, policy, CloudField(hist), (0, 0), 5)
    assert traj.positions == [(0, 0), (0, 1), (0, 2)]
    assert [s.cloud for s in traj.states] == [0, 1, 0]
    assert traj.reward == 1.0
    assert traj.discounted_reward == pytest.approx(0.9)
    assert traj.reached_terminal


def test_simulate_start_at_terminal():
    mdp = _random_mdp(1)
    res = value_iteration(mdp)
    field = realize_clouds(mdp.clouds, *mdp.shape, 10, 0)
    traj = simulate_trajectory(mdp, res.policy, field, mdp.terminal, 10)
    assert len(traj.states) == 1 and traj.reward == 0.0


def test_simulate_missing_policy_entry():
    mdp = _random_mdp(1)
    policy = value_iteration(mdp).policy.copy()
    start = (0, 0) if not mdp.is_terminal((0, 0)) else (0, 1)
    policy[start] = NO_ACTION
    field = CloudField(np.zeros((5,) + mdp.shape, dtype=bool))
    with pytest.raises(ContractError):
        simulate_trajectory(mdp, policy, field, start, 5)


def test_simulate_short_history():
    mdp = _random_mdp(1)
    field = CloudField(np.zeros((3,) + mdp.shape, dtype=bool))
    with pytest.raises(ContractError):
        simulate_trajectory(mdp, value_iteration(mdp).policy, field, (0, 0), 4)


# --- file formats ------------------------------------------------------------------

def test_policy_round_trip(tmp_path):
    res = value_iteration(_random_mdp(4))
    save_policy(res.policy, tmp_path / "policy.txt")
    lines = (tmp_path / "policy.txt").read_text().splitlines()
    assert len(lines) == 5 * 6 * 2
    assert all(ln.split()[3] in ACTIONS + ("none",) for ln in lines)
    assert np.array_equal(load_policy(tmp_path / "policy.txt"), res.policy)


def test_policy_bad_line(tmp_path):
    (tmp_path / "p.txt").write_text("0 0 0 sideways\n")
    with pytest.raises(InputError):
        load_policy(tmp_path / "p.txt")


def test_cloud_field_round_trip(tmp_path):
    field = realize_clouds(CloudModel(), 3, 4, 5, 2)
    save_cloud_field(field, tmp_path / "c.txt")
    text = (tmp_path / "c.txt").read_text()
    assert text.count("\n\n") == 4
    assert np.array_equal(load_cloud_field(tmp_path / "c.txt").history, field.history)


@pytest.mark.parametrize("mode", ["episodic", "absorbing"])
def test_memoryless_clouds_make_policy_cloud_blind(mode):
    # with p(C'=1|C=0) == p(C'=1|C=1) the cloud bit says nothing about the next step
    mdp = _random_mdp(6, 7, 7, mode, gamma=0.95)
    mdp = TaskingMdp(mdp.grid, CloudModel(0.2, 0.5, 0.5), 0.95, terminal_mode=mode)
    res = value_iteration(mdp)
    assert np.array_equal(res.policy[..., 0], res.policy[..., 1])


def test_persistent_clouds_change_policy():
    grid = RewardGrid(np.random.default_rng(12).random((7, 7)))
    res = value_iteration(TaskingMdp(grid, CloudModel(0.2, 0.05, 0.95), 0.95))
    assert not np.array_equal(res.policy[..., 0], res.policy[..., 1])


def test_absorbing_mode_reaches_goal_under_clouds():
    r, c = np.indices((9, 9))
    fsm = RewardGrid(0.2 + 0.05 * (r + (8 - c)) + 0.03 * np.sin(r * c))
    mdp = TaskingMdp.from_fsm(fsm, CloudModel(), 0.95, terminal_mode="absorbing")
    field = realize_clouds(mdp.clouds, 9, 9, 100, 2016)
    traj = simulate_trajectory(mdp, value_iteration(mdp).policy, field, (8, 0), 100)
    assert traj.reached_terminal
    assert len(traj.states) == 17  # shortest route, no wandering
