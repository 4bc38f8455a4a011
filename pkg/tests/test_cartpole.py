import numpy as np
import pytest

from treemirror.cartpole import (
    LEFT,
    RIGHT,
    CartPoleConfig,
    CartPoleState,
    collect_states,
    evaluate_policy,
    expert_policy,
    initial_state,
    run_episode,
    step,
    tree_policy,
)
from treemirror.core import DecisionTree, Leaf, Split
from treemirror.errors import DomainError


def test_mirror_symmetry_is_exact():
    cfg = CartPoleConfig()
    rng = np.random.default_rng(0)
    state = initial_state(rng, cfg)
    mirror = CartPoleState(-state.x, -state.x_dot, -state.theta, -state.theta_dot)
    actions = [LEFT, RIGHT, RIGHT, LEFT, RIGHT]
    for a in actions:
        state = step(state, a, cfg)
        mirror = step(mirror, RIGHT if a == LEFT else LEFT, cfg)
        assert mirror.x == -state.x
        assert mirror.x_dot == -state.x_dot
        assert mirror.theta == -state.theta
        assert mirror.theta_dot == -state.theta_dot


def test_angle_limit_marks_terminal():
    cfg = CartPoleConfig()
    state = CartPoleState(0.0, 0.0, cfg.theta_limit * 1.01, 0.0)
    assert state.is_terminal(cfg)
    leaning = CartPoleState(0.0, 0.0, cfg.theta_limit * 0.99, 0.0)
    assert not leaning.is_terminal(cfg)


def test_stepping_terminal_state_is_an_error():
    cfg = CartPoleConfig()
    state = CartPoleState(5.0, 0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        step(state, LEFT, cfg)


def test_horizon_caps_episodes():
    report = evaluate_policy(expert_policy, episodes=20, seed=7)
    assert max(report.rewards) <= CartPoleConfig().horizon
    assert min(report.rewards) >= 1


def test_expert_reaches_the_cap():
    report = evaluate_policy(expert_policy, episodes=100, seed=42)
    assert report.mean_reward == 200.0


def test_always_left_fails_quickly():
    report = evaluate_policy(lambda s: LEFT, episodes=100, seed=42)
    assert report.mean_reward < 50


def test_policy_evaluation_is_deterministic():
    a = evaluate_policy(expert_policy, episodes=10, seed=3)
    b = evaluate_policy(expert_policy, episodes=10, seed=3)
    assert a.rewards == b.rewards


def test_collect_states_shapes():
    states = collect_states(expert_policy, episodes=5, seed=1)
    assert states.shape[1] == 4
    assert states.shape[0] >= 5


def test_tree_policy_round_trip():
    tree = DecisionTree(
        task="classification",
        feature_names=("cart_position", "cart_velocity", "pole_angle", "pole_velocity"),
        nodes=(Split(2, 0.0, 1, 2), Leaf(LEFT), Leaf(RIGHT)),
    )
    policy = tree_policy(tree)
    assert policy(np.asarray([0.0, 0.0, 0.05, 0.0])) == RIGHT
    assert policy(np.asarray([0.0, 0.0, -0.05, 0.0])) == LEFT
    reward, visited = run_episode(policy, np.random.default_rng(0), CartPoleConfig())
    assert reward == len(visited) - 1


def test_config_json_round_trip(tmp_path):
    cfg = CartPoleConfig(horizon=123)
    path = tmp_path / "env.json"
    import json

    path.write_text(json.dumps(cfg.to_json_dict()), encoding="utf-8")
    assert CartPoleConfig.load(path) == cfg
