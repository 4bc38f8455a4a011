"""Classic cart-pole dynamics and policy-reward estimation.

Euler-integrated benchmark physics with the de-facto standard constants,
all overridable through :class:`CartPoleConfig`. Policies map a 4-vector
(cart position, cart velocity, pole angle, pole angular velocity) to the
action LEFT or RIGHT; per-episode reward is the number of steps survived,
capped at the horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .core import DecisionTree
from .errors import DomainError
from .oracles import FunctionOracle

LEFT = 0
RIGHT = 1

STATE_FEATURES = ("cart_position", "cart_velocity", "pole_angle", "pole_velocity")


@dataclass(frozen=True)
class CartPoleConfig:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    force_mag: float = 10.0
    dt: float = 0.02
    theta_limit: float = 12.0 * math.pi / 180.0
    x_limit: float = 2.4
    horizon: int = 200
    start_span: float = 0.05

    def to_json_dict(self) -> dict:
        return {
            "gravity": self.gravity,
            "cart_mass": self.cart_mass,
            "pole_mass": self.pole_mass,
            "half_length": self.half_length,
            "force_mag": self.force_mag,
            "dt": self.dt,
            "theta_limit": self.theta_limit,
            "x_limit": self.x_limit,
            "horizon": self.horizon,
            "start_span": self.start_span,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CartPoleConfig":
        return replace(cls(), **doc)

    @classmethod
    def load(cls, path: str | Path) -> "CartPoleConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class CartPoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    steps: int = 0

    def as_vector(self) -> np.ndarray:
        return np.asarray([self.x, self.x_dot, self.theta, self.theta_dot])

    def is_terminal(self, cfg: CartPoleConfig) -> bool:
        return (
            abs(self.x) > cfg.x_limit
            or abs(self.theta) > cfg.theta_limit
            or self.steps >= cfg.horizon
        )


def initial_state(rng: np.random.Generator, cfg: CartPoleConfig) -> CartPoleState:
    vals = rng.uniform(-cfg.start_span, cfg.start_span, size=4)
    return CartPoleState(
        x=float(vals[0]), x_dot=float(vals[1]), theta=float(vals[2]), theta_dot=float(vals[3])
    )


def step(state: CartPoleState, action: int, cfg: CartPoleConfig) -> CartPoleState:
    """One Euler step of the classic dynamics; refuses terminal states."""
    if state.is_terminal(cfg):
        raise DomainError("cannot step a terminal cart-pole state")
    if action not in (LEFT, RIGHT):
        raise DomainError(f"unknown action {action!r}")
    force = cfg.force_mag if action == RIGHT else -cfg.force_mag
    total_mass = cfg.cart_mass + cfg.pole_mass
    pole_mass_length = cfg.pole_mass * cfg.half_length
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    temp = (force + pole_mass_length * state.theta_dot**2 * sin_t) / total_mass
    theta_acc = (cfg.gravity * sin_t - cos_t * temp) / (
        cfg.half_length * (4.0 / 3.0 - cfg.pole_mass * cos_t**2 / total_mass)
    )
    x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass
    return CartPoleState(
        x=state.x + cfg.dt * state.x_dot,
        x_dot=state.x_dot + cfg.dt * x_acc,
        theta=state.theta + cfg.dt * state.theta_dot,
        theta_dot=state.theta_dot + cfg.dt * theta_acc,
        steps=state.steps + 1,
    )


Policy = Callable[[np.ndarray], int]


def expert_policy(state_vec: np.ndarray) -> int:
    """Hand-coded stabilizing feedback that saturates the reward cap."""
    x, x_dot, theta, theta_dot = state_vec
    score = 10.0 * theta + 2.0 * theta_dot + 0.3 * x + 0.6 * x_dot
    return RIGHT if score > 0 else LEFT


def tree_policy(tree: DecisionTree) -> Policy:
    """Use a decision tree with action labels {0, 1} as a policy."""
    if tree.dimension != len(STATE_FEATURES):
        raise DomainError(
            f"policy trees need dimension {len(STATE_FEATURES)}, got {tree.dimension}"
        )

    def policy(state_vec: np.ndarray) -> int:
        return int(tree.predict_one(state_vec))

    return policy


def policy_oracle(policy: Policy) -> FunctionOracle:
    """Expose a policy as a batched classification oracle over state space."""

    def fn(X: np.ndarray) -> np.ndarray:
        return np.asarray([policy(row) for row in X], dtype=np.int64)

    return FunctionOracle(
        fn=fn,
        dimension=len(STATE_FEATURES),
        task="classification",
        labels=(LEFT, RIGHT),
    )


def run_episode(
    policy: Policy, rng: np.random.Generator, cfg: CartPoleConfig
) -> tuple[int, list[CartPoleState]]:
    """Roll one episode; returns (steps survived, visited states)."""
    state = initial_state(rng, cfg)
    visited = [state]
    while not state.is_terminal(cfg):
        action = policy(state.as_vector())
        state = step(state, action, cfg)
        visited.append(state)
    return state.steps, visited


@dataclass(frozen=True)
class PolicyReport:
    episodes: int
    mean_reward: float
    std_reward: float
    rewards: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "mean_reward": self.mean_reward,
            "std_reward": self.std_reward,
            "rewards": list(self.rewards),
        }


def evaluate_policy(
    policy: Policy,
    episodes: int,
    seed: int = 0,
    cfg: CartPoleConfig | None = None,
) -> PolicyReport:
    """Mean episode reward over seeded uniform starts."""
    if episodes < 1:
        raise DomainError("need at least one episode")
    cfg = cfg or CartPoleConfig()
    rewards = []
    for ep in range(episodes):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(ep,)))
        reward, _ = run_episode(policy, rng, cfg)
        rewards.append(reward)
    arr = np.asarray(rewards, dtype=np.float64)
    return PolicyReport(
        episodes=episodes,
        mean_reward=float(arr.mean()),
        std_reward=float(arr.std()),
        rewards=tuple(rewards),
    )


def collect_states(
    policy: Policy,
    episodes: int = 100,
    seed: int = 0,
    cfg: CartPoleConfig | None = None,
) -> np.ndarray:
    """Visited-state matrix over seeded rollouts, for fitting the mixture."""
    cfg = cfg or CartPoleConfig()
    rows = []
    for ep in range(episodes):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(ep,)))
        _, visited = run_episode(policy, rng, cfg)
        rows.extend(s.as_vector() for s in visited)
    return np.asarray(rows, dtype=np.float64)
