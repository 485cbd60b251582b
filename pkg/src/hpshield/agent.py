"""Tabular Q-learning over discretized symbolic state, with optional
shield-constrained action selection and the rejected-proposal penalty.

Learning always happens on the executed (post-shield) action; when the
penalty option is active, a rejected proposal additionally receives an
update toward the (non-positive) penalty target in the state it was
proposed in. Runs are fully deterministic given the config seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .perception import PerceptionFailure
from .shield import GuardTable, shield_action

StateIndex = Tuple[int, ...]


@dataclass(frozen=True)
class DiscretizerVar:
    name: str
    lower: float
    upper: float
    bins: int

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper for {self.name!r}")


@dataclass(frozen=True)
class Discretizer:
    vars: Tuple[DiscretizerVar, ...]

    def index(self, s: Dict[str, float]) -> StateIndex:
        out = []
        for v in self.vars:
            i = int((s[v.name] - v.lower) / (v.upper - v.lower) * v.bins)
            out.append(min(max(i, 0), v.bins - 1))  # clamp out-of-range values
        return tuple(out)

    def center(self, idx: StateIndex) -> Dict[str, float]:
        return {
            v.name: v.lower + (i + 0.5) * (v.upper - v.lower) / v.bins
            for v, i in zip(self.vars, idx)
        }


class QTable:
    """Sparse action-value table; missing entries read as 0."""

    def __init__(self):
        self._q: Dict[Tuple[StateIndex, str], float] = {}

    def get(self, s: StateIndex, a: str) -> float:
        return self._q.get((s, a), 0.0)

    def set(self, s: StateIndex, a: str, value: float):
        self._q[(s, a)] = value

    def max_value(self, s: StateIndex, actions: Sequence[str]) -> float:
        return max(self.get(s, a) for a in actions)

    def greedy(self, s: StateIndex, actions: Sequence[str]) -> str:
        """Argmax with lexicographic tie-break on the action id."""
        best = None
        best_q = -float("inf")
        for a in sorted(actions):
            q = self.get(s, a)
            if q > best_q:
                best, best_q = a, q
        return best

    def items(self):
        return self._q.items()


@dataclass
class TrainConfig:
    episodes: int = 1000
    alpha: float = 0.2
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_episodes: Optional[int] = None  # default: 60% of episodes
    penalty: float = 0.0  # update target for rejected proposals; <= 0
    seed: int = 0
    shield: bool = True
    margin: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.penalty > 0:
            raise ValueError(f"penalty must be <= 0, got {self.penalty}")
        if self.eps_decay_episodes is None:
            self.eps_decay_episodes = max(1, int(0.6 * self.episodes))

    def epsilon(self, episode: int) -> float:
        frac = min(1.0, episode / self.eps_decay_episodes)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class EpisodeLog:
    episode: int
    reward: float
    violations: int
    interventions: int
    steps: int
    wall_time: float


def select_action(
    q: QTable, s: StateIndex, actions: Sequence[str], eps: float, rng: np.random.Generator
) -> str:
    """Epsilon-greedy proposal over the sorted action set."""
    ordered = sorted(actions)
    if rng.random() < eps:
        return ordered[int(rng.integers(len(ordered)))]
    return q.greedy(s, ordered)


def q_update(
    q: QTable,
    s: StateIndex,
    a: str,
    reward: float,
    s_next: StateIndex,
    done: bool,
    actions: Sequence[str],
    cfg: TrainConfig,
):
    """One-step Q-learning update toward reward + gamma * max_a' Q(s', a')."""
    bootstrap = 0.0 if done else cfg.gamma * q.max_value(s_next, actions)
    q.set(s, a, (1 - cfg.alpha) * q.get(s, a) + cfg.alpha * (reward + bootstrap))


def episode_seed(base_seed: int, episode: int) -> int:
    return base_seed * 1_000_003 + episode


def train(
    env,
    table: Optional[GuardTable],
    discretizer: Discretizer,
    cfg: TrainConfig,
    observer: Optional[Callable] = None,
    q: Optional[QTable] = None,
    collect_transitions: Optional[List] = None,
) -> Tuple[QTable, List[EpisodeLog]]:
    """Run cfg.episodes training episodes; returns the table and per-episode log.

    `observer` maps raw observations to symbolic states (identity for
    symbolic envs); a PerceptionFailure makes the agent execute the
    fallback action for that step without learning. When
    `collect_transitions` is a list, every step's (before, action, after,
    elapsed) is appended to it as a dict (used by the adaptation phase).
    """
    q = q if q is not None else QTable()
    actions = sorted(env.actions)
    rng = np.random.default_rng(cfg.seed)
    logs: List[EpisodeLog] = []

    for ep in range(cfg.episodes):
        t0 = time.perf_counter()
        obs = env.reset(episode_seed(cfg.seed, ep))
        if observer is not None and hasattr(observer, "reset"):
            observer.reset()
        sym = obs if observer is None else observer(obs)
        eps = cfg.epsilon(ep)
        total = 0.0
        violations = 0
        interventions = 0
        steps = 0
        done = False

        while not done:
            if isinstance(sym, PerceptionFailure):
                executed = table.fallback if table is not None else actions[0]
                obs, reward, done, info = env.step(executed)
                sym = obs if observer is None else observer(obs)
                total += reward
                violations += int(bool(info.get("violation")))
                interventions += 1
                steps += 1
                continue

            s_idx = discretizer.index(sym)
            proposed = select_action(q, s_idx, actions, eps, rng)
            if table is not None and cfg.shield:
                executed, intervened = shield_action(table, sym, proposed, cfg.margin)
            else:
                executed, intervened = proposed, False

            obs, reward, done, info = env.step(executed)
            sym_next = obs if observer is None else observer(obs)

            if collect_transitions is not None and "before" in info:
                collect_transitions.append(
                    {
                        "before": info["before"],
                        "action": executed,
                        "after": dict(obs) if isinstance(obs, dict) else dict(info["state"]),
                        "elapsed": info.get("elapsed", 1.0),
                    }
                )

            if not isinstance(sym_next, PerceptionFailure):
                s_next = discretizer.index(sym_next)
                q_update(q, s_idx, executed, reward, s_next, done, actions, cfg)
                if cfg.penalty != 0.0 and intervened:
                    q.set(
                        s_idx,
                        proposed,
                        (1 - cfg.alpha) * q.get(s_idx, proposed) + cfg.alpha * cfg.penalty,
                    )

            sym = sym_next
            total += reward
            violations += int(bool(info.get("violation")))
            interventions += int(intervened)
            steps += 1

        logs.append(
            EpisodeLog(ep, total, violations, interventions, steps, time.perf_counter() - t0)
        )
    return q, logs


def greedy_rollout(
    env,
    q: QTable,
    discretizer: Discretizer,
    table: Optional[GuardTable],
    seeds: Sequence[int],
    margin: float = 0.0,
    observer: Optional[Callable] = None,
) -> List[float]:
    """Episode rewards of the greedy policy (shielded if a table is given)."""
    actions = sorted(env.actions)
    rewards = []
    for seed in seeds:
        obs = env.reset(seed)
        if observer is not None and hasattr(observer, "reset"):
            observer.reset()
        sym = obs if observer is None else observer(obs)
        total = 0.0
        done = False
        while not done:
            if isinstance(sym, PerceptionFailure):
                executed = table.fallback if table is not None else actions[0]
            else:
                proposed = q.greedy(discretizer.index(sym), actions)
                if table is not None:
                    executed, _ = shield_action(table, sym, proposed, margin)
                else:
                    executed = proposed
            obs, reward, done, _ = env.step(executed)
            sym = obs if observer is None else observer(obs)
            total += reward
        rewards.append(total)
    return rewards
