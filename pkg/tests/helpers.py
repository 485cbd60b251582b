"""Shared test utilities: random AST generation and a value-iteration oracle.

Both are written independently of the library internals they exercise: the
AST generator builds trees straight from the syntax constructors, and the
value-iteration oracle derives an optimal policy for the discretized car
MDP without using the Q-learning code.
"""

from __future__ import annotations

import random
from typing import Dict, List, Tuple

from hpshield.agent import Discretizer
from hpshield.envs.car import CarEnv, CarEnvConfig
from hpshield.shield import GuardTable, shield_action
from hpshield.syntax import (
    ODE,
    Add,
    And,
    Assign,
    AssignAny,
    Box,
    Choice,
    Cmp,
    Const,
    Exists,
    FalseF,
    Forall,
    Implies,
    Loop,
    Mul,
    Neg,
    Not,
    Or,
    Pow,
    Seq,
    Sub,
    Test,
    TrueF,
    Var,
)

# dyadic constants whose repr round-trips exactly through the printer
_CONSTS = [0.0, 1.0, 2.0, 3.0, 0.5, 1.5, 2.25, 10.0]
_VARS = ["x", "v", "a", "t", "eps", "m", "y2", "w_0"]
_RELS = ["<=", "<", "=", ">", ">="]


def random_term(rng: random.Random, depth: int):
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Const(rng.choice(_CONSTS))
        return Var(rng.choice(_VARS))
    kind = rng.randrange(5)
    if kind == 0:
        return Neg(random_term(rng, depth - 1))
    if kind == 1:
        return Add(random_term(rng, depth - 1), random_term(rng, depth - 1))
    if kind == 2:
        return Sub(random_term(rng, depth - 1), random_term(rng, depth - 1))
    if kind == 3:
        return Mul(random_term(rng, depth - 1), random_term(rng, depth - 1))
    return Pow(random_term(rng, depth - 1), rng.randrange(1, 4))


def random_formula(rng: random.Random, depth: int, allow_box: bool = True,
                   allow_quant: bool = True):
    if depth <= 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.1:
            return TrueF()
        if r < 0.2:
            return FalseF()
        return Cmp(random_term(rng, depth - 1), rng.choice(_RELS), random_term(rng, depth - 1))
    kinds = 4 + (2 if allow_quant else 0) + (1 if allow_box else 0)
    kind = rng.randrange(kinds)
    if kind == 0:
        return And(random_formula(rng, depth - 1, allow_box, allow_quant),
                   random_formula(rng, depth - 1, allow_box, allow_quant))
    if kind == 1:
        return Or(random_formula(rng, depth - 1, allow_box, allow_quant),
                  random_formula(rng, depth - 1, allow_box, allow_quant))
    if kind == 2:
        return Implies(random_formula(rng, depth - 1, allow_box, allow_quant),
                       random_formula(rng, depth - 1, allow_box, allow_quant))
    if kind == 3:
        return Not(random_formula(rng, depth - 1, allow_box, allow_quant))
    if allow_quant and kind == 4:
        return Forall(rng.choice(_VARS), random_formula(rng, depth - 1, allow_box, allow_quant))
    if allow_quant and kind == 5:
        return Exists(rng.choice(_VARS), random_formula(rng, depth - 1, allow_box, allow_quant))
    return Box(random_program(rng, depth - 1), random_formula(rng, depth - 1, allow_box, allow_quant))


def random_program(rng: random.Random, depth: int):
    if depth <= 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.4:
            return Assign(rng.choice(_VARS), random_term(rng, depth - 1))
        if r < 0.6:
            return AssignAny(rng.choice(_VARS))
        return Test(random_formula(rng, max(depth - 1, 0), allow_box=False, allow_quant=False))
    kind = rng.randrange(4)
    if kind == 0:
        return Seq(random_program(rng, depth - 1), random_program(rng, depth - 1))
    if kind == 1:
        return Choice(random_program(rng, depth - 1), random_program(rng, depth - 1))
    if kind == 2:
        return Loop(random_program(rng, depth - 1))
    n = rng.randrange(1, 4)
    names = rng.sample(_VARS, n)
    eqs = tuple((name, random_term(rng, depth - 2)) for name in names)
    domain = (random_formula(rng, depth - 2, allow_box=False, allow_quant=False)
              if rng.random() < 0.7 else TrueF())
    return ODE(eqs, domain)


# ---------------------------------------------------------------------------
# Value-iteration oracle for the discretized car MDP
# ---------------------------------------------------------------------------


def car_vi_policy(
    env_cfg: CarEnvConfig,
    disc: Discretizer,
    table: GuardTable,
    gamma: float = 0.99,
    sweeps: int = 400,
) -> Dict[Tuple[int, ...], str]:
    """Optimal greedy policy of the bin-center MDP under the shield.

    Transitions are generated by stepping a real environment from every bin
    center (the dynamics are deterministic); terminal transitions bootstrap
    with zero. This deliberately shares the discretization aliasing with
    the learner so the comparison isolates the learning algorithm.
    """
    env = CarEnv(env_cfg)
    env.reset(0)  # populate the parameter entries of the state
    base = {k: v for k, v in env.state.items() if k not in ("x", "v")}
    actions = sorted(env.actions)

    states: List[Tuple[int, ...]] = [
        (i, j) for i in range(disc.vars[0].bins) for j in range(disc.vars[1].bins)
    ]
    # model[(s, a)] = (reward, next_index or None if terminal)
    model: Dict[Tuple[Tuple[int, ...], str], Tuple[float, object]] = {}
    for idx in states:
        center = disc.center(idx)
        for proposed in actions:
            s = dict(base)
            s.update(center)
            executed, _ = shield_action(table, s, proposed)
            env.state = s
            env.steps = 0
            obs, reward, done, _ = env.step(executed)
            model[(idx, proposed)] = (reward, None if done else disc.index(obs))

    value = {idx: 0.0 for idx in states}
    for _ in range(sweeps):
        delta = 0.0
        for idx in states:
            best = -float("inf")
            for a in actions:
                reward, nxt = model[(idx, a)]
                q = reward + (0.0 if nxt is None else gamma * value[nxt])
                best = max(best, q)
            delta = max(delta, abs(best - value[idx]))
            value[idx] = best
        if delta < 1e-9:
            break

    policy = {}
    for idx in states:
        best_a, best_q = None, -float("inf")
        for a in actions:
            reward, nxt = model[(idx, a)]
            q = reward + (0.0 if nxt is None else gamma * value[nxt])
            if q > best_q:
                best_a, best_q = a, q
        policy[idx] = best_a
    return policy


def rollout_policy(
    env: CarEnv,
    policy: Dict[Tuple[int, ...], str],
    disc: Discretizer,
    table: GuardTable,
    seeds,
) -> List[float]:
    """Real-environment returns of a tabular policy under the shield."""
    rewards = []
    for seed in seeds:
        obs = env.reset(seed)
        total = 0.0
        done = False
        while not done:
            proposed = policy[disc.index(obs)]
            executed, _ = shield_action(table, obs, proposed)
            obs, r, done, _ = env.step(executed)
            total += r
        rewards.append(total)
    return rewards
