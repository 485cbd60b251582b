"""Grid road-crossing environment with pixel observations.

The agent walks vertically in a fixed column and must cross a one-row road
patrolled by a car that moves leftward (with wraparound) at a per-episode
speed. Seeds placed on the agent's column give reward but are irrelevant to
safety. Observations are rendered grayscale frames; the ground-truth
symbolic state is kept for the oracle tests and the shield table is stated
over it (agent position, car column, car speed).

Reaching any row above the road ends the episode (the far side), so in
every live state the agent is on or below the road row. Moving down
therefore never lands on the road and is the always-admissible fallback;
any action that would leave the agent on the road row is guarded by a
one-step clearance condition on the car's next position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..parser import parse_formula
from ..shield import GuardEntry, GuardTable
from ..syntax import Add, Const, Formula, Or, Sub, TrueF, Var

Frame = np.ndarray

ACTIONS = ("down", "stay", "up")
FALLBACK = "down"


@dataclass
class CrossingEnvConfig:
    width: int = 16
    height: int = 12
    road_row: int = 5
    agent_col: int = 8
    agent_start_row: int = 10
    car_speed_range: Tuple[int, int] = (1, 3)
    seed_count: int = 3
    sprite_size: int = 4
    collision_radius: int = 1
    max_steps: int = 64
    seed_reward: float = 1.0
    collision_penalty: float = 10.0
    goal_reward: float = 10.0
    noise_sigma: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if not 0 < self.road_row < self.height - 1:
            raise ValueError("road_row must be interior")
        if not 0 <= self.agent_col < self.width:
            raise ValueError("agent_col outside grid")
        if self.agent_start_row < self.road_row + 2:
            raise ValueError("agent must start at least two rows below the road")
        if self.car_speed_range[1] >= self.width:
            raise ValueError("car speed must be below the grid width")


# -- sprites ----------------------------------------------------------------


def sprites(sz: int) -> Dict[str, np.ndarray]:
    """Fixed per-class intensity patterns, pairwise non-translationally equal."""
    i, j = np.mgrid[0:sz, 0:sz]
    agent = np.where((i == j) | (i + j == sz - 1), 1.0, 0.15)
    car = 0.25 + 0.7 * j / max(sz - 1, 1)
    c = (sz - 1) / 2.0
    seed = np.exp(-((i - c) ** 2 + (j - c) ** 2) / max(sz / 2.0, 1.0))
    return {"agent": agent, "car": car, "seed": 0.9 * seed}


def render(state: Dict[str, float], cfg: CrossingEnvConfig,
           seed_cells: Optional[List[Tuple[int, int]]] = None) -> Frame:
    """Deterministically rasterize a ground-truth state to a frame in [0,1]."""
    sz = cfg.sprite_size
    frame = np.zeros((cfg.height * sz, cfg.width * sz))
    pats = sprites(sz)

    def blit(name: str, row: int, col: int):
        frame[row * sz:(row + 1) * sz, col * sz:(col + 1) * sz] = pats[name]

    for (r, c) in seed_cells or []:
        blit("seed", r, c)
    blit("car", cfg.road_row, int(state["car_col"]))
    blit("agent", int(state["agent_row"]), int(state["agent_col"]))

    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.noise_seed)
        frame = frame + rng.normal(0.0, cfg.noise_sigma, frame.shape)
    return np.clip(frame, 0.0, 1.0)


# -- environment ------------------------------------------------------------


class CrossingEnv:
    actions = ACTIONS

    def __init__(self, cfg: CrossingEnvConfig):
        self.cfg = cfg
        self.state: Dict[str, float] = {}
        self.seed_cells: List[Tuple[int, int]] = []
        self.steps = 0

    def _frame(self) -> Frame:
        return render(self.state, self.cfg, self.seed_cells)

    def reset(self, seed: int) -> Frame:
        cfg = self.cfg
        rng = np.random.default_rng(seed)
        self.state = {
            "agent_row": float(cfg.agent_start_row),
            "agent_col": float(cfg.agent_col),
            "car_col": float(rng.integers(cfg.width)),
            "car_speed": float(rng.integers(cfg.car_speed_range[0], cfg.car_speed_range[1] + 1)),
        }
        rows = list(rng.permutation(range(cfg.road_row + 1, cfg.agent_start_row)))
        self.seed_cells = [(int(r), cfg.agent_col) for r in sorted(rows[: cfg.seed_count])]
        self.steps = 0
        return self._frame()

    def step(self, action: str) -> Tuple[Frame, float, bool, Dict]:
        cfg = self.cfg
        s = self.state
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")

        row = int(s["agent_row"])
        if action == "up":
            row = max(0, row - 1)
        elif action == "down":
            row = min(cfg.height - 1, row + 1)
        s["agent_row"] = float(row)

        reward = 0.0
        cell = (row, int(s["agent_col"]))
        if cell in self.seed_cells:
            self.seed_cells.remove(cell)
            reward += cfg.seed_reward

        s["car_col"] = float((int(s["car_col"]) - int(s["car_speed"])) % cfg.width)
        self.steps += 1

        collision = (
            row == cfg.road_row
            and abs(int(s["agent_col"]) - int(s["car_col"])) <= cfg.collision_radius
        )
        crossed = row < cfg.road_row
        done = collision or crossed or self.steps >= cfg.max_steps
        if collision:
            reward -= cfg.collision_penalty
        if crossed:
            reward += cfg.goal_reward

        info = {
            "violation": collision,
            "crossed": crossed,
            "state": dict(s),
            "action": action,
        }
        return self._frame(), reward, done, info


# -- shield table -----------------------------------------------------------


def _clearance_formula(cfg: CrossingEnvConfig) -> Formula:
    """True iff after the car's next move it is outside the collision radius.

    With d = car_col - car_speed, the car's next column is d if d >= 0 and
    d + width otherwise (speed < width, so one wrap suffices). Everything
    is integral, so `distance > r` is written `distance >= r + 1`: that way
    the guard's truth value and the sign of its robustness margin agree
    (a false strict comparison at the boundary has margin exactly 0).
    """
    r1 = cfg.collision_radius + 1
    w = cfg.width
    return parse_formula(
        f"(car_col - car_speed >= 0 & "
        f"(car_col - car_speed - agent_col >= {r1} | agent_col - car_col + car_speed >= {r1}))"
        f" | (car_col - car_speed <= -1 & "
        f"(car_col - car_speed + {w} - agent_col >= {r1}"
        f" | agent_col - car_col + car_speed - {w} >= {r1}))"
    )


def crossing_guard_table(cfg: CrossingEnvConfig) -> GuardTable:
    """Shield table over symbolic features (agent position, car column/speed).

    Actions landing the agent on the road row require one-step clearance;
    everything else is unguarded. `down` is the fallback: live states have
    the agent on or below the road, so moving down always ends off-road.
    """
    clear = _clearance_formula(cfg)
    road = cfg.road_row
    # action lands on the road iff agent_row has the given value beforehand
    on_road_if = {
        "up": road + 1,
        "stay": road,
        "down": road - 1,  # unreachable in live states; down stays unguarded
    }

    def guard_for(action: str) -> Formula:
        if action == "down":
            return TrueF()
        at = on_road_if[action]
        off = parse_formula(f"agent_row <= {at - 1} | agent_row >= {at + 1}")
        return Or(off, clear)

    def move_for(action: str):
        if action == "stay":
            return ()
        delta = -1 if action == "up" else 1
        return ((
            "agent_row",
            Add(Var("agent_row"), Const(1)) if delta == 1 else Sub(Var("agent_row"), Const(1)),
        ),)

    entries = [GuardEntry(a, move_for(a), guard_for(a)) for a in ACTIONS]
    return GuardTable(entries, FALLBACK)


# -- perception glue --------------------------------------------------------


def default_templates(cfg: CrossingEnvConfig):
    """Templates and pixel-to-cell calibration for the built-in sprites."""
    from ..perception import AffineCoord, Template

    pats = sprites(cfg.sprite_size)
    scale = 1.0 / cfg.sprite_size
    templates = [
        Template("agent", pats["agent"], quality=0.9, required=True),
        Template("car", pats["car"], quality=0.9, required=True),
        Template("seed", pats["seed"], quality=0.9, required=False),
    ]
    symbol_map = {
        "agent": (
            AffineCoord("agent_row", "row", scale),
            AffineCoord("agent_col", "col", scale),
        ),
        "car": (AffineCoord("car_col", "col", scale),),
    }
    return templates, symbol_map


class CrossingObserver:
    """Maps frames to the symbolic shield state, estimating car speed.

    Speed is not visible in a single frame; it is recovered from the car
    column difference between consecutive frames (modulo wraparound).
    Until one step has been observed, the fastest configured speed is
    assumed, the conservative choice for the clearance guard.
    """

    def __init__(self, cfg: CrossingEnvConfig):
        self.cfg = cfg
        self.templates, self.symbol_map = default_templates(cfg)
        self.prev_car_col = None

    def reset(self):
        self.prev_car_col = None

    def __call__(self, frame):
        from ..perception import PerceptionFailure, extract_symbols

        sym = extract_symbols(frame, self.templates, self.symbol_map)
        if isinstance(sym, PerceptionFailure):
            return sym
        car_col = sym["car_col"]
        if self.prev_car_col is None:
            speed = float(self.cfg.car_speed_range[1])
        else:
            speed = float((self.prev_car_col - car_col) % self.cfg.width)
        self.prev_car_col = car_col
        sym["car_speed"] = speed
        return sym


def default_discretizer(cfg: CrossingEnvConfig):
    """One bin per grid cell / speed value (the state is already discrete)."""
    from ..agent import Discretizer, DiscretizerVar

    return Discretizer(
        (
            DiscretizerVar("agent_row", 0.0, float(cfg.height), cfg.height),
            DiscretizerVar("car_col", 0.0, float(cfg.width), cfg.width),
            DiscretizerVar("car_speed", 0.0, float(cfg.car_speed_range[1] + 1),
                           cfg.car_speed_range[1] + 1),
        )
    )
