"""Stop-sign car environment with symbolic observations.

Dynamics follow the built-in car model, except that the *actual* braking
and acceleration magnitudes may differ from the modeled ones; that gap is
how modeling error is injected for the adaptation experiments. Each step
applies the chosen action's acceleration and flows the plant ODE for one
full control latency (clipped when the car stops).

The plant is a double integrator, for which classical RK4 is exact up to
roundoff, so the default integration step is one full latency interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .. import carmodel
from ..flow import ExitReason, flow
from ..semantics import State, compile_formula
from ..shield import ModelParams


@dataclass
class CarEnvConfig:
    params: ModelParams = field(default_factory=lambda: ModelParams(1.0, 1.0, 1.0))
    stop_position: float = 100.0
    brake_actual: Optional[float] = None  # defaults to modeled brake_max
    accel_actual: Optional[float] = None  # defaults to modeled accel_max
    x_range: Tuple[float, float] = (0.0, 90.0)
    v_range: Tuple[float, float] = (0.0, 5.0)
    progress_weight: float = 1.0
    violation_penalty: float = 100.0
    stop_bonus: float = 50.0
    stop_window: float = 1.0  # |x - m| tolerance for the stop bonus
    max_steps: int = 100
    ode_step: Optional[float] = None  # None: one step per latency interval

    def __post_init__(self):
        if self.brake_actual is None:
            self.brake_actual = self.params.brake_max
        if self.accel_actual is None:
            self.accel_actual = self.params.accel_max
        if self.brake_actual <= 0:
            raise ValueError(f"brake_actual must be > 0, got {self.brake_actual}")


class CarEnv:
    """Single-threaded state machine; observations are full symbolic states."""

    actions = carmodel.ACTIONS

    def __init__(self, cfg: CarEnvConfig):
        self.cfg = cfg
        self.ode = carmodel.plant()
        self._init_ok = compile_formula(carmodel.init_formula())
        self.state: State = {}
        self.steps = 0

    def reset(self, seed: int) -> State:
        rng = np.random.default_rng(seed)
        cfg = self.cfg
        base = {
            "A": cfg.params.accel_max,
            "b": cfg.params.brake_max,
            "eps": cfg.params.latency,
            "m": cfg.stop_position,
            "t": 0.0,
            "a": 0.0,
        }
        while True:
            s = dict(base)
            s["x"] = float(rng.uniform(*cfg.x_range))
            s["v"] = float(rng.uniform(*cfg.v_range))
            if self._init_ok(s):
                break
        self.state = s
        self.steps = 0
        return dict(s)

    def step(self, action: str) -> Tuple[State, float, bool, Dict]:
        cfg = self.cfg
        if action == "brake":
            accel = -cfg.brake_actual
        elif action == "accel":
            accel = cfg.accel_actual
        else:
            raise ValueError(f"unknown action {action!r}")

        before = dict(self.state)
        s = dict(self.state)
        s["a"] = accel
        s["t"] = 0.0
        step = cfg.ode_step if cfg.ode_step is not None else cfg.params.latency
        res = flow(self.ode, s, cfg.params.latency, step=step)
        after = res.state
        self.state = after
        self.steps += 1

        m = cfg.stop_position
        violation = after["x"] > m
        # the braking domain exit leaves v within integrator event tolerance
        # of zero, so "stopped" must accept that residual velocity
        stopped = after["v"] <= 1e-9 and abs(m - after["x"]) <= cfg.stop_window
        done = violation or stopped or self.steps >= cfg.max_steps

        reward = cfg.progress_weight * (after["x"] - before["x"])
        if violation:
            reward -= cfg.violation_penalty
        if stopped:
            reward += cfg.stop_bonus

        info = {
            "violation": violation,
            "stopped": stopped,
            "elapsed": res.elapsed,
            "domain_exit": res.reason is ExitReason.DOMAIN_EXIT,
            "before": before,
            "action": action,
        }
        return dict(after), reward, done, info


def default_discretizer(cfg: CarEnvConfig):
    """x over [0, m] in 50 bins, v over [0, 12] in 25 bins."""
    from ..agent import Discretizer, DiscretizerVar

    return Discretizer(
        (
            DiscretizerVar("x", 0.0, cfg.stop_position, 50),
            DiscretizerVar("v", 0.0, 12.0, 25),
        )
    )
