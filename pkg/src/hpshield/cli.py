"""Command-line interface.

Subcommands:

    check          bounded falsification of a .hp model's safety claim
    simulate       one randomized execution of a .hp model, traced to CSV
    train          shielded Q-learning in a built-in environment
    penalty-sweep  training runs across rejected-proposal penalty settings
    adapt          mismatch detection, parameter re-fit, guard resynthesis

Exit codes: 0 success / no counterexample, 1 counterexample found, 2 input
error, 3 insufficient data for estimation.

Every subcommand takes `--config FILE` (key=value lines), repeated
`--set key=value` overrides, and `--out DIR` for outputs. CSV files are the
canonical outputs; matplotlib figures are rendered next to them unless
`report.figures=false`.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from . import carmodel
from .agent import EpisodeLog, QTable, TrainConfig, greedy_rollout, train
from .check import (
    BoundedCheckConfig,
    BudgetExceeded,
    CheckConfigError,
    Counterexample,
    bounded_check,
)
from .config import Config, ConfigError, load_config_file
from .envs import car as car_env_mod
from .envs import crossing as crossing_env_mod
from .interp import RandomResolver, run
from .io_utils import trace_to_csv, write_csv, write_pgm
from .modelfile import HPModel, ModelFileError, load_model
from .parser import ParseError
from .printer import print_formula
from .semantics import EvalError, compile_formula
from .shield import (
    InsufficientData,
    ModelParams,
    ShieldError,
    TransitionRecord,
    detect_mismatch,
    estimate_params,
    resynthesize_guards,
)
from .syntax import Loop


class CLIError(Exception):
    """Input or configuration problem; maps to exit code 2."""


def _build_config(args) -> Config:
    file_values = load_config_file(args.config) if args.config else {}
    overrides: Dict[str, str] = {}
    for item in args.set or []:
        if "=" not in item:
            raise CLIError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return Config(file_values, overrides)


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _want_figures(cfg: Config) -> bool:
    return bool(cfg.get_bool("report.figures", True))


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def _init_states(cfg: Config, model: HPModel) -> List[Dict[str, float]]:
    """Cartesian grid over grid.* ranges plus const.* fixed values,
    filtered by the model's init formula."""
    grid_keys = cfg.keys_with_prefix("grid.")
    const_keys = cfg.keys_with_prefix("const.")
    if not grid_keys and not const_keys:
        raise CLIError("check needs at least one grid.<var> or const.<var> setting")
    consts = {k[len("const."):]: cfg.get_float(k) for k in const_keys}
    grid_vars = [k[len("grid."):] for k in grid_keys]
    grids = [cfg.get_range(k) for k in grid_keys]

    init_ok = compile_formula(model.init)
    states = []
    for combo in itertools.product(*grids) if grids else [()]:
        s = dict(consts)
        s.update(zip(grid_vars, combo))
        try:
            if init_ok(s):
                states.append(s)
        except EvalError as exc:
            raise CLIError(f"init formula not evaluable on grid state {s}: {exc}")
    if not states:
        raise CLIError("no grid state satisfies the init formula")
    return states


def cmd_check(args) -> int:
    cfg = _build_config(args)
    model = load_model(args.model)
    inits = _init_states(cfg, model)

    samples: Dict[str, Tuple[float, ...]] = {}
    for key in cfg.keys_with_prefix("samples."):
        samples[key[len("samples."):]] = tuple(cfg.get_floats(key))
    memo_vars_raw = cfg.get_str("check.memo_vars")
    memo_vars = (
        tuple(v.strip() for v in memo_vars_raw.split(",") if v.strip())
        if memo_vars_raw
        else None
    )

    bcfg = BoundedCheckConfig(
        init_states=inits,
        loop_depth=cfg.get_int("check.depth", 10),
        dwell_times=tuple(cfg.get_floats("check.dwell", (1.0,))),
        any_samples=samples,
        budget=cfg.get_int("check.budget", 10_000_000),
        ode_step=cfg.get_float("check.ode_step", 0.01),
        memo_decimals=cfg.get_int("check.memo_decimals", 9),
        memo_vars=memo_vars,
    )
    try:
        verdict = bounded_check(Loop(model.program), model.safe, bcfg)
    except BudgetExceeded as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return 2

    if isinstance(verdict, Counterexample):
        print(f"COUNTEREXAMPLE from initial state {verdict.initial_state}")
        print(f"  final state violates {print_formula(model.safe)}: {verdict.final_state}")
        write_csv(
            _out_path(args, "check_summary.csv"),
            ["verdict", "initial_states", "loop_depth", "decisions"],
            [["counterexample", len(inits), bcfg.loop_depth, len(verdict.decisions)]],
        )
        trace_to_csv(verdict.trace, _out_path(args, "counterexample.csv"))
        if _want_figures(cfg):
            from .report import trace_figure

            trace_figure(verdict.trace, _out_path(args, "counterexample.png"),
                         variables=sorted(verdict.initial_state))
        return 1

    print(
        f"no counterexample found: {verdict.states_checked} terminal states "
        f"checked at loop depth {bcfg.loop_depth}"
    )
    write_csv(
        _out_path(args, "check_summary.csv"),
        ["verdict", "initial_states", "loop_depth", "states_checked"],
        [["no_counterexample", len(inits), bcfg.loop_depth, verdict.states_checked]],
    )
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    model = load_model(args.model)

    init = {k[len("const."):]: cfg.get_float(k) for k in cfg.keys_with_prefix("const.")}
    if not init:
        raise CLIError("simulate needs const.<var> settings for the initial state")
    init_ok = compile_formula(model.init)
    try:
        if not init_ok(init):
            raise CLIError(f"initial state {init} violates the init formula")
    except EvalError as exc:
        raise CLIError(f"initial state incomplete: {exc}")

    resolver = RandomResolver(
        seed=args.seed,
        any_range=(cfg.get_float("sim.any_lo", -1.0), cfg.get_float("sim.any_hi", 1.0)),
        max_dwell=cfg.get_float("sim.max_dwell", 1.0),
        stop_prob=cfg.get_float("sim.stop_prob", 0.2),
        ode_step=cfg.get_float("sim.ode_step", 0.01),
    )
    outcome, trace = run(Loop(model.program), init, resolver)

    safe_ok = compile_formula(model.safe)
    final = outcome.state
    verdict = "aborted" if final is None else ("safe" if safe_ok(final) else "unsafe")
    print(f"{verdict}: {len(trace.events)} events, total time {trace.total_time():.6f}")
    if final is not None:
        print(f"  final state: {final}")

    trace_to_csv(trace, _out_path(args, "trace.csv"))
    if _want_figures(cfg):
        from .report import trace_figure

        trace_figure(trace, _out_path(args, "trace.png"), variables=sorted(init))
    return 0 if verdict != "unsafe" else 1


# ---------------------------------------------------------------------------
# train / penalty-sweep
# ---------------------------------------------------------------------------


def _train_config(cfg: Config, seed: int, penalty: Optional[float] = None) -> TrainConfig:
    return TrainConfig(
        episodes=cfg.get_int("train.episodes", 300),
        alpha=cfg.get_float("train.alpha", 0.2),
        gamma=cfg.get_float("train.gamma", 0.99),
        eps_start=cfg.get_float("train.eps_start", 1.0),
        eps_end=cfg.get_float("train.eps_end", 0.05),
        eps_decay_episodes=cfg.get_int("train.eps_decay_episodes"),
        penalty=penalty if penalty is not None else cfg.get_float("train.penalty", 0.0),
        seed=seed,
        shield=bool(cfg.get_bool("train.shield", True)),
        margin=cfg.get_float("train.margin", 0.0),
    )


def _car_setup(cfg: Config):
    params = ModelParams(
        accel_max=cfg.get_float("env.accel_max", 1.0),
        brake_max=cfg.get_float("env.brake_max", 1.0),
        latency=cfg.get_float("env.latency", 1.0),
    )
    env_cfg = car_env_mod.CarEnvConfig(
        params=params,
        stop_position=cfg.get_float("env.stop_position", 100.0),
        brake_actual=cfg.get_float("env.brake_actual"),
        accel_actual=cfg.get_float("env.accel_actual"),
        x_range=tuple(cfg.get_floats("env.x_range", (0.0, 90.0))),
        v_range=tuple(cfg.get_floats("env.v_range", (0.0, 5.0))),
        max_steps=cfg.get_int("env.max_steps", 100),
    )
    env = car_env_mod.CarEnv(env_cfg)
    table = carmodel.guard_table()
    disc = car_env_mod.default_discretizer(env_cfg)
    return env, table, disc, None


def _crossing_setup(cfg: Config):
    env_cfg = crossing_env_mod.CrossingEnvConfig(
        width=cfg.get_int("env.width", 16),
        height=cfg.get_int("env.height", 12),
        road_row=cfg.get_int("env.road_row", 5),
        agent_col=cfg.get_int("env.agent_col", 8),
        agent_start_row=cfg.get_int("env.agent_start_row", 10),
        max_steps=cfg.get_int("env.max_steps", 64),
        noise_sigma=cfg.get_float("env.noise_sigma", 0.0),
    )
    env = crossing_env_mod.CrossingEnv(env_cfg)
    table = crossing_env_mod.crossing_guard_table(env_cfg)
    disc = crossing_env_mod.default_discretizer(env_cfg)
    observer = crossing_env_mod.CrossingObserver(env_cfg)
    return env, table, disc, observer


def _setup_env(cfg: Config):
    name = cfg.get_str("env.name", "car")
    if name == "car":
        return _car_setup(cfg)
    if name == "crossing":
        return _crossing_setup(cfg)
    raise CLIError(f"unknown env.name {name!r} (expected car or crossing)")


def _write_training_log(path: str, logs: Sequence[EpisodeLog], tcfg: TrainConfig):
    write_csv(
        path,
        ["episode", "reward", "violations", "interventions", "steps", "epsilon", "wall_time"],
        [
            [l.episode, repr(l.reward), l.violations, l.interventions, l.steps,
             repr(tcfg.epsilon(l.episode)), f"{l.wall_time:.6f}"]
            for l in logs
        ],
    )


def cmd_train(args) -> int:
    cfg = _build_config(args)
    env, table, disc, observer = _setup_env(cfg)
    tcfg = _train_config(cfg, args.seed)

    q, logs = train(env, table if tcfg.shield else None, disc, tcfg, observer=observer)
    total_v = sum(l.violations for l in logs)
    total_i = sum(l.interventions for l in logs)
    print(
        f"trained {tcfg.episodes} episodes: "
        f"{total_v} violations, {total_i} interventions"
    )

    eval_n = cfg.get_int("eval.episodes", 20)
    eval_seeds = [args.seed * 7_919 + i for i in range(eval_n)]
    rewards = greedy_rollout(env, q, disc, table if tcfg.shield else None,
                             eval_seeds, margin=tcfg.margin, observer=observer)
    mean_r = sum(rewards) / len(rewards)
    print(f"greedy eval over {eval_n} episodes: mean reward {mean_r:.3f}")

    _write_training_log(_out_path(args, "training_log.csv"), logs, tcfg)
    write_csv(
        _out_path(args, "eval_summary.csv"),
        ["episodes", "mean_reward", "total_violations", "total_interventions"],
        [[eval_n, repr(mean_r), total_v, total_i]],
    )
    if cfg.get_str("env.name", "car") == "crossing":
        frame = env.reset(args.seed)
        for k in range(cfg.get_int("report.frames", 3)):
            write_pgm(_out_path(args, f"frame_{k:03d}.pgm"), frame)
            frame, _, done, _ = env.step("stay")
            if done:
                break
    if _want_figures(cfg):
        from .report import training_figure

        training_figure(logs, _out_path(args, "training_curves.png"),
                        title=f"{cfg.get_str('env.name', 'car')} training")
    return 0


def cmd_penalty_sweep(args) -> int:
    cfg = _build_config(args)
    penalties = cfg.get_floats("sweep.penalties", (0.0, -1.0, -5.0, -20.0))
    eval_n = cfg.get_int("eval.episodes", 20)

    rows = []
    for penalty in penalties:
        if penalty > 0:
            raise CLIError(f"penalties must be <= 0, got {penalty}")
        env, table, disc, observer = _setup_env(cfg)
        tcfg = _train_config(cfg, args.seed, penalty=penalty)
        q, logs = train(env, table, disc, tcfg, observer=observer)
        eval_seeds = [args.seed * 7_919 + i for i in range(eval_n)]
        rewards = greedy_rollout(env, q, disc, table, eval_seeds,
                                 margin=tcfg.margin, observer=observer)
        row = {
            "penalty": penalty,
            "mean_reward": sum(rewards) / len(rewards),
            "total_violations": sum(l.violations for l in logs),
            "total_interventions": sum(l.interventions for l in logs),
        }
        rows.append(row)
        print(
            f"penalty {penalty:g}: mean eval reward {row['mean_reward']:.3f}, "
            f"{row['total_interventions']} interventions, "
            f"{row['total_violations']} violations"
        )
        _write_training_log(
            _out_path(args, f"training_log_penalty_{penalty:g}.csv"), logs, tcfg
        )

    write_csv(
        _out_path(args, "penalty_sweep.csv"),
        ["penalty", "mean_reward", "total_violations", "total_interventions"],
        [
            [r["penalty"], repr(r["mean_reward"]), r["total_violations"],
             r["total_interventions"]]
            for r in rows
        ],
    )
    if _want_figures(cfg):
        from .report import penalty_sweep_figure

        penalty_sweep_figure(rows, _out_path(args, "penalty_sweep.png"))
    return 0


# ---------------------------------------------------------------------------
# adapt
# ---------------------------------------------------------------------------


def cmd_adapt(args) -> int:
    cfg = _build_config(args)
    if cfg.get_str("env.name", "car") != "car":
        raise CLIError("adapt supports only env.name=car")
    env, stale_table, disc, _ = _car_setup(cfg)
    modeled = env.cfg.params
    episodes = cfg.get_int("adapt.episodes_per_phase", 150)
    window = cfg.get_int("adapt.window", 200)
    threshold = cfg.get_float("adapt.threshold", 3e-6)
    safety_factor = cfg.get_float("adapt.safety_factor", 0.9)

    # phase 1: run under the stale guards, recording transitions
    tcfg1 = _train_config(cfg, args.seed)
    tcfg1.episodes = episodes
    transitions: List[Dict] = []
    q, logs1 = train(env, stale_table, disc, tcfg1, collect_transitions=transitions)
    records = [
        TransitionRecord(t["before"], t["action"], t["after"], t["elapsed"])
        for t in transitions
        if t["elapsed"] >= 1e-6
    ]
    if not records:
        raise InsufficientData("any")
    report = detect_mismatch(
        records[-window:], stale_table, env.ode, modeled, threshold=threshold
    )
    worst = max(report.residuals.values())
    print(
        f"phase 1 ({episodes} episodes): mismatch={'yes' if report.flag else 'no'}, "
        f"worst residual {worst:.3e} over window {report.window_size}"
    )

    # phase 2: re-fit the dynamics parameters from the recorded transitions
    fitted = estimate_params(records)
    print(
        f"phase 2: fitted accel_max {fitted.accel_max:.4f}, "
        f"brake_max {fitted.brake_max:.4f}, latency {fitted.latency:.4f}"
    )

    # phase 3: resynthesize guards from the fit and run again
    new_table = resynthesize_guards(stale_table, fitted, safety_factor=safety_factor)
    tcfg3 = _train_config(cfg, args.seed + 1)
    tcfg3.episodes = episodes
    q3, logs3 = train(env, new_table, disc, tcfg3)

    v1 = sum(l.violations for l in logs1)
    v3 = sum(l.violations for l in logs3)
    print(f"phase 3 ({episodes} episodes): violations {v1} (stale) -> {v3} (adapted)")

    _write_training_log(_out_path(args, "adapt_log_stale.csv"), logs1, tcfg1)
    _write_training_log(_out_path(args, "adapt_log_adapted.csv"), logs3, tcfg3)
    write_csv(
        _out_path(args, "adapt_summary.csv"),
        [
            "mismatch", "worst_residual", "window", "threshold",
            "fitted_accel_max", "fitted_brake_max", "fitted_latency",
            "safety_factor", "violations_stale", "violations_adapted",
        ],
        [[
            int(report.flag), repr(worst), report.window_size, repr(threshold),
            repr(fitted.accel_max), repr(fitted.brake_max), repr(fitted.latency),
            repr(safety_factor), v1, v3,
        ]],
    )
    if _want_figures(cfg):
        from .report import adaptation_figure

        adaptation_figure(
            {"stale guards": logs1, "adapted guards": logs3},
            _out_path(args, "adaptation.png"),
        )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=0, help="base random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpshield", description="hybrid-program safety toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="bounded falsification of a .hp model")
    p.add_argument("model", help=".hp model file")
    _add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="randomized execution of a .hp model")
    p.add_argument("model", help=".hp model file")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="shielded Q-learning in a built-in env")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("penalty-sweep", help="training across penalty settings")
    _add_common(p)
    p.set_defaults(func=cmd_penalty_sweep)

    p = sub.add_parser("adapt", help="mismatch detection and guard resynthesis")
    _add_common(p)
    p.set_defaults(func=cmd_adapt)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CLIError, ConfigError, ParseError, ModelFileError, CheckConfigError,
            ShieldError, EvalError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
