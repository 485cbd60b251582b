"""Matplotlib figure rendering for CLI reports.

Every figure is written next to the CSV it visualizes; the CSVs remain the
canonical machine-readable output. The Agg backend is forced so rendering
works headless.
"""

from __future__ import annotations

import os
import tempfile
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .agent import EpisodeLog  # noqa: E402
from .interp import ContinuousStep, Trace  # noqa: E402


def _save(fig, path: str):
    """Atomic figure write (temp file + rename), mirroring the CSV helpers."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png.tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=120)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def _smooth(values: Sequence[float], window: int) -> List[float]:
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def training_figure(logs: Sequence[EpisodeLog], path: str, title: str = "training"):
    """Reward (raw + moving average), violations, and interventions per episode."""
    episodes = [l.episode for l in logs]
    rewards = [l.reward for l in logs]
    window = max(1, len(logs) // 20)

    fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
    axes[0].plot(episodes, rewards, color="0.8", lw=0.8, label="episode reward")
    axes[0].plot(episodes, _smooth(rewards, window), color="C0", lw=1.5,
                 label=f"moving avg ({window})")
    axes[0].set_ylabel("reward")
    axes[0].legend(loc="lower right", fontsize=8)
    axes[0].set_title(title)

    cum = 0
    cum_violations = []
    for l in logs:
        cum += l.violations
        cum_violations.append(cum)
    axes[1].plot(episodes, cum_violations, color="C3")
    axes[1].set_ylabel("cumulative violations")

    axes[2].plot(episodes, [l.interventions for l in logs], color="C2", lw=0.8)
    axes[2].set_ylabel("interventions")
    axes[2].set_xlabel("episode")

    fig.tight_layout()
    _save(fig, path)


def penalty_sweep_figure(rows: Sequence[Dict], path: str):
    """Final performance and total interventions across penalty settings.

    Each row needs keys: penalty, mean_reward, total_violations,
    total_interventions.
    """
    penalties = [r["penalty"] for r in rows]
    x = range(len(penalties))
    labels = [f"{p:g}" for p in penalties]

    fig, axes = plt.subplots(1, 3, figsize=(11, 3.6))
    axes[0].bar(x, [r["mean_reward"] for r in rows], color="C0")
    axes[0].set_ylabel("mean eval reward")
    axes[1].bar(x, [r["total_interventions"] for r in rows], color="C2")
    axes[1].set_ylabel("total interventions")
    axes[2].bar(x, [r["total_violations"] for r in rows], color="C3")
    axes[2].set_ylabel("total violations")
    for ax in axes:
        ax.set_xticks(list(x))
        ax.set_xticklabels(labels)
        ax.set_xlabel("penalty")
    fig.tight_layout()
    _save(fig, path)


def adaptation_figure(phases: Dict[str, Sequence[EpisodeLog]], path: str):
    """Per-phase reward curves and violation totals, phases side by side."""
    names = list(phases)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for i, name in enumerate(names):
        logs = phases[name]
        rewards = [l.reward for l in logs]
        window = max(1, len(logs) // 10)
        axes[0].plot([l.episode for l in logs], _smooth(rewards, window),
                     label=name, color=f"C{i}")
    axes[0].set_xlabel("episode")
    axes[0].set_ylabel("reward (moving avg)")
    axes[0].legend(fontsize=8)

    totals = [sum(l.violations for l in phases[n]) for n in names]
    axes[1].bar(range(len(names)), totals, color=[f"C{i}" for i in range(len(names))])
    axes[1].set_xticks(range(len(names)))
    axes[1].set_xticklabels(names, rotation=15, fontsize=8)
    axes[1].set_ylabel("violations")
    fig.tight_layout()
    _save(fig, path)


def trace_figure(trace: Trace, path: str, variables: Sequence[str] = ()):
    """Piecewise time series of selected state variables along a trace."""
    names = list(variables)
    if not names:
        seen = set()
        for ev in trace.events:
            seen.update(ev.state)
        names = sorted(seen)

    times = []
    t = 0.0
    for ev in trace.events:
        if isinstance(ev, ContinuousStep):
            t += ev.duration
        times.append(t)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, name in enumerate(names):
        ys = [ev.state.get(name, float("nan")) for ev in trace.events]
        ax.plot(times, ys, marker=".", ms=3, lw=1.0, label=name, color=f"C{i % 10}")
    ax.set_xlabel("time")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
