"""Figure rendering for run reports.

Every function takes plain data plus a target path, draws with the Agg
backend, and returns the written path. Output is deterministic for identical
inputs: fixed figure geometry, no timestamps in the image metadata.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

Curve = Sequence[tuple[float, float]]


def _save(fig, path: "str | Path") -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return out


def save_energy_cdf(curves: Sequence[tuple[str, Curve]], path: "str | Path",
                    title: str = "sampled energy CDF") -> Path:
    """Step plot of cumulative shot fraction versus energy, one labeled curve
    per sample set."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, cdf in curves:
        xs = [e for e, _ in cdf]
        ys = [f for _, f in cdf]
        ax.step(xs, ys, where="post", label=label)
    ax.set_xlabel("energy")
    ax.set_ylabel("cumulative fraction")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def save_training_trace(traces: Sequence[tuple[str, Curve]],
                        path: "str | Path") -> Path:
    """Best-so-far objective value versus evaluation index."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, trace in traces:
        ax.plot([i for i, _ in trace], [v for _, v in trace], label=label)
    ax.set_xlabel("objective evaluation")
    ax.set_ylabel("best energy so far")
    ax.set_title("training convergence")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def save_noise_trend(lambdas: Sequence[float],
                     series: Sequence[tuple[str, Sequence[float]]],
                     path: "str | Path",
                     ylabel: str = "best-fraction mean energy") -> Path:
    """Metric versus two-qubit depolarizing rate on a log-x axis."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, values in series:
        ax.semilogx(lambdas, values, marker="o", label=label)
    ax.set_xlabel("two-qubit depolarizing rate")
    ax.set_ylabel(ylabel)
    ax.set_title("noise sensitivity")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def save_truncation_sweep(ks: Sequence[int],
                          series: Sequence[tuple[str, Sequence[float]]],
                          path: "str | Path",
                          ylabel: str = "approximation ratio") -> Path:
    """Metric versus retained SWAP layers, one curve per circuit depth."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, values in series:
        ax.plot(ks, values, marker="o", label=label)
    ax.set_xlabel("swap layers k")
    ax.set_ylabel(ylabel)
    ax.set_title("truncation sweep")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
