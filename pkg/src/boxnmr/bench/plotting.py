"""Render a performance profile to an image file."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .tables import PerformanceProfile  # noqa: E402


def plot_profile(profile: PerformanceProfile, path, title: str | None = None) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    for m in profile.methods:
        ax.step(profile.tau, profile.curves[m], where="post", linewidth=2, label=m)
    ax.set_xscale("log", base=2)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$\Gamma(\tau)$")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="lower right")
    ax.set_title(title or f"Performance profile ({len(profile.problems)} problems)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
