"""Figure rendering for solve traces and rate fits (headless backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _positive_or_nan(values):
    arr = np.asarray(values, dtype=float).copy()
    arr[arr <= 0.0] = np.nan
    return arr


def save_convergence_figure(k, f, v, step_norm, path) -> None:
    """Objective on top, step norms and violation on a log axis below."""
    fig, (ax_f, ax_log) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    ax_f.plot(k, f, marker=".", color="tab:blue")
    ax_f.set_ylabel("objective")
    ax_f.grid(True, alpha=0.3)
    ax_log.semilogy(k, _positive_or_nan(step_norm), marker=".", label="step norm")
    ax_log.semilogy(k, _positive_or_nan(v), marker=".", label="violation")
    ax_log.set_xlabel("iteration")
    ax_log.set_ylabel("magnitude")
    ax_log.grid(True, alpha=0.3)
    ax_log.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_rate_figure(k, errors, fit, path) -> None:
    """Log-scale error sequence with the fitted geometric envelope."""
    k = np.asarray(k, dtype=float)
    positions = np.arange(len(k), dtype=float)
    fitted = fit.q1 * fit.q0**positions
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(k, _positive_or_nan(errors), marker="o", linestyle="none", label="error")
    ax.semilogy(
        k,
        fitted,
        color="tab:red",
        label=f"fit q0={fit.q0:.4g}, r2={fit.r_squared:.4g}",
    )
    ax.set_xlabel("iteration")
    ax.set_ylabel("distance to final iterate")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
