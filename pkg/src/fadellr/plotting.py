"""Figure rendering for the CLI report paths.

Each report subcommand can save a PNG next to its CSV; the CSV remains
the primary output and these helpers never run unless --plot is given.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_llr_table(rows, header, path, kind):
    """LLR-vs-output curves; for 2-D tables plots the y_i = 0 cut."""
    cols = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if header[1] == "y_i":
        cut = np.isclose(cols[:, 1], cols[np.argmin(np.abs(cols[:, 1])), 1])
        x = cols[cut, 0]
        ys = cols[cut, 2:]
        labels = header[2:]
        ax.set_xlabel("$y_r$ (at $y_i \\approx 0$)")
    else:
        x = cols[:, 0]
        ys = cols[:, 1:]
        labels = header[1:]
        ax.set_xlabel("channel output $y$")
    order = np.argsort(x)
    for j, lab in enumerate(labels):
        ax.plot(x[order], ys[order, j], label=lab)
    ax.set_ylabel("LLR")
    ax.set_title(kind)
    ax.grid(True, alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_density(centers, mass, path, title):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(centers, np.maximum(mass, 1e-300))
    ax.set_xlabel("LLR")
    ax.set_ylabel("probability mass")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_ber(records, path, title):
    fig, ax = plt.subplots(figsize=(6, 4))
    snr = [r.snr_db for r in records]
    ber = [max(r.ber, 1e-12) for r in records]
    fer = [max(r.fer, 1e-12) for r in records]
    ax.semilogy(snr, ber, "o-", label="BER")
    ax.semilogy(snr, fer, "s--", label="FER")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("error rate")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)
