"""Figure rendering for the CLI report path.

Each command's figure is rendered from the same arrays that go into its CSV,
one PNG per command, written next to the delimited output.  Pure presentation:
nothing here feeds back into any computation.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_histogram_figure",
    "save_rate_figure",
    "save_trajectory_figure",
    "save_branches_figure",
    "save_sweep_figure",
]

ARM_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple")


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_histogram_figure(path, centers, gamma_phi, gamma):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(centers, gamma_phi, "o--", ms=3, lw=1, color="tab:blue")
    ax.set_xlabel("cumulative regret r")
    ax.set_ylabel(r"$\gamma\,\Phi^{\mathrm{sim}}(r)$")
    ax.set_title(f"empirical action, gamma={gamma:g}")
    _finish(fig, path)


def save_rate_figure(path, r, rate, converged):
    fig, ax = plt.subplots(figsize=(6, 4))
    ok = np.asarray(converged, dtype=bool)
    ax.plot(np.asarray(r)[ok], np.asarray(rate)[ok], "k-", lw=1.5, label="I(r)")
    if (~ok).any():
        for bad in np.asarray(r)[~ok]:
            ax.axvline(bad, color="tab:red", alpha=0.3, lw=0.8)
        ax.plot([], [], color="tab:red", alpha=0.5, label="not converged")
    ax.set_xlabel("cumulative regret r")
    ax.set_ylabel("rate function I(r)")
    ax.legend(frameon=False)
    _finish(fig, path)


def save_trajectory_figure(path, theory, sim, window):
    """theory: (t, per-arm muhat, per-arm n); sim: ConditionedStats or None."""
    t_grid, muhat_th, n_th = theory
    K = muhat_th.shape[0]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for k in range(K):
        color = ARM_COLORS[k % len(ARM_COLORS)]
        ax1.plot(t_grid, muhat_th[k], "-", color=color, label=f"arm {k + 1}")
        ax2.plot(t_grid, n_th[k], "-", color=color)
        if sim is not None and not sim.empty:
            ax1.errorbar(t_grid, sim.muhat_mean[k], yerr=sim.muhat_std[k],
                         fmt="o", ms=3, capsize=2, color=color, alpha=0.6)
            ax2.errorbar(t_grid, sim.n_mean[k], yerr=sim.n_std[k],
                         fmt="o", ms=3, capsize=2, color=color, alpha=0.6)
    ax1.set_xlabel("t")
    ax1.set_ylabel(r"$s_k^t / n_k^t$")
    ax2.set_xlabel("t")
    ax2.set_ylabel(r"$n_k^t$")
    ax1.legend(frameon=False)
    fig.suptitle(f"dominant trajectory, regret window [{window[0]:g}, {window[1]:g})")
    _finish(fig, path)


def save_branches_figure(path, rows):
    """rows: iterable of (r, branch_id, delta_s0, ir_hat, action)."""
    rows = list(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    ids = sorted({b for _, b, _, _, _ in rows})
    for b in ids:
        pts = [(r, a) for r, bid, _, _, a in rows if bid == b]
        ax.plot(*zip(*pts), "o", ms=4, label=f"branch {b + 1}")
    ax.set_xlabel("cumulative regret r")
    ax.set_ylabel(r"stationary action $\Phi^*$")
    ax.legend(frameon=False)
    _finish(fig, path)


def save_sweep_figure(path, c_values, r_mpv):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(c_values, r_mpv, "o-", color="tab:blue")
    ax.set_xlabel("exploration parameter c")
    ax.set_ylabel(r"most probable regret $r^{\mathrm{mpv}}$")
    _finish(fig, path)
