"""Figure rendering for the report path (PNG files next to the delimited output)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_trajectory(traj, path):
    """First-coordinate sample path."""
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(traj.states[:, 0], lw=0.6)
    ax.set_xlabel("step")
    ax.set_ylabel("x_1")
    ax.set_title(f"trajectory (n = {traj.n}, seed = {traj.seed})")
    return _save(fig, path)


def plot_density(axis, p_hat, p_true, path, title="innovation density estimate"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(axis, p_hat, label="estimate", lw=1.2)
    if p_true is not None:
        ax.plot(axis, p_true, label="true density", lw=1.0, ls="--")
    ax.set_xlabel("y")
    ax.set_ylabel("density")
    ax.legend()
    ax.set_title(title)
    return _save(fig, path)


def plot_convergence(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = np.asarray(report.n_values, dtype=float)
    ax.loglog(ns, report.sup_err_p, "o-", label=f"sup density err (slope {report.fitted_slope_p:.3f})")
    ax.loglog(ns, report.sup_err_f, "s-", label=f"sup drift err (slope {report.fitted_slope_f:.3f})")
    ax.loglog(ns, report.avg_pred_err, "^-", label=f"avg prediction err (slope {report.fitted_slope_pred:.3f})")
    ref = report.avg_pred_err[0] * (ns / ns[0]) ** report.predicted_slope_pred
    ax.loglog(ns, ref, ":", color="gray", label=f"predicted n^{report.predicted_slope_pred:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.set_title("convergence study")
    return _save(fig, path)


def plot_clt(report, path):
    q = report.z_values.shape[1]
    fig, axes = plt.subplots(1, q, figsize=(4 * q, 3.2), squeeze=False)
    for j in range(q):
        ax = axes[0, j]
        z = report.z_values[:, j]
        sd = float(np.sqrt(report.theory_var[j]))
        ax.hist(z, bins=30, density=True, alpha=0.6)
        grid = np.linspace(z.min(), z.max(), 200)
        ax.plot(grid, np.exp(-grid**2 / (2 * sd**2)) / (sd * np.sqrt(2 * np.pi)), "r-")
        ax.set_title(
            f"y = {np.round(report.y_points[j], 3).tolist()}  "
            f"KS {report.ks_distance[j]:.3f}",
            fontsize=9,
        )
    fig.suptitle("normalized density deviations vs limiting normal law", fontsize=10)
    return _save(fig, path)


def plot_stationary(sd, path, oracle=None):
    axis = sd.grid.axis(0)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(axis, sd.values, label=f"fixed point ({sd.iterations} sweeps)")
    if oracle is not None:
        ax.plot(axis, oracle, "--", label="closed form")
    ax.set_xlabel("x")
    ax.set_ylabel("stationary density")
    ax.legend()
    ax.set_title("invariant state density")
    return _save(fig, path)


def plot_prediction_error(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = np.asarray(report.n_values, dtype=float)
    ax.loglog(ns, report.avg_pred_err, "o-", label="average prediction error")
    ax.loglog(ns, np.maximum(report.inside_term, 1e-300), "s-", label="inside-ball term")
    ax.loglog(ns, np.maximum(report.outside_term, 1e-300), "^-", label="outside-ball term")
    ax.set_xlabel("n")
    ax.set_ylabel("term value")
    ax.legend(fontsize=8)
    ax.set_title("prediction-error decomposition")
    return _save(fig, path)
