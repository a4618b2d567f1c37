"""Report figures written next to the CSV/JSON outputs (headless Agg backend)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps or version strings, so reruns give identical files
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def trajectory_figure(history, diagnostics, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(history.r[:, 1], history.r[:, 2], lw=1)
    ax1.set_xlabel("x")
    ax1.set_ylabel("y")
    ax1.set_aspect("equal", adjustable="datalim")
    ax1.set_title("orbit")
    d = diagnostics.arrays()
    ax2.plot(history.s, history.u[:, 0], lw=1, label="u^0")
    ax2.set_xlabel("s")
    ax2.set_ylabel("u^0")
    ax2b = ax2.twinx()
    ax2b.plot(d["s"], d["self_force"], lw=0.8, color="tab:red", label="|G|")
    ax2b.set_ylabel("|G|")
    ax2.set_title("energy and self-force")
    fig.tight_layout()
    return _save(fig, path)


def sweep_figure(result, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for model, errs in result.errors.items():
        ax.loglog(result.sigmas, errs, "o-", label=f"{model} (slope {result.slopes[model]:.3f})")
    ax.set_xlabel("sigma")
    ax.set_ylabel("relative error vs exact")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def liouville_figure(s, det, path, s_div=None, div_integral=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(s, np.log(np.abs(det)), "o-", label="ln |det J|")
    if s_div is not None:
        ax.plot(s_div, div_integral, "-", lw=1, label="integrated divergence")
    ax.set_xlabel("s")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def residual_figure(residuals, path):
    z = np.concatenate([residuals.continuity_z.ravel(), residuals.momentum_z.ravel()])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.hist(z[np.isfinite(z)], bins=21, range=(-4, 4))
    ax.axvline(-3, color="k", ls=":")
    ax.axvline(3, color="k", ls=":")
    ax.set_xlabel("residual z-score")
    ax.set_ylabel("bins")
    fig.tight_layout()
    return _save(fig, path)
