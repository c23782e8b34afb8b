"""Quick-look figures rendered next to the delimited output.

matplotlib is imported lazily and forced onto the Agg backend so the
command-line tools work on headless machines.  These plots are meant for a
fast visual sanity check of a run; the standalone renderer package makes
the publication-style versions from the same CSV files.
"""

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def save_correlation_sweep(points, path):
    """Measured and analytic E versus analyzer offset."""
    plt = _pyplot()
    delta = np.array([p["delta"] for p in points])
    e_mc = np.array([p["E_mc"] for p in points])
    e_or = np.array([p["E_oracle"] for p in points])
    err = np.array([p["stderr"] for p in points])

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.errorbar(delta, e_mc, yerr=err, fmt="o", ms=3, capsize=2,
                label="simulated", zorder=3)
    ax.plot(delta, e_or, "-", lw=1.2, label="analytic", zorder=2)
    ax.set_xlabel("analyzer offset (rad)")
    ax.set_ylabel("correlation E")
    ax.set_ylim(-1.05, 1.05)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_session_counts(stats, path):
    """Coincidence counts per setting pair as grouped bars."""
    plt = _pyplot()
    labels = []
    counts = {"N00": [], "N01": [], "N10": [], "N11": []}
    for ia, ta in enumerate(stats.pconfig.settings_alice):
        for ib, tb in enumerate(stats.pconfig.settings_bob):
            labels.append(f"({ta:.3f},{tb:.3f})")
            n = stats.coincidences(ia, ib)
            counts["N00"].append(n[0, 0])
            counts["N01"].append(n[0, 1])
            counts["N10"].append(n[1, 0])
            counts["N11"].append(n[1, 1])

    x = np.arange(len(labels))
    width = 0.2
    fig, ax = plt.subplots(figsize=(max(6.4, 1.1 * len(labels)), 4.0))
    for i, (name, values) in enumerate(counts.items()):
        ax.bar(x + (i - 1.5) * width, values, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("coincidences")
    ax.set_xlabel("(thetaA, thetaB)")
    ax.legend(ncol=4, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_fs_modulation(fs, oracle_rate, path):
    """Per-bin click rates of the source test against the analytic curve."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for pol in (0, 1):
        rate = fs.rates(pol)
        sigma = np.sqrt(np.maximum(rate * (1.0 - rate), 1e-12) / fs.pulses)
        ax.errorbar(fs.bin_centers, rate, yerr=sigma, fmt="o", ms=3,
                    capsize=2, label=f"polarimeter {pol}")
    ax.plot(fs.bin_centers, oracle_rate, "-", lw=1.2, label="analytic")
    ax.set_xlabel("test angle (rad)")
    ax.set_ylabel("click rate")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_click_probability(angles, curves, path):
    """Single-pulse click probability versus analyzer angle per order."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for order in sorted(curves):
        ax.plot(angles, curves[order], lw=1.2, label=f"{order} photons")
    ax.set_xlabel("lambda + theta (rad)")
    ax.set_ylabel("click probability")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
