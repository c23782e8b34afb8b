"""CSV loading, schema checks, and the figure builders.

Each figure kind declares the columns it needs; anything else in the
file is ignored. Rendering never writes back to the input.
"""

import csv

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


class MissingColumnsError(Exception):
    """Input CSV lacks columns the requested figure kind needs."""

    def __init__(self, kind, missing, present):
        self.kind = kind
        self.missing = tuple(missing)
        self.present = tuple(present)
        super().__init__(
            f"kind {kind!r} needs columns {', '.join(self.missing)}; "
            f"file has {', '.join(self.present) or '(none)'}"
        )


def load_table(path):
    """Read a CSV with a header row into {column: float ndarray}."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        fields = list(reader.fieldnames or [])
        rows = list(reader)
    table = {}
    for name in fields:
        values = [row[name] for row in rows]
        try:
            table[name] = np.array([float(v) for v in values])
        except (TypeError, ValueError):
            table[name] = np.array(values, dtype=object)
    return table


def _require(table, kind, names):
    missing = [n for n in names if n not in table]
    if missing:
        raise MissingColumnsError(kind, missing, sorted(table))


def _correlation_curves(table):
    _require(table, "correlation_curves", ("delta", "E_mc", "E_oracle", "stderr"))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.errorbar(
        table["delta"], table["E_mc"], yerr=table["stderr"],
        fmt="o", ms=3, capsize=2, label="Monte Carlo",
    )
    ax.plot(table["delta"], table["E_oracle"], "-", lw=1.2, label="analytic")
    ax.set_xlabel("analyzer separation (rad)")
    ax.set_ylabel("correlation E")
    ax.axhline(0.0, color="0.8", lw=0.8, zorder=0)
    ax.legend(frameon=False)
    return fig


def _click_probability(table):
    _require(table, "click_probability", ("angle",))
    orders = sorted(n for n in table if n.startswith("p_click_"))
    if not orders:
        raise MissingColumnsError("click_probability", ["p_click_<order>"], sorted(table))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name in orders:
        ax.plot(table["angle"], table[name], lw=1.3,
                label=name.replace("p_click_", "order "))
    ax.set_xlabel("polarization offset (rad)")
    ax.set_ylabel("click probability")
    ax.set_ylim(0.0, 1.05)
    ax.legend(frameon=False)
    return fig


def _fs_modulation(table):
    _require(
        table, "fs_modulation",
        ("bin_center", "pulses", "clicks_pol0", "clicks_pol1", "rate_oracle"),
    )
    centers = table["bin_center"]
    pulses = np.maximum(table["pulses"], 1.0)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for pol, marker in ((0, "o"), (1, "s")):
        rate = table[f"clicks_pol{pol}"] / pulses
        sigma = np.sqrt(np.maximum(rate * (1.0 - rate), 1e-12) / pulses)
        ax.errorbar(centers, rate, yerr=sigma, fmt=marker, ms=3, capsize=2,
                    label=f"polarimeter {pol}")
    ax.plot(centers, table["rate_oracle"], "-", lw=1.2, label="expected")
    ax.set_xlabel("polarimeter rotation (rad)")
    ax.set_ylabel("click rate")
    ax.legend(frameon=False)
    return fig


def _performance_bar(table):
    _require(table, "performance_bar", ("n", "m", "eta", "S", "V", "qber"))
    labels = [f"({int(n)},{int(m)})" for n, m in zip(table["n"], table["m"])]
    x = np.arange(len(labels))
    panels = [
        ("eta", "detection efficiency", 1.0),
        ("S", "CHSH value", None),
        ("V", "visibility", 1.0),
        ("qber", "QBER", None),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(7.6, 5.4))
    for ax, (column, title, top) in zip(axes.flat, panels):
        ax.bar(x, table[column], width=0.6, color="#4878a8")
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_title(title, fontsize=10)
        if top is not None:
            ax.set_ylim(0.0, top * 1.05)
        if column == "S":
            ax.axhline(2.0, color="0.4", lw=0.8, ls="--")
    fig.suptitle("attack performance by absorption orders (n,m)")
    fig.tight_layout()
    return fig


KINDS = {
    "correlation_curves": _correlation_curves,
    "click_probability": _click_probability,
    "fs_modulation": _fs_modulation,
    "performance_bar": _performance_bar,
}


def render_kind(kind, table):
    """Build the matplotlib figure for `kind` from a loaded table."""
    return KINDS[kind](table)


def save_figure(fig, path):
    # fixed metadata keeps repeated renders byte-identical even across
    # matplotlib patch versions
    fig.savefig(path, dpi=120, metadata={"Software": "mpafig"})
    plt.close(fig)
