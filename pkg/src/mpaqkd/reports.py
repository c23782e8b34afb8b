"""Delimited and JSON report writers shared by the command-line tools.

Conventions: comma separator, '.' decimal point, one header row, LF line
endings, floats at 12 significant digits.  JSON is written with sorted keys
and no volatile fields, so identical statistics serialize to identical
bytes.
"""

import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata

import numpy as np

from . import eve as eve_mod

FLOAT_DIGITS = 12


def fmt(value):
    """Render one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{FLOAT_DIGITS}g}"
    return str(value)


def write_csv(path, header, rows):
    """Write rows of cells with the package CSV conventions."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(cell) for cell in row) + "\n")


def jsonable(obj):
    """Recursively convert numpy scalars/arrays for json.dump."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else f
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def oracle_table_rows(reports):
    header = [
        "n", "m", "eta", "S", "V", "qber",
        "p_error_emitted", "p_error_sifted", "sum_visibility",
    ]
    rows = [
        [
            r.attack.n, r.attack.m, r.eta, r.chsh, r.visibility, r.qber,
            r.p_error_emitted, r.p_error_sifted, r.sum_visibility,
        ]
        for r in reports
    ]
    return header, rows


def oracle_table_dict(reports):
    return {
        "rows": [
            {
                "n": r.attack.n,
                "m": r.attack.m,
                "eta": r.eta,
                "eta_alice": r.eta_alice,
                "eta_bob": r.eta_bob,
                "S": r.chsh,
                "V": r.visibility,
                "qber": r.qber,
                "p_error_emitted": r.p_error_emitted,
                "p_error_sifted": r.p_error_sifted,
                "sum_visibility": r.sum_visibility,
            }
            for r in reports
        ]
    }


def session_csv_rows(stats):
    header = [
        "thetaA", "thetaB", "N00", "N01", "N10", "N11",
        "singles", "discards", "doubles",
    ]
    rows = []
    for ia, ta in enumerate(stats.pconfig.settings_alice):
        for ib, tb in enumerate(stats.pconfig.settings_bob):
            n = stats.coincidences(ia, ib)
            rows.append(
                [
                    ta, tb,
                    int(n[0, 0]), int(n[0, 1]), int(n[1, 0]), int(n[1, 1]),
                    stats.singles_only(ia, ib),
                    stats.no_clicks(ia, ib),
                    stats.doubles(ia, ib),
                ]
            )
    return header, rows


def source_config_dict(sconfig):
    return {
        "mode": sconfig.mode,
        "order_alice": sconfig.order_alice,
        "order_bob": sconfig.order_bob,
        "count_model": sconfig.count_model,
        "mu": sconfig.mu,
        "alternating": sconfig.alternating,
        "lambda_model": sconfig.lambda_model,
        "lambda_step": sconfig.lambda_step,
    }


def physics_config_dict(pconfig, sconfig):
    """The part of the configuration that determines the statistics."""
    return {
        "protocol": pconfig.protocol,
        "trials": pconfig.trials,
        "seed": pconfig.seed,
        "settings_alice": list(pconfig.settings_alice),
        "settings_bob": list(pconfig.settings_bob),
        "detector_efficiency": pconfig.detector_efficiency,
        "source": source_config_dict(sconfig),
    }


def session_summary(stats, chsh_result=None, padded_result=None):
    """Stable JSON summary of a session (no timestamps, no worker counts)."""
    pairs = []
    for ia, ta in enumerate(stats.pconfig.settings_alice):
        for ib, tb in enumerate(stats.pconfig.settings_bob):
            n = stats.coincidences(ia, ib)
            pairs.append(
                {
                    "theta_alice": ta,
                    "theta_bob": tb,
                    "trials": stats.pair_trials(ia, ib),
                    "coincidences": [[int(n[0, 0]), int(n[0, 1])], [int(n[1, 0]), int(n[1, 1])]],
                    "singles_only": stats.singles_only(ia, ib),
                    "no_clicks": stats.no_clicks(ia, ib),
                    "doubles": stats.doubles(ia, ib),
                }
            )
    qber = None
    if stats.key_alice.size:
        qber = float(np.mean(stats.key_alice != stats.key_bob))
    summary = {
        "config": physics_config_dict(stats.pconfig, stats.sconfig),
        "pairs": pairs,
        "key_length": int(stats.key_alice.size),
        "qber": qber,
        "doubles_total": stats.doubles_total(),
        "chsh": None,
        "chsh_padded": None,
    }
    for name, result in (("chsh", chsh_result), ("chsh_padded", padded_result)):
        if result is not None:
            summary[name] = {
                "S": result.value,
                "stderr": result.stderr,
                "pairs": [
                    {
                        "theta_alice": pc.theta_alice,
                        "theta_bob": pc.theta_bob,
                        "E": pc.value,
                        "stderr": pc.stderr,
                        "coincidences": pc.coincidences,
                        "detected_fraction": pc.detected_fraction,
                    }
                    for pc in result.pairs
                ],
            }
    if stats.eve_tally is not None:
        summary["eve"] = eve_mod.report_dict(eve_mod.eve_error_rates(stats))
    return summary


def sweep_rows(points):
    """Rows for the correlation sweep CSV.

    ``points`` yields dicts with delta, E_mc, E_oracle, stderr,
    sum_coincidences.
    """
    header = ["delta", "E_mc", "E_oracle", "stderr", "sum_coincidences"]
    rows = [
        [p["delta"], p["E_mc"], p["E_oracle"], p["stderr"], p["sum_coincidences"]]
        for p in points
    ]
    return header, rows


def fs_csv_rows(fs, oracle_rate):
    header = [
        "bin_center", "pulses", "clicks_pol0", "clicks_pol1",
        "multiclicks", "rate_oracle",
    ]
    rows = []
    for i, c in enumerate(fs.bin_centers):
        rows.append(
            [
                float(c),
                int(fs.pulses[i]),
                int(fs.pol_clicks[i, 0]),
                int(fs.pol_clicks[i, 1]),
                int(fs.multi_clicks[i]),
                float(oracle_rate[i]),
            ]
        )
    return header, rows


def click_probability_rows(angles, curves):
    orders = sorted(curves)
    header = ["angle"] + [f"p_click_{n}" for n in orders]
    rows = [
        [float(angles[i])] + [float(curves[n][i]) for n in orders]
        for i in range(len(angles))
    ]
    return header, rows


@dataclass
class RunManifest:
    """Audit record for one command invocation."""

    command: str
    config: dict
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def write(self, path):
        try:
            version = metadata.version("mpaqkd")
        except metadata.PackageNotFoundError:
            version = "unknown"
        payload = {
            "command": self.command,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "package_version": version,
            "numpy_version": np.__version__,
            "config": self.config,
            "outputs": [os.fspath(p) for p in self.outputs],
            "summary": self.summary,
        }
        write_json(path, payload)
        return payload
