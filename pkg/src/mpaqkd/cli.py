"""Command-line front end.

One executable, five subcommands:

  oracle-table      analytic attack-performance table
  simulate          Monte Carlo protocol session with monitors
  sweep             correlation versus analyzer offset
  fs-test           polarimeter fair-sampling scan
  faked-state-demo  deterministic bright-pulse polarimeter response

Options beat config-file fields, which beat built-in defaults.  The output
directory comes from --out, else the MPAQKD_OUT_DIR environment variable,
else the working directory.  Every command writes a manifest whose config
echo can be fed back through --config to reproduce the run bit-exactly.
"""

import json
import math
import os
import sys

import click
import numpy as np

from . import figures, oracle, reports
from .countermeasures import (
    FS_BINS,
    FS_MIN_PULSES_PER_BIN,
    MODULATION_SIGMAS,
    analyze_monitors,
    faked_state_fs_demo,
    fs_oracle_rate,
    fs_verdict,
    run_fs_test,
)
from .errors import MpaqkdError
from .protocol import (
    PROTOCOLS,
    ProtocolConfig,
    estimate_chsh,
    pair_correlation,
    random_bit_padding_chsh,
    run_session,
)
from .source import DEFAULT_SEED, SourceConfig

ENV_OUT_DIR = "MPAQKD_OUT_DIR"

_MASK64 = (1 << 64) - 1

_SOURCE_KEYS = (
    "mode", "order_alice", "order_bob", "count_model", "mu",
    "alternating", "lambda_model", "lambda_step",
)


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise click.ClickException(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise click.ClickException(f"config {path} must hold a JSON object")
    return cfg


def _unknown_keys(cfg, allowed, where):
    return [
        f"unknown {where} key {key!r}" for key in sorted(cfg) if key not in allowed
    ]


def _fail_config(violations):
    click.echo("invalid configuration:", err=True)
    for problem in violations:
        click.echo(f"  - {problem}", err=True)
    sys.exit(2)


def _pick(flag, cfg, key, default):
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _parse_attack(value):
    """Accept 'N', 'N,M' or 'NxM'."""
    parts = value.replace("x", ",").split(",")
    try:
        numbers = [int(p) for p in parts]
    except ValueError:
        raise click.BadParameter(f"expected N or N,M with integers, got {value!r}")
    if len(numbers) == 1:
        return numbers[0], numbers[0]
    if len(numbers) == 2:
        return numbers[0], numbers[1]
    raise click.BadParameter(f"expected N or N,M, got {value!r}")


def _attack_callback(ctx, param, value):
    return None if value is None else _parse_attack(value)


def _build_source(cfg, attack, singlet, violations):
    src = dict(cfg.get("source", {})) if isinstance(cfg.get("source", {}), dict) else {}
    if not isinstance(cfg.get("source", {}), dict):
        violations.append("source must be a JSON object")
    violations.extend(_unknown_keys(src, _SOURCE_KEYS, "source"))
    src = {k: v for k, v in src.items() if k in _SOURCE_KEYS}
    if attack is not None and singlet:
        violations.append("--attack and --singlet are mutually exclusive")
    if attack is not None:
        src["mode"] = "mpa"
        src["order_alice"], src["order_bob"] = attack
    if singlet:
        src["mode"] = "singlet"
    sconfig = SourceConfig(**src)
    violations.extend(sconfig.violations())
    return sconfig


def _out_dir(out):
    directory = out or os.environ.get(ENV_OUT_DIR) or "."
    os.makedirs(directory, exist_ok=True)
    return directory


def _write_outputs(out_dir, command, config_echo, artifacts, summary):
    """Write the artifacts plus the run manifest; return all paths."""
    paths = []
    for name, kind, payload in artifacts:
        path = os.path.join(out_dir, name)
        if kind == "csv":
            header, rows = payload
            reports.write_csv(path, header, rows)
        elif kind == "json":
            reports.write_json(path, payload)
        else:  # pre-rendered file, payload wrote it already
            pass
        paths.append(path)
    manifest = reports.RunManifest(
        command=command, config=config_echo, outputs=paths, summary=summary
    )
    manifest_path = os.path.join(out_dir, f"{command.replace('-', '_')}_manifest.json")
    manifest.write(manifest_path)
    return paths + [manifest_path]


def common_options(f):
    f = click.option(
        "--config", "config_path",
        type=click.Path(exists=True, dir_okay=False), default=None,
        help="JSON config file; explicit flags override its fields.",
    )(f)
    f = click.option("--seed", type=click.IntRange(0, _MASK64), default=None,
                     help=f"RNG seed (default {DEFAULT_SEED:#x}).")(f)
    f = click.option("--trials", type=click.IntRange(1), default=None,
                     help="Number of emitted pulse pairs.")(f)
    f = click.option("--workers", type=click.IntRange(1), default=None,
                     help="Worker processes; results do not depend on it.")(f)
    f = click.option("--out", "out", type=click.Path(file_okay=False), default=None,
                     help=f"Output directory (or ${ENV_OUT_DIR}).")(f)
    f = click.option("--figures/--no-figures", "render_figures", default=True,
                     help="Also render quick-look PNG figures.")(f)
    return f


@click.group()
@click.version_option(package_name="mpaqkd", prog_name="mpaqkd")
def main():
    """Simulator and analytic oracle for multiple-photon-absorption attacks
    on entanglement-based key distribution."""


@main.command("oracle-table")
@common_options
@click.option("--orders", multiple=True,
              help="Attack order N,M; repeatable (default: 1,1 2,2 2,3 3,3).")
def cmd_oracle_table(config_path, seed, trials, workers, out, render_figures, orders):
    """Write the analytic performance table (no sampling involved).

    The table is exact quadrature, so --seed/--trials/--workers have no
    effect here; they are accepted for interface uniformity.
    """
    cfg = _load_config(config_path)
    violations = _unknown_keys(cfg, ("orders",), "config")
    pairs = [_parse_attack(o) for o in orders] or [
        tuple(o) for o in cfg.get("orders", oracle.TABLE_ORDERS)
    ]
    attacks = []
    for n, m in pairs:
        try:
            attacks.append(oracle.AttackOrder(int(n), int(m)))
        except MpaqkdError as exc:
            violations.append(str(exc))
    if violations:
        _fail_config(violations)

    table = oracle.performance_table(attacks)
    angles, curves = oracle.click_probability_curve()
    out_dir = _out_dir(out)

    artifacts = [
        ("oracle_table.csv", "csv", reports.oracle_table_rows(table)),
        ("oracle_table.json", "json", reports.oracle_table_dict(table)),
        ("click_probability.csv", "csv",
         reports.click_probability_rows(angles, curves)),
    ]
    if render_figures:
        fig_path = os.path.join(out_dir, "click_probability.png")
        figures.save_click_probability(angles, curves, fig_path)
        artifacts.append(("click_probability.png", "file", None))

    header = f"{'n':>2} {'m':>2} {'eta%':>7} {'S':>7} {'V':>6} {'QBER%':>6} {'Perr%':>7}"
    click.echo(header)
    for r in table:
        click.echo(
            f"{r.attack.n:>2} {r.attack.m:>2} {100 * r.eta:>7.2f} "
            f"{r.chsh:>7.4f} {r.visibility:>6.3f} {100 * r.qber:>6.2f} "
            f"{100 * r.p_error_emitted:>7.3f}"
        )

    config_echo = {"orders": [[a.n, a.m] for a in attacks]}
    summary = {"rows": len(table)}
    paths = _write_outputs(out_dir, "oracle-table", config_echo, artifacts, summary)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


def _session_configs(cfg, protocol, trials, seed, attack, singlet, efficiency,
                     workers, default_trials=1_000_000, extra_keys=()):
    """Shared flag/file/default merge for the sampling commands."""
    allowed = (
        "protocol", "trials", "seed", "workers", "detector_efficiency",
        "settings_alice", "settings_bob", "source",
    ) + tuple(extra_keys)
    violations = _unknown_keys(cfg, allowed, "config")

    protocol = _pick(protocol, cfg, "protocol", "ekert")
    trials = _pick(trials, cfg, "trials", default_trials)
    seed = _pick(seed, cfg, "seed", DEFAULT_SEED)
    workers = _pick(workers, cfg, "workers", 1)
    efficiency = _pick(efficiency, cfg, "detector_efficiency", 1.0)
    settings_alice = cfg.get("settings_alice")
    settings_bob = cfg.get("settings_bob")

    sconfig = _build_source(cfg, attack, singlet, violations)

    if protocol not in PROTOCOLS:
        violations.append(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
        _fail_config(violations)
    pconfig = ProtocolConfig(
        protocol=protocol,
        trials=int(trials),
        seed=int(seed),
        settings_alice=settings_alice,
        settings_bob=settings_bob,
        detector_efficiency=float(efficiency),
    )
    violations.extend(pconfig.violations())
    if violations:
        _fail_config(violations)
    return pconfig, sconfig, int(workers)


@main.command("simulate")
@common_options
@click.option("--protocol", type=click.Choice(PROTOCOLS), default=None,
              help="Analyzer-setting schedule (default ekert).")
@click.option("--attack", default=None, callback=_attack_callback,
              help="Photon orders N,M for the absorption attack source.")
@click.option("--singlet", is_flag=True, default=False,
              help="Use the faithful entangled source instead of the attack.")
@click.option("--efficiency", type=click.FloatRange(0.0, 1.0, min_open=True),
              default=None, help="Detector efficiency in (0, 1].")
def cmd_simulate(config_path, seed, trials, workers, out, render_figures,
                 protocol, attack, singlet, efficiency):
    """Run one protocol session and write counts, key stats, and monitors."""
    cfg = _load_config(config_path)
    pconfig, sconfig, n_workers = _session_configs(
        cfg, protocol, trials, seed, attack, singlet, efficiency, workers
    )

    stats = run_session(pconfig, sconfig, workers=n_workers)

    chsh_result = padded_result = None
    try:
        chsh_result = estimate_chsh(stats)
        padded_result = random_bit_padding_chsh(stats)
    except MpaqkdError as exc:
        click.echo(f"note: CHSH not estimated ({exc})", err=True)

    summary = reports.session_summary(stats, chsh_result, padded_result)
    verdict = analyze_monitors(stats)

    out_dir = _out_dir(out)
    artifacts = [
        ("session.csv", "csv", reports.session_csv_rows(stats)),
        ("session.json", "json", summary),
        ("monitors.json", "json", verdict.to_dict()),
    ]
    if "eve" in summary:
        artifacts.append(("eve.json", "json", summary["eve"]))
    if render_figures:
        figures.save_session_counts(stats, os.path.join(out_dir, "session_counts.png"))
        artifacts.append(("session_counts.png", "file", None))

    click.echo(f"trials {stats.trials}, sifted key {summary['key_length']} bits")
    if summary["qber"] is not None:
        click.echo(f"QBER {summary['qber']:.4f}")
    if chsh_result is not None:
        click.echo(f"S {chsh_result.value:.4f} +- {chsh_result.stderr:.4f}")
    if padded_result is not None:
        click.echo(
            f"S with random-bit padding {padded_result.value:.4f} "
            f"+- {padded_result.stderr:.4f}"
        )
    if "eve" in summary:
        click.echo(
            f"eavesdropper error per sifted bit {summary['eve']['per_sifted_error']:.4f}"
        )
    click.echo(f"monitor verdict: {verdict.verdict}")

    config_echo = reports.physics_config_dict(pconfig, sconfig)
    config_echo["workers"] = n_workers
    run_summary = {
        "qber": summary["qber"],
        "key_length": summary["key_length"],
        "chsh": None if chsh_result is None else chsh_result.value,
        "chsh_padded": None if padded_result is None else padded_result.value,
        "verdict": verdict.verdict,
    }
    paths = _write_outputs(out_dir, "simulate", config_echo, artifacts, run_summary)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


@main.command("sweep")
@common_options
@click.option("--attack", default=None, callback=_attack_callback,
              help="Photon orders N,M (default 2,2).")
@click.option("--singlet", is_flag=True, default=False,
              help="Sweep the faithful entangled source.")
@click.option("--points", type=click.IntRange(1), default=None,
              help="Grid size (default 33).")
@click.option("--delta-min", type=float, default=None,
              help="Smallest analyzer offset (default 0).")
@click.option("--delta-max", type=float, default=None,
              help="Largest analyzer offset (default pi).")
def cmd_sweep(config_path, seed, trials, workers, out, render_figures,
              attack, singlet, points, delta_min, delta_max):
    """Measure E(delta) on a grid of analyzer offsets, one session per point."""
    cfg = _load_config(config_path)
    extra = ("points", "delta_min", "delta_max")
    pconfig, sconfig, n_workers = _session_configs(
        cfg, None, trials, seed, attack, singlet, None, workers,
        default_trials=100_000, extra_keys=extra,
    )
    points = int(_pick(points, cfg, "points", 33))
    delta_min = float(_pick(delta_min, cfg, "delta_min", 0.0))
    delta_max = float(_pick(delta_max, cfg, "delta_max", math.pi))
    if delta_max < delta_min:
        _fail_config([f"delta_max {delta_max} is below delta_min {delta_min}"])

    grid = np.linspace(delta_min, delta_max, points)
    attack_order = None
    if sconfig.mode == "mpa":
        attack_order = oracle.AttackOrder(sconfig.order_alice, sconfig.order_bob)

    rows = []
    with click.progressbar(list(enumerate(grid)), label="sweep") as bar:
        for i, delta in bar:
            point_config = ProtocolConfig(
                protocol=pconfig.protocol,
                trials=pconfig.trials,
                seed=(pconfig.seed + i) & _MASK64,
                settings_alice=(0.0,),
                settings_bob=(float(delta),),
                detector_efficiency=pconfig.detector_efficiency,
            )
            stats = run_session(point_config, sconfig, workers=n_workers)
            pc = pair_correlation(stats, 0, 0)
            if attack_order is not None:
                e_oracle = oracle.correlation(attack_order, float(delta))
            else:
                e_oracle = -math.cos(2.0 * float(delta))
            rows.append(
                {
                    "delta": float(delta),
                    "E_mc": pc.value,
                    "E_oracle": float(e_oracle),
                    "stderr": pc.stderr,
                    "sum_coincidences": pc.coincidences,
                }
            )

    out_dir = _out_dir(out)
    artifacts = [("sweep.csv", "csv", reports.sweep_rows(rows))]
    if render_figures:
        figures.save_correlation_sweep(rows, os.path.join(out_dir, "sweep.png"))
        artifacts.append(("sweep.png", "file", None))

    config_echo = reports.physics_config_dict(pconfig, sconfig)
    for key in ("settings_alice", "settings_bob", "protocol"):
        config_echo.pop(key, None)
    config_echo.update(
        points=points, delta_min=delta_min, delta_max=delta_max, workers=n_workers
    )
    worst = max(abs(r["E_mc"] - r["E_oracle"]) for r in rows)
    summary = {"points": points, "max_abs_deviation": worst}
    paths = _write_outputs(out_dir, "sweep", config_echo, artifacts, summary)
    click.echo(f"max |E_mc - E_oracle| over the grid: {worst:.5f}")
    click.echo(f"wrote {len(paths)} files to {out_dir}")


@main.command("fs-test")
@common_options
@click.option("--attack", default=None, callback=_attack_callback,
              help="Photon orders N,M for the tested source (default 2,2).")
@click.option("--bins", type=click.IntRange(2), default=None,
              help=f"Angle bins over [0, pi/2) (default {FS_BINS}).")
@click.option("--phi", type=float, nargs=2, default=None,
              help="Polarimeter angles for the two channels (default 0 0).")
def cmd_fs_test(config_path, seed, trials, workers, out, render_figures,
                attack, bins, phi):
    """Scan the analyzer over random angles and fit the click-rate modulation."""
    cfg = _load_config(config_path)
    allowed = ("trials", "seed", "workers", "source", "bins", "phi")
    violations = _unknown_keys(cfg, allowed, "config")
    sconfig = _build_source(cfg, attack, False, violations)
    if sconfig.mode != "mpa":
        violations.append(
            "fs-test drives the attack source; pick orders with --attack "
            "(use --attack 1 for single photons)"
        )
    trials = int(_pick(trials, cfg, "trials", 2_000_000))
    seed = int(_pick(seed, cfg, "seed", DEFAULT_SEED))
    bins = int(_pick(bins, cfg, "bins", FS_BINS))
    phi = tuple(_pick(phi or None, cfg, "phi", (0.0, 0.0)))
    if len(phi) != 2:
        violations.append(f"phi needs exactly two angles, got {phi!r}")
    if trials < 1:
        violations.append(f"trials must be positive, got {trials}")
    if violations:
        _fail_config(violations)

    fs = run_fs_test(sconfig, trials, seed=seed, phi=phi, bins=bins)
    try:
        verdict = fs_verdict(fs)
    except MpaqkdError as exc:
        raise click.ClickException(str(exc))
    verdict.thresholds = {
        "modulation_sigmas": MODULATION_SIGMAS,
        "min_pulses_per_bin": FS_MIN_PULSES_PER_BIN,
    }
    oracle_rate = np.array(
        [fs_oracle_rate(fs.order, c - phi[0]) for c in fs.bin_centers]
    )

    out_dir = _out_dir(out)
    artifacts = [
        ("fs_test.csv", "csv", reports.fs_csv_rows(fs, oracle_rate)),
        ("fs_verdict.json", "json", verdict.to_dict()),
    ]
    if render_figures:
        figures.save_fs_modulation(fs, oracle_rate, os.path.join(out_dir, "fs_modulation.png"))
        artifacts.append(("fs_modulation.png", "file", None))

    click.echo(
        f"modulation amplitude {verdict.fs_modulation_amplitude:.5f} "
        f"+- {verdict.fs_modulation_sigma:.5f} (z = {verdict.fs_z:.1f})"
    )
    click.echo(f"verdict: {verdict.verdict}")

    config_echo = {
        "source": reports.source_config_dict(sconfig),
        "trials": trials,
        "seed": seed,
        "bins": bins,
        "phi": list(phi),
        "workers": int(_pick(workers, cfg, "workers", 1)),
    }
    summary = {"verdict": verdict.verdict, "z": verdict.fs_z}
    paths = _write_outputs(out_dir, "fs-test", config_echo, artifacts, summary)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


@main.command("faked-state-demo")
@common_options
@click.option("--intensity", type=float, default=None,
              help="Faked-pulse optical intensity (default 1.0).")
@click.option("--threshold", type=float, default=None,
              help="Detector blinding threshold (default 0.75).")
def cmd_faked_state_demo(config_path, seed, trials, workers, out, render_figures,
                         intensity, threshold):
    """Show how polarimeters break the detector-blinding faked-state attack.

    The response is deterministic, so --seed/--trials/--workers have no
    effect here.
    """
    cfg = _load_config(config_path)
    violations = _unknown_keys(cfg, ("intensity", "threshold"), "config")
    intensity = float(_pick(intensity, cfg, "intensity", 1.0))
    threshold = float(_pick(threshold, cfg, "threshold", 0.75))
    if intensity < 0:
        violations.append(f"intensity must be nonnegative, got {intensity}")
    if threshold <= 0:
        violations.append(f"threshold must be positive, got {threshold}")
    if violations:
        _fail_config(violations)

    demo = faked_state_fs_demo(intensity=intensity, threshold=threshold)
    header = ["basis_offset", "polarimeter_offset", "clicked_detectors", "pattern"]
    rows = [
        [r["basis_offset"], r["polarimeter_offset"],
         ";".join(r["clicked_detectors"]), r["pattern"]]
        for r in demo["rows"]
    ]

    click.echo(f"intensity {intensity}, threshold {threshold}")
    for r in demo["rows"]:
        detectors = ",".join(r["clicked_detectors"]) or "-"
        click.echo(
            f"basis offset {r['basis_offset']:.4f}, polarimeter offset "
            f"{r['polarimeter_offset']:.4f}: {r['pattern']} [{detectors}]"
        )
    click.echo(f"anomalous arrangements: {len(demo['anomalies'])} of {len(demo['rows'])}")

    out_dir = _out_dir(out)
    artifacts = [
        ("faked_state.csv", "csv", (header, rows)),
        ("faked_state.json", "json", demo),
    ]
    config_echo = {"intensity": intensity, "threshold": threshold}
    summary = {"anomalies": len(demo["anomalies"])}
    paths = _write_outputs(out_dir, "faked-state-demo", config_echo, artifacts, summary)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


if __name__ == "__main__":
    main()
