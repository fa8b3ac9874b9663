"""``lcmpc`` command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import subprocess
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .analysis import (
    DEFAULT_MAX_ORDER,
    EN50160_VOLTAGE_THD_LIMIT,
    UndefinedTHD,
    harmonic_spectrum,
    samples_per_period,
    thd_report,
)
from .config import ConfigError, dump_config, load_config, resolve_config
from .grid_model import predicted_thd
from .normal_forms import (
    HopfParams,
    LimitCycleParams,
    OverflowDetected,
    hopf_trajectory,
    iterate_trajectory,
    portrait_seeds,
)
from .simulator import Bootstrap, Mode, final_period_signals, run_closed_loop
from .validation import DEFAULT_SEED, SUITES, run_suite

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunManifest:
    config_path: str | None
    out_dir: str
    command: list
    version: str
    timings_s: dict = dataclasses.field(default_factory=dict)
    started_utc: str = ""

    def write(self, out_dir: Path) -> None:
        (out_dir / "manifest.json").write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n")


def version_string() -> str:
    """``git describe``-style version, falling back to the installed package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _manifest(args, out_dir: Path, config_path=None) -> RunManifest:
    return RunManifest(config_path=config_path, out_dir=str(out_dir),
                       command=["lcmpc"] + list(args._argv), version=version_string(),
                       started_utc=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))


def _spectra_csv(signals: dict, f: float, tau: float, max_order: int) -> str:
    spectra = {name: harmonic_spectrum(s, f, tau, max_order) for name, s in signals.items()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["order", "freq_hz"]
    for name in spectra:
        header += [f"{name}_amplitude", f"{name}_phase_rad"]
    w.writerow(header)
    for n in range(1, max_order + 1):
        row = [n, repr(n * f)]
        for sp in spectra.values():
            row += [f"{sp.amplitudes[n]:.17g}", f"{sp.phases[n]:.17g}"]
        w.writerow(row)
    return buf.getvalue()


def _thd_or_nan(rep, name):
    for s in rep.signals:
        if s.name == name:
            return s.thd_percent
    return math.nan


def cmd_simulate(args) -> int:
    if not args.config:
        raise UsageError("simulate needs --config")
    try:
        text, source = resolve_config(args.config)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}") from None
    cfg = load_config(text, source)
    if args.bootstrap:
        cfg = dataclasses.replace(cfg, bootstrap=Bootstrap(args.bootstrap))
    modes = [Mode.UNCOMPENSATED, Mode.COMPENSATED] if args.mode == "both" else [Mode(args.mode)]
    if len(modes) == 1:
        cfg = dataclasses.replace(cfg, mode=modes[0])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, out, source)
    (out / "effective.cfg").write_text(dump_config(cfg))

    spp = cfg.samples_per_period
    limits = {"v_c": EN50160_VOLTAGE_THD_LIMIT}
    reports = {}
    for mode in modes:
        run_cfg = dataclasses.replace(cfg, mode=mode)
        t0 = time.perf_counter()
        log = run_closed_loop(run_cfg)
        manifest.timings_s[f"simulate_{mode.value}"] = time.perf_counter() - t0
        tag = mode.value
        (out / f"log_{tag}.csv").write_text(log.to_csv())
        if mode is Mode.COMPENSATED:
            (out / f"periods_{tag}.csv").write_text(log.periods_csv())
        sig = final_period_signals(log, spp)
        signals = {"v_c": sig["v_c"], "i_l": sig["i_l"]}
        (out / f"spectra_{tag}.csv").write_text(
            _spectra_csv(signals, cfg.grid.f, cfg.tau, DEFAULT_MAX_ORDER))
        rep = thd_report(signals, cfg.grid.f, cfg.tau, DEFAULT_MAX_ORDER, limits)
        (out / f"thd_{tag}.csv").write_text(rep.to_csv())
        (out / f"thd_{tag}.txt").write_text(rep.to_text() + "\n")
        reports[mode] = rep
        n_fallback = sum(p.fallback for p in log.periods)
        if n_fallback:
            print(f"warning: {n_fallback} period(s) fell back to the warm start", file=sys.stderr)

    oracle = predicted_thd(cfg.grid, cfg.disturbance)
    lines = [f"{'signal':<8}{'phasor oracle %':>17}{'uncompensated %':>17}{'compensated %':>15}"]
    for name in ("v_c", "i_l"):
        u = reports.get(Mode.UNCOMPENSATED)
        c = reports.get(Mode.COMPENSATED)
        uc = f"{_thd_or_nan(u, name):.3f}" if u else "-"
        cc = f"{_thd_or_nan(c, name):.3f}" if c else "-"
        lines.append(f"{name:<8}{oracle[name]:>17.3f}{uc:>17}{cc:>15}")
    summary = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    manifest.write(out)
    return EXIT_OK


def _write_trajectories(path: Path, trajectories) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["traj_id", "k", "x1", "x2"])
        for tid, traj in enumerate(trajectories):
            for k, (x1, x2) in enumerate(traj):
                w.writerow([tid, k, f"{x1:.17g}", f"{x2:.17g}"])


def cmd_phase_portrait(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, out)
    t0 = time.perf_counter()
    if args.log:
        path = Path(args.log)
        if not path.is_file():
            raise UsageError(f"log file not found: {args.log}")
        data = np.genfromtxt(path, delimiter=",", names=True)
        missing = {"xt1", "xt2"} - set(data.dtype.names or ())
        if missing:
            raise UsageError(f"{args.log} lacks columns {sorted(missing)}")
        trajs = [np.column_stack([data["xt1"], data["xt2"]])]
        name = "portrait_log.csv"
    elif args.hopf:
        p = HopfParams(alpha_c=args.alpha_c, mu_c=args.mu_c, omega=args.omega)
        rho = math.sqrt(p.mu_c)
        seeds = [np.array([r * math.cos(a), r * math.sin(a)])
                 for r in (0.1, 0.5 * rho, 2.0 * rho)
                 for a in np.linspace(0, 2 * math.pi, args.angles, endpoint=False)]
        trajs = [hopf_trajectory(s, p, args.t_final, args.steps + 1) for s in seeds]
        name = "portrait_hopf.csv"
    else:
        lc = LimitCycleParams.from_frequency(args.mu, args.alpha, 2 * math.pi * args.f, args.tau)
        trajs = []
        for s in portrait_seeds(lc, args.angles):
            try:
                trajs.append(iterate_trajectory(s, lc, args.steps))
            except OverflowDetected as exc:
                trajs.append(exc.trajectory)
        name = "portrait_map.csv"
    _write_trajectories(out / name, trajs)
    manifest.timings_s["phase_portrait"] = time.perf_counter() - t0
    manifest.write(out)
    final = np.array([np.hypot(*t[-1]) for t in trajs])
    print(f"wrote {len(trajs)} trajectories to {out / name}; "
          f"final radius range [{final.min():.6g}, {final.max():.6g}]")
    return EXIT_OK


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    checks = run_suite(args.suite, args.seed)
    for c in checks:
        print(c.line())
    n_fail = sum(not c.passed for c in checks)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed "
          f"(seed {args.seed}, {time.perf_counter() - t0:.1f} s)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        m = _manifest(args, out)
        m.timings_s["validate"] = time.perf_counter() - t0
        m.write(out)
    return EXIT_OK if n_fail == 0 else EXIT_CHECK


def cmd_thd(args) -> int:
    path = Path(args.csv)
    if not path.is_file():
        raise UsageError(f"CSV not found: {args.csv}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = [s.strip() for s in args.signals.split(",") if s.strip()]
    missing = [s for s in names if s not in (data.dtype.names or ())]
    if missing:
        raise UsageError(f"{args.csv} lacks columns {missing}")
    spp = samples_per_period(args.f, args.tau)
    if data.size < spp + 1:
        raise UsageError("log shorter than one fundamental period")
    end = data.size - 1  # the last sample opens a new period
    signals = {s: np.asarray(data[s])[end - spp:end] for s in names}
    if args.limit is not None:
        limits = {s: args.limit for s in names}
    else:
        limits = {"v_c": EN50160_VOLTAGE_THD_LIMIT}
    try:
        rep = thd_report(signals, args.f, args.tau, args.max_order, limits)
    except UndefinedTHD as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    print(rep.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "thd_report.csv").write_text(rep.to_csv())
        (out / "thd_report.txt").write_text(rep.to_text() + "\n")
        _manifest(args, out).write(out)
    return rep.exit_code()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcmpc", description="Limit cycle MPC harmonic compensation")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the uncompensated and compensated scenarios")
    s.add_argument("--config", help="scenario file, or the name of a bundled one (paper.cfg)")
    s.add_argument("--out", default="out")
    s.add_argument("--mode", choices=["both", "compensated", "uncompensated"], default="both")
    s.add_argument("--bootstrap", choices=[b.value for b in Bootstrap])
    s.set_defaults(func=cmd_simulate)

    p = sub.add_parser("phase-portrait", help="trajectory CSVs of the normal forms or a log")
    p.add_argument("--out", default="out")
    p.add_argument("--log", help="simulation log CSV; plots its normal-form states")
    p.add_argument("--hopf", action="store_true", help="continuous Hopf form instead of the map")
    p.add_argument("--mu", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=-0.05)
    p.add_argument("--f", type=float, default=50.0)
    p.add_argument("--tau", type=float, default=2e-4)
    p.add_argument("--mu-c", type=float, default=1.0)
    p.add_argument("--alpha-c", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--t-final", type=float, default=20.0)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--angles", type=int, default=16)
    p.set_defaults(func=cmd_phase_portrait)

    v = sub.add_parser("validate", help="run oracle and property suites")
    v.add_argument("suite", choices=list(SUITES) + ["all"])
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("thd", help="THD of the final period of a log CSV")
    t.add_argument("csv")
    t.add_argument("--signals", default="v_c,i_l")
    t.add_argument("--f", type=float, default=50.0)
    t.add_argument("--tau", type=float, default=2e-4)
    t.add_argument("--max-order", type=int, default=DEFAULT_MAX_ORDER)
    t.add_argument("--limit", type=float,
                   help="pass/fail limit in percent for every signal "
                        "(default: 8%% on v_c only, other signals informational)")
    t.add_argument("--out")
    t.set_defaults(func=cmd_thd)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
