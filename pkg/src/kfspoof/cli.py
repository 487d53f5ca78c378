"""``kfspoof`` command-line runner.

Exit codes: 0 success, 1 usage or configuration error, 2 infeasible design
(including profiles with no constraints).
"""

import argparse
import os
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from . import config as cfgmod
from . import detector as det
from . import presets, records, sim
from .design import design_offline, prepare
from .errors import (EnumerationCapExceeded, InfeasibleWindow, NoConstraints,
                     UnreachableSeparation)
from .linalg import lp_norm
from .plot import write_svg
from .separation import expected_separation

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2

INFEASIBLE_ERRORS = (NoConstraints, UnreachableSeparation, InfeasibleWindow,
                     EnumerationCapExceeded)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI experiment config")
    common.add_argument("--preset", metavar="NAME", choices=sorted(presets.PRESETS),
                        help="start from a named parameter set")
    common.add_argument("--seed", type=_u64, metavar="U64", help="master seed override")
    common.add_argument("--out", metavar="DIR", help="output directory override")
    common.add_argument("--threads", type=_positive, metavar="N", default=os.cpu_count() or 1,
                        help="worker threads for per-trial online runs")

    p = _Parser(prog="kfspoof", description="Design and evaluate Kalman-filter spoofing attacks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("design-offline", parents=[common], help="design an offline plan")
    sub.add_parser("simulate", parents=[common], help="simulate the offline plan")
    sub.add_parser("design-online", parents=[common], help="receding-horizon spoofing runs")
    sub.add_parser("calibrate-detector", parents=[common], help="false-alarm calibration sweep")
    sub.add_parser("detect-experiment", parents=[common], help="detection rate of the plan")
    sub.add_parser("show-config", parents=[common], help="print the resolved config")
    pv = sub.add_parser("pvalue", help="exact binomial upper-tail probability")
    pv.add_argument("--x", type=int, required=True)
    pv.add_argument("--n", type=int, required=True)
    pv.add_argument("--p0", type=float, required=True)
    return p


def resolve_config(args) -> cfgmod.ExperimentConfig:
    base = presets.get(args.preset) if args.preset else cfgmod.ExperimentConfig()
    cfg = cfgmod.load(args.config, base) if args.config else base
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _outdir(cfg) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _path(cfg, name: str) -> str:
    return os.path.join(_outdir(cfg), name)


def _plan(cfg):
    return design_offline(cfg.system(), cfg.spec(), np.array(cfg.attacker_cov),
                          np.array(cfg.clean_cov), enum_cap=cfg.enum_cap)


def _desired(cfg) -> np.ndarray:
    d = np.zeros(cfg.steps)
    k = min(cfg.steps, cfg.horizon)
    d[:k] = np.asarray(cfg.d)[:k]
    return d


def cmd_design_offline(cfg, args) -> int:
    spec = cfg.spec()
    ctx = prepare(cfg.system(), spec, np.array(cfg.attacker_cov), np.array(cfg.clean_cov))
    plan = _plan(cfg)
    m0 = np.zeros(cfg.system().n) if spec.m0_bias is None else spec.m0_bias
    predicted = [lp_norm(expected_separation(ctx.terms, m0, plan.epsilons, t), spec.norm_p)
                 for t in range(1, spec.horizon + 1)]
    records.write_plan_csv(_path(cfg, "plans.csv"), plan.epsilons)
    records.write_table(_path(cfg, "separations.csv"), ("t", "d_t", "predicted"),
                        ((str(t), spec.d[t - 1], predicted[t - 1])
                         for t in range(1, spec.horizon + 1)))
    print(f"method: {plan.method}  exact: {plan.exact}  LPs solved: {plan.lp_count}")
    print(f"active constraints at t = {', '.join(map(str, plan.times))} ({len(plan.times)})")
    print(f"objective: {plan.objective:.10g}")
    for note in plan.notes:
        print(f"note: {note}")
    return EXIT_OK


def _plot_separation(cfg, name, t, curves, d):
    series = [(label, t, y) for label, y in curves] + [("desired", t, d)]
    write_svg(_path(cfg, name), series, title=cfg.experiment_id, xlabel="step",
              ylabel="||m - mt||_1")


def cmd_simulate(cfg, args) -> int:
    plan = _plan(cfg)
    scn = cfg.scenario()
    d = _desired(cfg)
    detector = cfg.detector()
    rec = sim.simulate(scn, plan, detector, d)
    records.write_runs_csv(_path(cfg, "runs.csv"), rec)
    t = rec.t
    curves = [("trial", rec.sep_l1)]
    if cfg.trials > 1:
        mc = sim.monte_carlo(scn, plan, cfg.trials, cfg.seed, detector)
        records.write_table(_path(cfg, "summary.csv"), ("t", "d_t", "sep_mean", "sep_min", "sep_max"),
                            ((str(k), d[k - 1], mc.sep_mean[k - 1], mc.sep_min[k - 1],
                              mc.sep_max[k - 1]) for k in t))
        curves = [("mean", mc.sep_mean), ("min", mc.sep_min), ("max", mc.sep_max)]
        print(f"{cfg.trials} trials, mean L1 energy {mc.energy_mean:.6g}")
        if mc.detections is not None:
            print(f"trials with an alarm: {mc.detections}/{cfg.trials}")
    _plot_separation(cfg, "separation.svg", t, curves, d)
    print("separation at constrained steps: "
          + ", ".join(f"t={k}: {rec.sep_l1[k - 1]:.6f}" for k in plan.times if k <= cfg.steps))
    return EXIT_OK


def cmd_design_online(cfg, args) -> int:
    spec = cfg.spec()
    window = cfg.window if cfg.window is not None else cfg.horizon
    scn = cfg.scenario()
    d = _desired(cfg)
    rec = sim.simulate(scn, detector=cfg.detector(), d=d, online_spec=spec, window=window)
    records.write_runs_csv(_path(cfg, "runs.csv"), rec)
    records.write_plan_csv(_path(cfg, "plans.csv"), rec.eps)
    print(f"online run (H = {window}): L1 energy {rec.energy_l1:.6g}")
    if cfg.trials > 1:
        plan = _plan(cfg)
        on = sim.monte_carlo(scn, None, cfg.trials, cfg.seed, online_spec=spec, window=window,
                             threads=args.threads)
        off = sim.monte_carlo(scn, plan, cfg.trials, cfg.seed)
        records.write_table(_path(cfg, "energy.csv"), ("trial", "online_l1", "offline_l1"),
                            ((str(i), a, b) for i, (a, b) in enumerate(zip(on.energy, off.energy))))
        t = np.arange(1, cfg.steps + 1)
        write_svg(_path(cfg, "divergence.svg"),
                  [("online", t, (on.sep - d).mean(axis=0)), ("offline", t, (off.sep - d).mean(axis=0))],
                  title=cfg.experiment_id, xlabel="step", ylabel="mean ||m - mt||_1 - d_t")
        print(f"{cfg.trials} trials: mean L1 energy online {on.energy_mean:.6g}, "
              f"offline {off.energy_mean:.6g}")
    return EXIT_OK


def _detector_window(cfg) -> list:
    try:
        return det.attack_window(_plan(cfg), cfg.steps)
    except NoConstraints:
        return list(range(1, cfg.steps + 1))


def _calibrate(cfg):
    return det.calibrate_threshold(cfg.detector(), cfg.scenario(), cfg.n_sims, cfg.trials_per_sim,
                                   seed=sim.mix_seed(cfg.seed, 1), window=_detector_window(cfg),
                                   basis=cfg.basis)


def cmd_calibrate(cfg, args) -> int:
    cal = _calibrate(cfg)
    records.write_calibration_csv(_path(cfg, "calibration.csv"), cal)
    write_svg(_path(cfg, "calibration.svg"),
              [("mean", cal.thresholds, cal.rate_mean), ("min", cal.thresholds, cal.rate_min),
               ("max", cal.thresholds, cal.rate_max)],
              title=f"{cfg.experiment_id} false-alarm rate", xlabel="threshold", ylabel="rate")
    print(f"window: steps {cal.window[0]}..{cal.window[-1]}  basis: {cal.basis}")
    print(f"threshold: {cal.threshold:.6g}  false-alarm rate: {cal.false_alarm:.5f}")
    return EXIT_OK


def cmd_detect(cfg, args) -> int:
    plan = _plan(cfg)
    window = det.attack_window(plan, cfg.steps)
    p0 = None
    dcfg = cfg.detector()
    if dcfg.threshold is None:
        cal = _calibrate(cfg)
        dcfg = dcfg.with_threshold(cal.threshold)
        p0 = cal.false_alarm
        print(f"calibrated threshold {cal.threshold:.6g} (false-alarm rate {p0:.5f})")
    rep = det.detection_experiment(dcfg, cfg.scenario(), plan, cfg.detect_trials,
                                   seed=sim.mix_seed(cfg.seed, 2), window=window, p0=p0)
    records.write_table(_path(cfg, "detection.csv"),
                        ("trials", "detections", "rate", "p_value", "null_rate", "threshold"),
                        [(str(rep.trials), str(rep.detections), rep.rate, rep.p_value,
                          rep.null_rate, dcfg.threshold)])
    print(rep)
    return EXIT_OK


def format_pvalue(p: float) -> str:
    """Five significant digits, printed as the shortest float repr."""
    return repr(float(f"{p:.5g}"))


def cmd_pvalue(args) -> int:
    try:
        p = det.binom_pvalue(args.x, args.n, args.p0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(format_pvalue(p))
    return EXIT_OK


COMMANDS = {
    "design-offline": cmd_design_offline,
    "simulate": cmd_simulate,
    "design-online": cmd_design_online,
    "calibrate-detector": cmd_calibrate,
    "detect-experiment": cmd_detect,
    "show-config": lambda cfg, args: print(cfgmod.dumps(cfg), end="") or EXIT_OK,
}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "pvalue":
            return cmd_pvalue(args)
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, cfgmod.ConfigError, OSError) as exc:
        print(f"kfspoof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except INFEASIBLE_ERRORS as exc:
        print(f"kfspoof: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
