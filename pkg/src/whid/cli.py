"""Command line entry point: ``whid {design-pilot,identify,volterra,sweep}``.

Exit codes: 0 success, 2 usage or configuration error, 3 conditioning or
degenerate numerics, 4 I/O error.
"""

import argparse
import csv
import dataclasses
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as configuration
from . import channel, estimator, experiments, metrics, signals
from .errors import ConditioningError, DegenerateError, ParameterError, StepError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
HEADER = ["experiment", "axis", "value", "seed", "metric", "value_db"]
SWEEPS = {
    "backoff": "backoff_db",
    "qwhite": "n",
    "snr": "snr_db",
    "n2": "n2",
    "step2": "snr_db",
    "volterra": "ratio",
}

log = logging.getLogger("whid")


def derive_seed(master, index):
    """Per-replicate seed from the master seed; independent of job scheduling."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(2, np.uint32)
               .astype(np.uint64).view(np.uint64)[0])


def write_rows(path, rows):
    with open(path, "w", newline="") as f:
        out = csv.writer(f, lineterminator="\n")
        out.writerow(HEADER)
        for experiment, axis, value, seed, metric, v in rows:
            out.writerow([experiment, axis, _fmt(value), seed, metric, _fmt(metrics.csv_db(v))])


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _metric_rows(experiment, axis, value, seed_index, result):
    return [(experiment, axis, value, seed_index, k, float(v))
            for k, v in result.items() if k not in ("seed", "snr")]


# design-pilot ----------------------------------------------------------------

def cmd_design_pilot(cfg, out, args):
    plan = cfg.pilot
    model = cfg.model()
    pilots = {"x1": plan.padded(plan.x1()), "x2": plan.padded(plan.x2()), "x3": plan.padded(plan.x3())}
    ext = cfg.signal_format
    for name, x in pilots.items():
        path = os.path.join(out, f"{name}.{ext}")
        (signals.save_signal_csv if ext == "csv" else signals.save_signal_bin)(path, x)

    x1p = signals.multisine(plan.x1_spec)
    x2p = plan.x2_period_samples()
    r_band = signals.occupied_bandwidth(np.concatenate([model.r, np.zeros(4096)]), -3.0)
    budget = metrics.BudgetInputs(
        target_nmse_db=cfg.target_nmse_db,
        taps=plan.taps_r,
        taps_g=plan.taps_g,
        bandwidth_ratio_x=max(1.0, signals.occupied_bandwidth(x1p, -3.0) / r_band),
        par_x1=signals.par(x1p),
        par_x2=signals.par(x2p),
        ibo=metrics.undb(plan.ibo_db),
        noise_variance=model.noise_variance,
        gain=model.amplifier.small_signal_gain,
        p_in_sat=plan.p_in_sat,
    )
    report = [
        ("par_x1_db", signals.par_db(x1p)),
        ("par_x2_db", signals.par_db(x2p)),
        ("par_x3_db", signals.par_db(plan.x3_period_samples())),
        ("power_x1_db", 10 * math.log10(signals.mean_power(plan.x1()))),
        ("backoff_x1_db", plan.x1_backoff_db),
        ("ibo_db", plan.ibo_db),
        ("snr_budget_db", metrics.snr_budget(budget, 1)),
        ("n_min_x1", float(metrics.min_pilot_length(budget, "x1opt1"))),
        ("n_min_x2", float(metrics.min_pilot_length(budget, "x2"))),
    ]
    if plan.phase_search is not None:
        report += [
            ("search_objective_db", 10 * math.log10(plan.phase_search.objective)),
            ("search_seed_objective_db", 10 * math.log10(plan.phase_search.seed_objective)),
        ]
    with open(os.path.join(out, "report.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in report:
            w.writerow([k, repr(float(v))])
    return []


# identify --------------------------------------------------------------------

def cmd_identify(cfg, out, args):
    plan = cfg.pilot
    if cfg.capture is not None:
        c = configuration.load_captures(cfg)
        est = estimator.identify(c["x1"], c["w1"], c["x2"], c["w2"], c["x3"], c["w3"], plan)
        est.save(os.path.join(out, "estimate"))
        return [("identify", "capture", 0, 0, f"step{s}_{m}", v) for s, m, v in est.diagnostics]
    model = cfg.model()
    seed = derive_seed(args.seed, 0)
    est = estimator.run_full_pipeline(model, plan, seed)
    est.save(os.path.join(out, "estimate"))
    result = experiments.evaluate(est, model, seed, plan=plan)
    return _metric_rows("identify", "snr_db", cfg.channel.snr_db, 0, result)


# volterra --------------------------------------------------------------------

def _volterra_point(cfg, ratio, index, seed):
    v = cfg.volterra
    row = experiments.volterra_sweep(v.l1, v.l2, [ratio], v.snr_db, [seed])[0]
    return _metric_rows("volterra", "ratio", ratio, index,
                        {"nmse": row["nmse"], "predicted_nmse": row["predicted"],
                         "kernels": 10 * math.log10(row["count"])})


def cmd_volterra(cfg, out, args):
    tasks = [(_volterra_point, cfg, ratio, i, derive_seed(args.seed, i))
             for ratio in cfg.volterra.ratios for i in range(cfg.seeds)]
    return _run_tasks(tasks, args.jobs)


# sweep -----------------------------------------------------------------------

def _sweep_point(cfg, value, index, seed):
    sw = cfg.sweep
    plan = cfg.pilot
    name = sw.experiment
    axis = SWEEPS[name]
    if name == "backoff":
        row = experiments.backoff_sweep([value], sw.snr_db, sw.n, [seed], plan)[0]
        result = {"q": row["q"], "predicted_q": row["predicted"]}
    elif name == "qwhite":
        res = experiments.q_white_noise(int(value), sw.snr_db, [seed])
        result = {"q": res["q"][0], "predicted_q": res["predicted"]}
    elif name in ("snr", "n2"):
        snr = value if name == "snr" else sw.snr_db
        if name == "n2":
            plan = dataclasses.replace(plan, n2=int(value))
        model = configuration.ExperimentConfig(
            channel=dataclasses.replace(cfg.channel, snr_db=snr, noise_variance=None), pilot=plan
        ).model()
        est = estimator.run_full_pipeline(model, plan, seed)
        result = experiments.evaluate(est, model, seed, plan=plan)
    elif name == "step2":
        result = experiments.step2_known_input(value, [seed], plan)[0]
    else:
        return _volterra_point(cfg, value, index, seed)
    return _metric_rows(name, axis, value, index, result)


def cmd_sweep(cfg, out, args):
    if cfg.sweep.experiment not in SWEEPS:
        raise ParameterError(f"sweep.experiment must be one of {', '.join(SWEEPS)}")
    tasks = [(_sweep_point, cfg, value, i, derive_seed(args.seed, i))
             for value in cfg.sweep.values for i in range(cfg.seeds)]
    return _run_tasks(tasks, args.jobs)


def _call(task):
    fn, *rest = task
    return fn(*rest)


def _run_tasks(tasks, jobs):
    # map() keeps submission order, so output is independent of scheduling.
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_call, tasks))
    else:
        results = [_call(t) for t in tasks]
    return [row for rows in results for row in rows]


# gnuplot ---------------------------------------------------------------------

def write_gnuplot(path, csv_name, rows):
    metric_names = sorted({r[4] for r in rows})
    lines = [
        "set datafile separator ','",
        "set key outside",
        f"set xlabel '{rows[0][1] if rows else 'value'}'",
        "set ylabel 'dB'",
        "plot \\",
    ]
    plots = [
        f"  '< awk -F, \"\\$5==\\\"{m}\\\"\" {csv_name}' using 3:6 with points title '{m}'"
        for m in metric_names
    ]
    lines.append(", \\\n".join(plots) if plots else "  0 notitle")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


# entry point -----------------------------------------------------------------

COMMANDS = {
    "design-pilot": cmd_design_pilot,
    "identify": cmd_identify,
    "volterra": cmd_volterra,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="whid", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="TOML configuration (defaults: reference preset)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2**64:
        parser.error("--seed must fit in an unsigned 64-bit integer")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        cfg = configuration.load(args.config)
        os.makedirs(args.out, exist_ok=True)
        rows = COMMANDS[args.command](cfg, args.out, args)
        if args.command != "design-pilot":
            name = f"{args.command.replace('-', '_')}.csv"
            write_rows(os.path.join(args.out, name), rows)
            if args.gnuplot:
                write_gnuplot(os.path.join(args.out, name[:-4] + ".gp"), name, rows)
    except StepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, (ConditioningError, DegenerateError)):
            _report_condition(exc.cause)
            return EXIT_NUMERIC
        return EXIT_USAGE
    except (ConditioningError, DegenerateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _report_condition(exc)
        return EXIT_NUMERIC
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _report_condition(exc):
    condition = getattr(exc, "condition", None)
    if condition is not None:
        print(f"condition estimate: {condition:.3g}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
