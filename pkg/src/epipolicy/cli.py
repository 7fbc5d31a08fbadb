"""Command-line entry points: ingest, fit, window-search, fit-gdp, train,
rollout, replay-baseline and export-plots.

Every subcommand writes its outputs plus ``manifest.json`` into ``--out-dir``;
JSON outputs embed the manifest and CSV outputs carry it as a ``#`` comment
line. Nothing time- or host-dependent is recorded, so repeating a command
with the same inputs and flags reproduces the files byte for byte.

Exit codes: 0 success, 2 usage or configuration, 3 data, 4 numeric or
convergence, 5 internal.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .agent import (
    TrainConfig,
    load_checkpoint,
    median_filter,
    random_policy_rewards,
    rollout,
    save_checkpoint,
    train,
    write_log_csv,
)
from .calibration import (
    WINDOW_LENGTHS,
    FitResult,
    fit_final,
    fit_lockdown_sir,
    fit_lockdown_vax_sir,
    fit_simple_sir,
    window_search,
)
from .data import DEFAULT_END, DEFAULT_START, build_bundle, bundled_data_dir, load_bundle, save_bundle
from .econ import GdpModel, fit_cubic, gdp_bounds, predict_gdp, quarterly_pairs
from .env import Environment, RewardConfig, config_from_fit, load_env_config, replay_historical, save_env_config
from .errors import ConfigurationError, DataError, EpiPolicyError
from .model import integrate

log = logging.getLogger("epipolicy")

DATA_DIR_ENV = "EPIPOLICY_DATA_DIR"
MODELS = ("simple", "lockdown", "lockdown_nu", "final")
EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 2, 3, 5


def _g(x):
    return format(float(x), ".6g")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Output directory plus the manifest embedded in everything written there."""

    def __init__(self, subcommand, args, inputs):
        self.out = Path(args.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        hashes = {}
        for name, path in inputs.items():
            if path is None:
                continue
            if not Path(path).is_file():
                raise DataError(f"input {name}: no such file {path}")
            hashes[name] = {"path": str(path), "sha256": _sha256(path)}
        digest = hashlib.sha256(json.dumps(hashes, sort_keys=True).encode()).hexdigest()
        flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out_dir", "verbose")}
        self.manifest = {
            "subcommand": subcommand,
            "inputs": hashes,
            "config": {k: (str(v) if isinstance(v, (Path, dt.date)) else v) for k, v in flags.items()},
            "seed": getattr(args, "seed", None),
            "output_dir": str(args.out_dir),
            "toolkit_version": __version__,
            "content_hash": digest,
        }

    def path(self, name):
        return self.out / name

    def write_json(self, name, payload):
        doc = dict(payload, manifest=self.manifest)
        self.path(name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def finish(self):
        self.path("manifest.json").write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")


def _data_file(arg, default_name):
    if arg is not None:
        return Path(arg)
    base = os.environ.get(DATA_DIR_ENV)
    return (Path(base) if base else bundled_data_dir()) / default_name


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{what}: no such file {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{what}: {path} is not valid JSON ({exc})") from None


def _load_overrides(path, what):
    if path is None:
        return {}
    d = _read_json(path, what)
    if not isinstance(d, dict):
        raise ConfigurationError(f"{what}: expected a JSON object")
    return d


def _bundle(args):
    if not Path(args.bundle).is_file():
        raise DataError(f"bundle: no such file {args.bundle}")
    return load_bundle(args.bundle)


def _fit_report(fit):
    return {k: v for k, v in fit.as_dict().items()}


def _run_fit(model, obs, st, anchor=None, window_length=None):
    if model == "simple":
        return fit_simple_sir(obs), None
    if model == "lockdown":
        return fit_lockdown_sir(obs, st), None
    if model == "lockdown_nu":
        return fit_lockdown_vax_sir(obs, st), None
    if anchor is None:
        anchor = fit_lockdown_vax_sir(obs, st)
    final = fit_final(obs, st, anchor.params.beta, anchor.params.gamma, window_length=window_length)
    return final.fit, final


def _window_rows(search):
    return [
        {"length": f.length, "loss_sir": f.loss_sir, "loss_i": f.loss_i, "chosen": f.length == search.chosen_length}
        for f in search.fits
    ]


# --- subcommands -----------------------------------------------------------


def cmd_ingest(args):
    files = {
        "stringency_csv": _data_file(args.stringency_csv, "owid_stringency_subset.csv"),
        "compartments_csv": _data_file(args.compartments_csv, "worldometer_ind.csv"),
        "gdp_csv": _data_file(args.gdp_csv, "oecd_gdp_quarterly.csv"),
    }
    run = Run("ingest", args, files)
    bundle = build_bundle(
        files["stringency_csv"],
        files["compartments_csv"],
        files["gdp_csv"],
        country=args.country,
        population=args.population,
        date_range=(args.start, args.end),
        gdp_repeat=args.gdp_repeat,
        deaths=args.deaths,
    )
    save_bundle(bundle, run.path("bundle.json"))
    run.write_json("ingest_report.json", {"days": bundle.days, "country": bundle.country, "population": bundle.population})
    run.finish()
    print(f"bundle: {bundle.country}, {bundle.days} days, N={_g(bundle.population)} -> {run.path('bundle.json')}")


def cmd_fit(args):
    run = Run("fit", args, {"bundle": args.bundle, "anchor": args.anchor})
    b = _bundle(args)
    obs, st = b.observed, b.stringency
    anchor = FitResult.from_dict(_read_json(args.anchor, "anchor")["fit"]) if args.anchor else None
    models = MODELS if args.model == "all" else (args.model,)
    reports = []
    done = {}
    for m in models:
        fit, final = _run_fit(m, obs, st, anchor or done.get("lockdown_nu"), args.window_length)
        done[m] = fit
        payload = {"fit": _fit_report(fit)}
        if final is not None:
            payload["window_search"] = _window_rows(final.search)
            payload["chosen_length"] = final.search.chosen_length
            payload["rounds"] = final.rounds
        run.write_json(f"fit_{m}.json", payload)
        reports.append(fit)
        print(f"{m:12s} beta={_g(fit.params.beta)} gamma={_g(fit.params.gamma)} loss_SIR={_g(fit.loss_sir)} loss_I={_g(fit.loss_i)}")
    if len(reports) > 1:
        li = [f.loss_i for f in reports]
        ordered = all(a > b for a, b in zip(li, li[1:]))
        run.write_json("fits.json", {"fits": [_fit_report(f) for f in reports], "loss_i_strictly_decreasing": ordered})
        print(f"loss_I strictly decreasing across models: {ordered}")
    run.finish()


def cmd_window_search(args):
    run = Run("window-search", args, {"bundle": args.bundle, "anchor": args.anchor})
    b = _bundle(args)
    if args.beta is not None and args.gamma is not None:
        beta, gamma = args.beta, args.gamma
    elif args.anchor:
        d = _read_json(args.anchor, "anchor")["fit"]
        beta, gamma = float(d["beta"]), float(d["gamma"])
    else:
        f = fit_lockdown_vax_sir(b.observed, b.stringency)
        beta, gamma = f.params.beta, f.params.gamma
    search = window_search(b.observed, b.stringency, beta, gamma, tuple(args.lengths))
    rows = _window_rows(search)
    lines = ["length,loss_sir,loss_i,chosen"] + [
        f"{r['length']},{r['loss_sir']!r},{r['loss_i']!r},{int(r['chosen'])}" for r in rows
    ]
    run.path("window_search.csv").write_text(
        "# manifest: " + json.dumps(run.manifest, sort_keys=True) + "\n" + "\n".join(lines) + "\n"
    )
    run.write_json("window_search.json", {"beta": beta, "gamma": gamma, "rows": rows, "chosen_length": search.chosen_length})
    run.finish()
    for r in rows:
        mark = " *" if r["chosen"] else ""
        print(f"L={r['length']:3d} loss_SIR={_g(r['loss_sir'])} loss_I={_g(r['loss_i'])}{mark}")


def cmd_fit_gdp(args):
    run = Run("fit-gdp", args, {"bundle": args.bundle})
    b = _bundle(args)
    if args.pairing == "quarterly":
        x, y = quarterly_pairs(b.stringency.start_date, b.stringency.values, b.gdp_quarterly)
    else:
        x, y = b.stringency.values, b.gdp_daily.values
    model = fit_cubic(x, y)
    lo, hi = gdp_bounds(model)
    run.write_json(
        "gdp_model.json",
        {
            "model": model.as_dict(),
            "country": b.country,
            "pairing": args.pairing,
            "bounds": [lo, hi],
            "samples": {"stringency": [float(v) for v in x], "gdp": [float(v) for v in y]},
        },
    )
    run.finish()
    print(
        f"gdp(s) = {_g(model.a)} s^3 + {_g(model.b)} s^2 + {_g(model.c)} s + {_g(model.d)}"
        f"  r={_g(model.r)} r2={_g(model.r2)} p={_g(model.p_value)} n={model.n_points}"
    )


def _gdp_from_file(path):
    d = _read_json(path, "gdp model")["model"]
    return GdpModel(*(float(d[k]) for k in "abcd"))


def _build_env_config(args, b):
    reward = RewardConfig.from_dict(_load_overrides(args.reward_config, "reward config"))
    if args.fit:
        fit = FitResult.from_dict(_read_json(args.fit, "fit")["fit"])
    else:
        fit, _ = _run_fit("final", b.observed, b.stringency)
    if args.gdp:
        gdp = _gdp_from_file(args.gdp)
    else:
        gdp = fit_cubic(*quarterly_pairs(b.stringency.start_date, b.stringency.values, b.gdp_quarterly))
    return config_from_fit(b, fit, gdp, reward, args.history_length)


def cmd_train(args):
    run = Run(
        "train",
        args,
        {"bundle": args.bundle, "fit": args.fit, "gdp": args.gdp, "env_config": args.env_config,
         "train_config": args.train_config, "reward_config": args.reward_config},
    )
    if args.env_config:
        cfg = load_env_config(args.env_config)
        if args.reward_config:
            cfg = cfg.with_reward(**_load_overrides(args.reward_config, "reward config"))
    else:
        if not args.bundle:
            raise ConfigurationError("train needs --env-config or --bundle")
        cfg = _build_env_config(args, _bundle(args))
    overrides = _load_overrides(args.train_config, "train config")
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    tcfg = TrainConfig.from_dict(overrides)
    env = Environment(cfg)
    save_env_config(cfg, run.path("env_config.json"))
    q, rows = train(env, tcfg)
    save_checkpoint(q, tcfg, run.path("checkpoint.json"))
    write_log_csv(rows, run.path("train_log.csv"))
    _, greedy = rollout(q, env)
    rand = random_policy_rewards(env, 5, tcfg.seed)
    run.write_json(
        "train_summary.json",
        {"greedy_reward": greedy, "random_rewards": rand, "random_mean": float(np.mean(rand)), "train_config": vars_of(tcfg)},
    )
    run.finish()
    print(f"trained {tcfg.total_steps} steps; greedy episode reward {_g(greedy)}; random mean {_g(np.mean(rand))}")


def vars_of(cfg):
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def _series_rows(env, outcomes, start_date):
    state0 = env.reset()
    rows = [(0, start_date.isoformat(), state0.stringency, state0.i_prop, state0.norm_gdp, state0.r_eff, 0.0, 0.0)]
    cum = 0.0
    for o in outcomes:
        cum += o.reward
        s = o.state
        d = start_date + dt.timedelta(days=o.day_index)
        rows.append((o.day_index, d.isoformat(), s.stringency, s.i_prop, s.norm_gdp, s.r_eff, o.reward, cum))
    return rows


SERIES_COLUMNS = ("stringency", "i_prop", "norm_gdp", "r_eff", "reward", "cumulative_reward")


def cmd_rollout(args):
    run = Run("rollout", args, {"checkpoint": args.checkpoint, "env_config": args.env_config})
    cfg = load_env_config(args.env_config)
    env = Environment(cfg)
    q, _ = load_checkpoint(args.checkpoint)
    outcomes, total = rollout(q, env)
    raw = _series_rows(env, outcomes, cfg.start_date)
    filt_series = median_filter([r[2] for r in raw], args.filter)
    f_out, f_total = replay_historical(env, filt_series)
    filt = _series_rows(env, f_out, cfg.start_date)
    from .plots import write_panel_csv

    cols = ["day", "date"] + [f"{c}_rl" for c in SERIES_COLUMNS] + [f"{c}_rl_filtered" for c in SERIES_COLUMNS]
    rows = [a + b[2:] for a, b in zip(raw, filt)]
    write_panel_csv(
        run.path("rollout.csv"),
        "policy rollout",
        "stringency 0-100; i_prop fraction of N; norm_gdp min-max scaled; r_eff dimensionless; reward points",
        ("rl", "rl_filtered"),
        cols,
        rows,
        run.manifest,
    )
    run.write_json("rollout_summary.json", {"cumulative_reward": total, "filtered_cumulative_reward": f_total, "filter": args.filter})
    run.finish()
    print(f"greedy cumulative reward {_g(total)}; median-filtered (k={args.filter}) replay {_g(f_total)}")


def cmd_replay_baseline(args):
    run = Run("replay-baseline", args, {"env_config": args.env_config, "bundle": args.bundle})
    cfg = load_env_config(args.env_config)
    env = Environment(cfg)
    b = _bundle(args)
    outcomes, total = replay_historical(env, b.stringency)
    from .plots import write_panel_csv

    rows = _series_rows(env, outcomes, cfg.start_date)
    write_panel_csv(
        run.path("baseline.csv"),
        "historical stringency replay",
        "stringency 0-100; i_prop fraction of N; norm_gdp min-max scaled; r_eff dimensionless; reward points",
        ("modelled",),
        ["day", "date"] + [f"{c}_modelled" for c in SERIES_COLUMNS],
        rows,
        run.manifest,
    )
    run.write_json("baseline_summary.json", {"cumulative_reward": total})
    run.finish()
    print(f"historical replay cumulative reward {_g(total)}")


def _read_series_csv(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, v in zip(header, ln.split(",")):
            cols[h].append(v)
    return cols


def cmd_export_plots(args):
    from .plots import line_panel, scatter_fit_panel, write_panel_csv

    run = Run(
        "export-plots",
        args,
        {"bundle": args.bundle, "fits": args.fits, "rollout": args.rollout, "baseline": args.baseline, "gdp": args.gdp},
    )
    b = _bundle(args)
    o = b.observed
    days = np.arange(b.days)
    dates = [(b.date_range[0] + dt.timedelta(days=int(t))).isoformat() for t in days]
    written = []

    if args.fits:
        for rep in _read_json(args.fits, "fits")["fits"]:
            fit = FitResult.from_dict(rep)
            traj = integrate(o.initial(), fit.params, o.horizon, None if fit.model == "simple" else b.stringency, fit.vaccination_schedule())
            name = f"fit_{fit.model}"
            write_panel_csv(
                run.path(name + ".csv"),
                f"compartments, {fit.model} model",
                "persons",
                ("actual", "modelled"),
                ["day", "date", "s_actual", "i_actual", "r_actual", "s_modelled", "i_modelled", "r_modelled"],
                zip(days, dates, o.s_obs, o.i_obs, o.r_obs, traj.s, traj.i, traj.r),
                run.manifest,
            )
            line_panel(run.path(name + ".svg"), f"Infected, {fit.model}", "persons", days, [("actual", o.i_obs), ("modelled", traj.i)])
            written.append(name)

    if args.gdp:
        d = _read_json(args.gdp, "gdp model")
        model = _gdp_from_file(args.gdp)
        xs, ys = d["samples"]["stringency"], d["samples"]["gdp"]
        grid = np.linspace(0.0, 100.0, 101)
        write_panel_csv(
            run.path("gdp_fit.csv"),
            "normalized GDP vs stringency",
            "stringency 0-100; GDP index (trend = 100)",
            ("actual", "modelled"),
            ["stringency", "gdp_actual", "gdp_modelled"],
            zip(xs, ys, predict_gdp(model, np.asarray(xs))),
            run.manifest,
        )
        scatter_fit_panel(run.path("gdp_fit.svg"), f"GDP vs stringency ({b.country})", xs, ys, grid, predict_gdp(model, grid), "stringency", "normalized GDP")
        written.append("gdp_fit")

    if args.rollout or args.baseline:
        actual = {
            "stringency": b.stringency.values,
            "i_prop": o.i_obs / o.n,
            "norm_gdp": None,
            "r_eff": None,
            "reward": None,
            "cumulative_reward": None,
        }
        rl = _read_series_csv(args.rollout) if args.rollout else {}
        base = _read_series_csv(args.baseline) if args.baseline else {}
        for col in SERIES_COLUMNS:
            series, header, prov = [], ["day", "date"], []
            if actual[col] is not None:
                series.append(("actual", actual[col]))
                header.append(f"{col}_actual")
                prov.append("actual")
            for src, suffix in ((base, "modelled"), (rl, "rl"), (rl, "rl_filtered")):
                key = f"{col}_{suffix}"
                if key in src:
                    series.append((suffix, np.array(src[key], dtype=float)))
                    header.append(key)
                    prov.append(suffix)
            n = min(len(v) for _, v in series)
            write_panel_csv(
                run.path(f"policy_{col}.csv"),
                f"policy comparison: {col}",
                "see column name",
                tuple(prov),
                header,
                zip(days[:n], dates[:n], *(np.asarray(v, dtype=float)[:n] for _, v in series)),
                run.manifest,
            )
            line_panel(run.path(f"policy_{col}.svg"), col, col, days[:n], [(lbl, np.asarray(v)[:n]) for lbl, v in series])
            written.append(f"policy_{col}")

    run.write_json("plots_index.json", {"panels": written})
    run.finish()
    print(f"wrote {len(written)} panel(s) to {run.out}")


# --- parser ----------------------------------------------------------------


def _date(text):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text}") from None


def _odd(text):
    k = int(text)
    if k < 1 or k % 2 == 0:
        raise argparse.ArgumentTypeError("filter width must be an odd integer >= 1")
    return k


def build_parser():
    p = argparse.ArgumentParser(prog="epipolicy", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--out-dir", default=".", help="output directory (default: current)")
        sp.set_defaults(func=func)
        return sp

    sp = add("ingest", cmd_ingest, "build a dataset bundle from the three CSV sources")
    sp.add_argument("--stringency-csv", help=f"OWID-style CSV (default: ${DATA_DIR_ENV} or the bundled surrogate)")
    sp.add_argument("--compartments-csv", help="Worldometer-style CSV")
    sp.add_argument("--gdp-csv", help="OECD-style quarterly CSV")
    sp.add_argument("--country", default="IND")
    sp.add_argument("--population", type=float, help="population N (default known for IND)")
    sp.add_argument("--start", type=_date, default=DEFAULT_START)
    sp.add_argument("--end", type=_date, default=DEFAULT_END)
    sp.add_argument("--gdp-repeat", action="store_true", help="repeat quarterly GDP per day instead of interpolating")
    sp.add_argument("--deaths", choices=("ignore", "removed"), default="ignore")

    sp = add("fit", cmd_fit, "calibrate an SIR variant on a bundle")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--model", choices=MODELS + ("all",), default="all")
    sp.add_argument("--anchor", help="constant-nu fit report seeding the final model (default: fitted here)")
    sp.add_argument("--window-length", type=int, choices=WINDOW_LENGTHS,
                    help="fix the final model's window length (default: weighted 0.5/0.5 rule)")

    sp = add("window-search", cmd_window_search, "loss table over vaccination window lengths")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--anchor", help="fit report supplying beta and gamma")
    sp.add_argument("--lengths", type=int, nargs="+", default=list(WINDOW_LENGTHS))

    sp = add("fit-gdp", cmd_fit_gdp, "cubic GDP-stringency model")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--pairing", choices=("quarterly", "daily"), default="quarterly",
                    help="quarter-mean stringency vs quarterly GDP, or daily stringency vs interpolated GDP")

    sp = add("train", cmd_train, "train the Q-learning agent")
    sp.add_argument("--bundle")
    sp.add_argument("--fit", help="final-model fit report (default: fitted here)")
    sp.add_argument("--gdp", help="GDP model file (default: fitted here)")
    sp.add_argument("--env-config", help="environment config; replaces --bundle/--fit/--gdp")
    sp.add_argument("--train-config", help="JSON object overriding TrainConfig fields")
    sp.add_argument("--reward-config", help="JSON object overriding RewardConfig fields")
    sp.add_argument("--history-length", type=int, default=30)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--steps", type=int, help="override total training steps")

    sp = add("rollout", cmd_rollout, "greedy rollout of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--env-config", required=True)
    sp.add_argument("--filter", type=_odd, default=7, help="median filter width (odd)")

    sp = add("replay-baseline", cmd_replay_baseline, "replay the historical stringency through the environment")
    sp.add_argument("--env-config", required=True)
    sp.add_argument("--bundle", required=True)

    sp = add("export-plots", cmd_export_plots, "panel CSVs and SVG renderings")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--fits", help="fits.json from `fit --model all`")
    sp.add_argument("--gdp", help="gdp_model.json")
    sp.add_argument("--rollout", help="rollout.csv")
    sp.add_argument("--baseline", help="baseline.csv")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)
    try:
        args.func(args)
    except EpiPolicyError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, PermissionError) as exc:
        print(f"error (data): {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort categorisation
        log.exception("internal error")
        print(f"error (internal): {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
