"""Command-line entry point: ``mass-staging <command> [options]``.

Commands: synth, ingest, train, eval, sweep, power, describe.  Exit status
is 0 on success, 2 on a configuration error and 1 on any runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, to_toml
from .evaluation import (
    EFFICIENCY_UNITS,
    REFERENCE_ETA_P,
    REFERENCE_ETA_T,
    evaluate,
    format_percent_grid,
    mask_sweep,
    sweep_csv,
    sweep_json,
)
from .ingest import (
    merge_hypnogram,
    read_csv_recording,
    read_edf,
    save_edf,
    segment_epochs,
    synth_dataset,
    to_recording,
)
from .masking import AMPLIFIERS, power_estimate, signal_integrity
from .model import MassParams
from .spectral import dump_features, featurize, load_features
from .training import GRID_R_A, GRID_R_E, load_params, make_windows, train

log = logging.getLogger("mass_staging")


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MASS_SEED")
    if env is None:
        return 0
    try:
        value = int(env)
    except ValueError:
        raise ConfigError("MASS_SEED", f"expected an integer, got {env!r}") from None
    if value < 0:
        raise ConfigError("MASS_SEED", "must be non-negative")
    return value


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _record_run(out, command, seed, extra=None):
    info = {"command": command, "seed": seed, "version": __version__, "argv": sys.argv[1:]}
    info.update(extra or {})
    (out / f"{command}_run.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    log.info("%s: seed=%s %s", command, seed, json.dumps(extra or {}, sort_keys=True))


def _load_dataset(path):
    """Feature caches from a ``.mpsd`` file or a directory of them."""
    path = Path(path)
    files = sorted(path.glob("*.mpsd")) if path.is_dir() else [path]
    if not files:
        raise FileNotFoundError(f"no .mpsd feature files under {path}")
    return [load_features(f) for f in files]


def _ratio_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ratios, got {text!r}") from None


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    seed = _seed(args)
    out = _out(args)
    records = synth_dataset(seed, args.records, args.epochs_per_record)
    for i, sig in enumerate(records):
        stem = f"record_{i:02d}"
        if not args.no_edf:
            save_edf(out / f"{stem}.edf", to_recording(sig))
        dump_features(featurize(sig), out / f"{stem}.mpsd")
    _record_run(out, "synth", seed, {"records": args.records, "epochs_per_record": args.epochs_per_record})
    print(f"wrote {len(records)} records x {args.epochs_per_record} epochs to {out}")
    return 0


def cmd_ingest(args):
    out = _out(args)
    for src in args.inputs:
        src = Path(src)
        if src.suffix.lower() == ".csv":
            rec = read_csv_recording(src, args.labels)
        else:
            rec = read_edf(src)
            if args.hypnogram:
                rec = merge_hypnogram(rec, read_edf(args.hypnogram))
        sig = segment_epochs(rec, args.channel)
        if sig.snapped_annotations:
            log.warning("%s: %d annotations snapped to the 30 s grid", src.name, sig.snapped_annotations)
        target = out / f"{src.stem}.mpsd"
        dump_features(featurize(sig), target, dtype=np.float32 if args.float32 else np.float64)
        print(f"{src.name}: {len(sig)} epochs -> {target.name}")
    _record_run(out, "ingest", None, {"inputs": [str(s) for s in args.inputs], "channel": args.channel})
    return 0


def cmd_train(args):
    cfg, cfg_seed = load_config(args.config, args.set or ())
    seed = args.seed if args.seed is not None else (cfg_seed if cfg_seed is not None else _seed(args))
    out = _out(args)
    (out / "config.toml").write_text(to_toml(cfg, seed))
    _record_run(out, "train", seed, {"config": cfg.to_dict()})
    psd, labels = make_windows(_load_dataset(args.data), cfg.model.e)
    res = train(psd, labels, cfg, seed=seed, out_dir=out)
    final = res.checkpoints[-1] if res.checkpoints else None
    print(f"trained {res.steps} steps, final loss {res.curve[-1]['loss_total']:.4f}")
    if final is not None:
        print(f"checkpoint: {final}")
    return 0


def cmd_eval(args):
    seed = _seed(args)
    out = _out(args)
    params, cfg, _ = load_params(args.checkpoint)
    psd, labels = make_windows(_load_dataset(args.data), cfg.model.e)
    report = evaluate(params, psd, labels, args.ra, args.re, seed=seed, timing=True)
    body = report.to_dict()
    body["param_count"] = params.num_parameters()
    body["efficiency_units"] = EFFICIENCY_UNITS
    body["reference_values"] = {"eta_p": REFERENCE_ETA_P, "eta_t": REFERENCE_ETA_T}
    (out / "report.json").write_text(json.dumps(body, indent=2) + "\n")
    _record_run(out, "eval", seed, {"checkpoint": str(args.checkpoint), "r_a": args.ra, "r_e": args.re})
    print(
        f"integrity {report.integrity:.2f}  ACC {100 * report.acc:.2f}%  MF1 {100 * report.mf1:.2f}%  "
        f"kappa {report.kappa:.3f}  MGm {100 * report.mgm:.2f}%"
    )
    return 0


def cmd_sweep(args):
    seed = _seed(args)
    out = _out(args)
    params, cfg, _ = load_params(args.checkpoint)
    psd, labels = make_windows(_load_dataset(args.data), cfg.model.e)
    reports = mask_sweep(params, psd, labels, args.grid_ra, args.grid_re, seed=seed, threads=args.threads)
    (out / "sweep.csv").write_text(sweep_csv(reports))
    (out / "sweep.json").write_text(sweep_json(reports) + "\n")
    _record_run(out, "sweep", seed, {"grid_r_a": args.grid_ra, "grid_r_e": args.grid_re})
    if args.format == "paper":
        for metric in ("acc", "mf1", "kappa", "mgm"):
            print(format_percent_grid(reports, metric))
            print()
    elif args.format == "json":
        print(sweep_json(reports))
    else:
        print(sweep_csv(reports), end="")
    return 0


def cmd_power(args):
    if args.integrity is not None:
        integrity = args.integrity
    else:
        integrity = signal_integrity(args.ra, args.re)
    if not 0.0 <= integrity <= 1.0:
        raise ConfigError("integrity", f"must lie in [0, 1], got {integrity}")
    names = [args.amp] if args.amp else list(AMPLIFIERS)
    for name in names:
        spec = AMPLIFIERS[name]
        mw = power_estimate(spec, integrity)
        print(f"{spec.name}  integrity {integrity:.2f}  {mw:.2f} mW")
    return 0


def cmd_describe(args):
    cfg, _ = load_config(args.config, args.set or ())
    params = MassParams(cfg.model, seed=0)
    groups = params.describe()
    width = max(len(k) for k in groups)
    for name, count in groups.items():
        print(f"{name:<{width}}  {count:>10,d}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="mass-staging", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True, seed=True):
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="random seed (default: $MASS_SEED or 0)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads; 1 is bit-reproducible")

    s = sub.add_parser("synth", help="generate a synthetic labelled dataset")
    common(s)
    s.add_argument("--records", type=int, default=8)
    s.add_argument("--epochs-per-record", type=int, default=128)
    s.add_argument("--no-edf", action="store_true", help="write feature caches only")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="EDF/CSV recordings to feature caches")
    common(s, seed=False)
    s.add_argument("inputs", nargs="+", help=".edf or .csv signal files")
    s.add_argument("--hypnogram", help="EDF+ hypnogram to merge (single EDF input)")
    s.add_argument("--labels", help="label sidecar for a CSV input")
    s.add_argument("--channel", default="EEG Fpz-Cz")
    s.add_argument("--float32", action="store_true", help="store features as float32")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="train on feature caches")
    common(s)
    s.add_argument("--data", required=True, help=".mpsd file or directory")
    s.add_argument("--config", help="TOML configuration")
    s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config entry")
    s.set_defaults(func=cmd_train)

    for name, func, text in (("eval", cmd_eval, "evaluate a checkpoint"), ("sweep", cmd_sweep, "mask-ratio grid")):
        s = sub.add_parser(name, help=text)
        common(s)
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--data", required=True)
        if name == "eval":
            s.add_argument("--ra", type=float, default=0.0)
            s.add_argument("--re", type=float, default=0.0)
        else:
            s.add_argument("--grid-ra", type=_ratio_list, default=list(GRID_R_A))
            s.add_argument("--grid-re", type=_ratio_list, default=list(GRID_R_E))
            s.add_argument("--format", choices=("csv", "json", "paper"), default="csv")
        s.set_defaults(func=func)

    s = sub.add_parser("power", help="amplifier power at a mask setting")
    s.add_argument("--amp", choices=sorted(AMPLIFIERS))
    s.add_argument("--ra", type=float, default=0.0)
    s.add_argument("--re", type=float, default=0.0)
    s.add_argument("--integrity", type=float, help="use this integrity instead of --ra/--re")
    s.set_defaults(func=cmd_power)

    s = sub.add_parser("describe", help="per-module parameter counts")
    s.add_argument("--config")
    s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    s.set_defaults(func=cmd_describe)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
