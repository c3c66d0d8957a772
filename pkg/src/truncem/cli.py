"""Command line: ``train``, ``infer``, ``generate`` and ``bars``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annealing import LinearAnnealing
from .bars import generate_bars
from .core import ConfigError, DataError, NumericalError, seeded_rng
from .em import run
from .io import (
    RunLogger,
    file_digest,
    load_dataset,
    load_params,
    param_shapes,
    read_manifest,
    save_array,
    save_csv,
    save_params,
    write_manifest,
)
from .models import make_model, model_from_config
from .parallel import ShardPlan, default_workers

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="truncem", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and write a run directory")
    t.add_argument("--model", required=True, choices=["bsc", "tsc", "dsc", "gsc", "mca", "mmca", "gmm", "pmm"])
    t.add_argument("--data", required=True)
    t.add_argument("--latents", type=int, required=True, help="H")
    t.add_argument("--hprime", type=int)
    t.add_argument("--gamma", type=int)
    t.add_argument("--iterations", type=int, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--values", type=_values, help="DSC latent alphabet, must include 0")
    t.add_argument("--symmetric", action="store_true", help="DSC: tie probabilities of v and -v")
    t.add_argument("--temp-max", type=float, default=1.0)
    t.add_argument("--temp-frac", type=float, default=0.5)
    t.add_argument("--w-noise", type=float, default=0.0)
    t.add_argument("--w-noise-end-frac", type=float, default=0.5)
    t.add_argument("--workers", type=int, default=None)
    t.add_argument("--shards", type=int, default=None, help="row shards (default: --workers)")
    t.add_argument("--tol", type=float, default=None)

    i = sub.add_parser("infer", help="most probable latents for data under a trained run")
    i.add_argument("--run", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--out", required=True, help="output prefix; writes PREFIX.s and PREFIX.p")

    g = sub.add_parser("generate", help="sample data from a trained run")
    g.add_argument("--run", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    b = sub.add_parser("bars", help="write a bars-test dataset")
    b.add_argument("--size", type=int, default=5)
    b.add_argument("--n", type=int, default=2000)
    b.add_argument("--prob", type=float, default=None)
    b.add_argument("--amplitude", type=float, default=10.0)
    b.add_argument("--noise", type=float, default=2.0)
    b.add_argument("--mode", choices=["linear", "max"], default="linear")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--truth")
    return p


def _save_data(path, y):
    if str(path).endswith(".csv"):
        save_csv(path, y)
    else:
        save_array(path, y)


def _schedules(args):
    T = None
    if args.temp_max != 1.0:
        if args.temp_max < 1.0 or not 0.0 < args.temp_frac <= 1.0:
            raise ConfigError("--temp-max must be >= 1 and --temp-frac in (0, 1]")
        T = [(0.0, args.temp_max), (args.temp_frac, 1.0)]
    noise = None
    if args.w_noise != 0.0:
        if args.w_noise < 0 or not 0.0 < args.w_noise_end_frac <= 1.0:
            raise ConfigError("--w-noise must be >= 0 and --w-noise-end-frac in (0, 1]")
        noise = [(0.0, args.w_noise), (args.w_noise_end_frac, 0.0)]
    return LinearAnnealing(args.iterations, T=T, w_noise=noise)


def cmd_train(args):
    if args.iterations < 1:
        raise ConfigError("--iterations must be >= 1")
    if args.model == "dsc" and args.values is None:
        raise ConfigError("--values is required for --model dsc")
    if args.model not in ("gmm", "pmm") and (args.hprime is None or args.gamma is None):
        raise ConfigError("--hprime and --gamma are required for truncated models")
    if args.hprime is not None and args.gamma is not None and args.gamma > args.hprime:
        raise ConfigError("--gamma must not exceed --hprime")
    anneal = _schedules(args)
    data = load_dataset(args.data, count=args.model == "pmm")
    model = make_model(args.model, data.D, args.latents, args.hprime, args.gamma,
                       values=args.values, symmetric=args.symmetric)
    workers = args.workers or default_workers()
    plan = ShardPlan.even(data.N, args.shards or workers, workers)
    params = model.standard_init(data, seeded_rng(args.seed))
    out = Path(args.out)
    logger = RunLogger(out)
    manifest = {
        "format": "truncem-run/1",
        "library_version": __version__,
        "model": model.config(),
        "annealing": anneal.as_dict(),
        "seed": args.seed,
        "rng": "numpy PCG64 via SeedSequence([seed]); W-noise stream SeedSequence([seed, 1])",
        "workers": workers,
        "shard_boundaries": list(plan.boundaries),
        "tol": args.tol,
        "data": {"path": str(Path(args.data).resolve()), "digest": file_digest(args.data),
                 "N": data.N, "D": data.D, "kind": data.kind},
        "trace": "free_energy.csv",
        "status": "running",
    }
    write_manifest(out / "manifest.json", manifest)
    try:
        result = run(model, params, data, anneal, logger=logger, tol=args.tol, plan=plan,
                     rng=seeded_rng(args.seed).spawn(1))
    except NumericalError as exc:
        manifest["status"] = f"aborted: {exc}"
        write_manifest(out / "manifest.json", manifest)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    names = save_params(out / "params", result.params)
    manifest.update({
        "status": "finished",
        "iterations_run": result.iterations_run,
        "params": {"dir": "params", "files": names, "shapes": param_shapes(result.params)},
    })
    write_manifest(out / "manifest.json", manifest)
    return EXIT_OK


def _load_run(run_dir):
    run_dir = Path(run_dir)
    try:
        manifest = read_manifest(run_dir / "manifest.json")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read run manifest in {run_dir}: {exc}") from None
    if manifest.get("status") != "finished":
        raise ConfigError(f"run in {run_dir} did not finish")
    model = model_from_config(manifest["model"])
    params = load_params(run_dir / manifest["params"]["dir"], manifest["params"]["shapes"])
    return manifest, model, params


def cmd_infer(args):
    manifest, model, params = _load_run(args.run)
    data = load_dataset(args.data, count=model.data_kind == "count")
    if data.D != model.D:
        raise DataError(f"data has D={data.D}, run was trained with D={model.D}")
    res = model.inference(params, data)
    save_array(f"{args.out}.s", res["s"])
    save_array(f"{args.out}.p", res["p"])
    return EXIT_OK


def cmd_generate(args):
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    _, model, params = _load_run(args.run)
    sample = model.generate(params, args.n, seeded_rng(args.seed))
    _save_data(args.out, sample["y"])
    return EXIT_OK


def cmd_bars(args):
    y, _, W = generate_bars(args.size, args.n, args.prob, args.amplitude, args.noise, args.mode, args.seed)
    _save_data(args.out, y)
    if args.truth:
        save_array(args.truth, W)
    return EXIT_OK


COMMANDS = {"train": cmd_train, "infer": cmd_infer, "generate": cmd_generate, "bars": cmd_bars}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
