"""Command line: ``wfibp {generate,infer,perplexity,validate,export}``.

Exit codes: 0 success, 1 usage or input error, 2 validation-gate failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .io import RunManifest, SampleStore, ensure_dir, write_csv
from .topics import perplexity, read_jsonl

log = logging.getLogger("wfibp")


def _config(args, data_dir=None) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    elif data_dir is not None and (Path(data_dir) / "config.json").exists():
        cfg = load_config(Path(data_dir) / "config.json")
    else:
        cfg = RunConfig().validate()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _set_threads(n):
    if n is None:
        return
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def cmd_generate(args) -> int:
    from .pipeline import generate_dataset, write_dataset

    cfg = _config(args)
    ds = generate_dataset(cfg)
    write_dataset(ds, args.out, cfg)
    log.info("wrote %s dataset (%d times) to %s", ds.kind, len(ds.grid), args.out)
    return 0


def cmd_infer(args) -> int:
    from .pipeline import read_dataset, run_inference

    cfg = _config(args, args.data)
    ds = read_dataset(args.data, cfg)

    def progress(s):
        if s.iteration % max(1, cfg.checkpoint_every) == 0:
            log.info("iteration %d / %d", s.iteration, cfg.iterations)

    done = run_inference(cfg, ds, args.out, resume=not args.restart, progress=progress, data_dir=args.data,
                         max_steps=args.max_steps)
    if not done:
        log.info("stopped early; rerun the same command to resume from the checkpoint")
    return 0


def cmd_perplexity(args) -> int:
    from .pipeline import SCHEMA, perplexity_table, read_dataset

    out = ensure_dir(args.out)
    if args.run:
        if not args.test:
            raise ValueError("--run needs --test")
        samples = list(SampleStore(args.run))
        if not samples:
            raise ValueError(f"no samples in {args.run}")
        man = RunManifest.read(args.run)
        test = read_jsonl(args.test, D=man.config["topic"]["D"])
        value = perplexity(test, [(s.params["rho_hat"], s.params["theta_hat"]) for s in samples])
        rows = [["", "run", 0, value]]
    else:
        if not args.data:
            raise ValueError("give --data (holdout experiment) or --run with --test")
        cfg = _config(args, args.data)
        ds = read_dataset(args.data, cfg)
        fractions = args.fractions if args.fractions else cfg.holdout
        rows = perplexity_table(cfg, ds, fractions, compare_static=not args.no_static and cfg.K > 0,
                                replicates=args.replicates)
    write_csv(out / "perplexity.csv", SCHEMA["perplexity"], rows)
    for r in rows:
        log.info("fraction %s %s: perplexity %.3f", r[0], r[1], r[3])
    return 0


def cmd_validate(args) -> int:
    from .pipeline import run_suite, write_json

    seed = 0 if args.seed is None else args.seed
    passed, results = run_suite(args.suite, seed)
    if args.out:
        write_json(ensure_dir(args.out) / "validation.json", {"suite": args.suite, "seed": seed,
                                                              "passed": passed, "gates": results})
    for g, r in results.items():
        print(f"{g}: {'PASS' if r['passed'] else 'FAIL'}")
    return 0 if passed else 2


def cmd_export(args) -> int:
    from .pipeline import export_run

    export_run(args.run, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for compiled kernels")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wfibp", description="Wright-Fisher IBP simulation and inference")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="simulate a synthetic dataset")
    g.add_argument("--config")
    g.set_defaults(func=cmd_generate, needs_out=True)

    i = sub.add_parser("infer", parents=[common], help="run the sampler (resumes from a checkpoint)")
    i.add_argument("--config")
    i.add_argument("--data", required=True)
    i.add_argument("--restart", action="store_true", help="ignore an existing checkpoint")
    i.add_argument("--max-steps", type=int, default=None, help="stop after this many iterations (resumable)")
    i.set_defaults(func=cmd_infer, needs_out=True)

    q = sub.add_parser("perplexity", parents=[common], help="held-out perplexity table")
    q.add_argument("--config")
    q.add_argument("--data")
    q.add_argument("--run")
    q.add_argument("--test")
    q.add_argument("--fractions", type=float, nargs="+")
    q.add_argument("--replicates", type=int, default=1)
    q.add_argument("--no-static", action="store_true", help="skip the static baseline")
    q.set_defaults(func=cmd_perplexity, needs_out=True)

    v = sub.add_parser("validate", parents=[common], help="run a validation suite (exit 2 on failure)")
    v.add_argument("--suite", default="quick")
    v.set_defaults(func=cmd_validate, needs_out=False)

    e = sub.add_parser("export", parents=[common], help="plot-ready CSVs from a run directory")
    e.add_argument("--run", required=True)
    e.set_defaults(func=cmd_export, needs_out=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.needs_out and not args.out:
        print(f"wfibp {args.command}: --out is required", file=sys.stderr)
        return 1
    try:
        _set_threads(args.threads)
        return args.func(args)
    except (ConfigError, ValueError, KeyError, FileNotFoundError, OSError) as e:
        print(f"wfibp {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
