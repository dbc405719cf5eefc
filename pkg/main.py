"""
confband - Conformal Prediction Regions and Bands
Entry point with all commands
"""
import argparse
import sys
from typing import Any, Dict, List, Optional


def _add_run_args(parser: argparse.ArgumentParser):
    parser.add_argument("--input", required=True, help="CSV (multi) or YAML/JSON (fd) input")
    parser.add_argument("--output", help="Result document path (stdout when omitted)")
    parser.add_argument("--alpha", type=float, help="Miscoverage level in (0, 1)")
    parser.add_argument("--model", help="mean | ols | ridge (multi), mean | concurrent (fd)")
    parser.add_argument("--ridge-lambda", type=float, help="Ridge penalty")
    parser.add_argument("--score", choices=["l2", "mahalanobis", "max"],
                        help="Multivariate nonconformity score")
    parser.add_argument("--s-type", choices=["identity", "st-dev", "alpha-max"],
                        help="Modulation function")
    parser.add_argument("--response-cols", help="Comma-separated response columns (multi)")
    parser.add_argument("--seed", type=int, help="Split seed")
    parser.add_argument("--split", type=int, nargs="+", help="Explicit 0-based training indices")
    parser.add_argument("--rho", type=float, nargs="+",
                        help="Training fraction (one per msplit replicate, or one shared)")
    parser.add_argument("--randomized", action="store_true", help="Smoothed split conformal")
    parser.add_argument("--seed-rand", type=int, help="Seed of the smoothing draw")
    parser.add_argument("--B", type=int, dest="B", help="Multi-split replicates")
    parser.add_argument("--tau", type=float, help="Multi-split joining fraction")
    parser.add_argument("--lambda", type=float, dest="lam", help="Multi-split smoothing")
    parser.add_argument("--grid-pts", type=int, dest="num_grid_pts_dim",
                        help="Full conformal candidates per dimension")
    parser.add_argument("--grid-factor", type=float, help="Full conformal grid half-width factor")
    parser.add_argument("--threads", type=int, help="Worker threads (default: all cores)")
    parser.add_argument("--verbose", action="store_true", help="Trace every method step")


_RUN_FIELDS = ("input", "output", "model", "ridge_lambda", "alpha", "score", "s_type", "seed",
               "split", "rho", "seed_rand", "B", "tau", "lam", "num_grid_pts_dim",
               "grid_factor", "threads")


def _run_kwargs(args: argparse.Namespace) -> Dict[str, Any]:
    from confband.config import config

    kwargs = {k: getattr(args, k) for k in _RUN_FIELDS if getattr(args, k, None) is not None}
    kwargs.setdefault("alpha", config.get("alpha", 0.1))
    if kwargs.get("model") is None:
        kwargs["model"] = "mean"
    if getattr(args, "response_cols", None):
        kwargs["response_cols"] = [c.strip() for c in args.response_cols.split(",") if c.strip()]
    kwargs["randomized"] = args.randomized
    kwargs["verbose"] = args.verbose
    if "lam" in kwargs:
        kwargs["lambda"] = kwargs.pop("lam")
    return kwargs


def _setup(threads: Optional[int], verbose: bool):
    from confband.config import config
    from confband.core.logger import logger
    from confband.core.parallel import set_threads

    logger.set_console_level(config.get("logging.level", "INFO"))
    if verbose:
        logger.set_verbose(True)
    log_file = config.get("logging.file")
    if log_file:
        logger.add_log_file(log_file)
    set_threads(threads)


def cmd_run(args: argparse.Namespace) -> int:
    """Run one conformal method and emit its result document."""
    from confband.io.output import dumps
    from confband.io.runner import run
    from confband.types import RunConfig

    cfg = RunConfig(mode=args.mode, method=args.method, plot=args.plot, **_run_kwargs(args))
    _setup(cfg.threads, cfg.verbose)
    doc = run(cfg)
    if not cfg.output:
        sys.stdout.write(dumps(doc))
    return 0


def _carrier_method(methods: List[str], kwargs: Dict[str, Any]) -> str:
    """The method whose flag set the shared RunConfig is validated against."""
    from confband.core.errors import BadConfig

    grid = any(k in kwargs for k in ("num_grid_pts_dim", "grid_factor"))
    replicates = any(k in kwargs for k in ("B", "tau", "lambda"))
    if grid and replicates:
        raise BadConfig("evaluate full and msplit flags in separate runs")
    wanted = "full" if grid else "msplit" if replicates else methods[0]
    if wanted not in methods:
        raise BadConfig(f"flags given for {wanted}, which is not being evaluated")
    return wanted


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Leave-one-out comparison of one or more methods."""
    import json

    from confband.analysis.evaluate import evaluate
    from confband.core.logger import logger
    from confband.io.ingest import ingest_functional, ingest_tabular
    from confband.types import Mode, RunConfig

    kwargs = _run_kwargs(args)
    cfg = RunConfig(mode=args.mode, method=_carrier_method(args.methods, kwargs), **kwargs)
    _setup(cfg.threads, cfg.verbose)

    if cfg.mode == Mode.FD:
        inp = ingest_functional(cfg.input)
        report = evaluate(cfg, inp.dataset, x=inp.x, methods=args.methods)
    else:
        inp = ingest_tabular(cfg.input, cfg.response_cols)
        report = evaluate(cfg, inp.dataset, methods=args.methods)

    logger.eval_report([r.model_dump() for r in report.rows], cfg.alpha)
    text = json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    from confband.demo.synthetic import generate

    generate(args.kind, args.output, args.n, args.seed, args.n_test)
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    from confband.demo.synthetic import run_demo

    _setup(args.threads, args.verbose)
    run_demo(seed=args.seed)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    """Re-run the configuration echoed in a result document."""
    from confband.core.logger import logger
    from confband.io.output import dumps, load_run_config, read_document
    from confband.io.runner import run

    original = read_document(args.result)
    cfg = load_run_config(original)
    _setup(args.threads if args.threads is not None else cfg.threads, cfg.verbose)
    doc = run(cfg.model_copy(update={"output": None, "plot": None}))
    if doc == original:
        logger.info("Replay reproduced the original results")
    else:
        logger.warning("Replay differs from the original results")
    text = dumps(doc)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0 if doc == original else 1


def build_parser() -> argparse.ArgumentParser:
    from confband.config import config

    parser = argparse.ArgumentParser(
        prog="conformal",
        description=f"confband v{config.get('version', '0.1.0')} - conformal prediction "
                    "regions for multivariate and functional responses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for mode, methods in (("multi", ["full", "split", "msplit", "jackplus", "jackknife"]),
                          ("fd", ["split", "msplit", "jackplus"])):
        p = sub.add_parser(mode, help=f"Prediction regions ({mode})")
        p.add_argument("method", choices=methods)
        p.add_argument("--plot", help="SVG plot path")
        _add_run_args(p)
        p.set_defaults(handler=cmd_run, mode=mode)

    p = sub.add_parser("evaluate", help="Leave-one-out evaluation")
    p.add_argument("mode", choices=["multi", "fd"])
    p.add_argument("methods", nargs="+",
                   choices=["full", "split", "msplit", "jackplus", "jackknife"])
    _add_run_args(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("generate", help="Write a synthetic dataset")
    p.add_argument("kind", choices=["linear", "counts", "flows"])
    p.add_argument("--output", required=True)
    p.add_argument("--n", type=int, default=41)
    p.add_argument("--n-test", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("demo", help="Compare every method on synthetic data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=cmd_demo)

    p = sub.add_parser("replay", help="Re-run the configuration of a result document")
    p.add_argument("result")
    p.add_argument("--output")
    p.add_argument("--threads", type=int)
    p.set_defaults(handler=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    from confband.core.errors import ConformalError

    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConformalError as e:
        sys.stderr.write(e.cli_line() + "\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(f"IOError: {e}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
