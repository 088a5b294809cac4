# scripts/bnb_cli.py
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from bnbar.engine.dynamics import (
    ALL_FAMILIES,
    ModelSpec,
    check_strict_stationarity,
    check_weak_stationarity,
)
from bnbar.engine.simulation import DEFAULT_BURN_IN, lookalike_fixture, simulate
from bnbar.estimation.likelihood import filter_series
from bnbar.estimation.mle import FitOptions, compare, fit, fit_all
from bnbar.estimation.montecarlo import (
    DEFAULT_REPS,
    DEFAULT_T_GRID,
    MC_FIT_OPTIONS,
    PRESETS,
    REPORT_PARAMS,
    McDesign,
    preset_spec,
    run_mc,
    score_curve,
)
from bnbar.helpers.errors import (
    FilterError,
    MomentUndefinedError,
    NonStationaryError,
    ParameterDomainError,
    SeriesFormatError,
    SeriesMismatchError,
    TruncationError,
)
from bnbar.helpers.series_io import read_series, write_json, write_series_csv, write_table_csv

logger = logging.getLogger("bnbar.cli")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DOMAIN = 2
EXIT_NUMERIC = 3

# never echoed: output locations and knobs that change wall time but not results
_NOT_ECHOED = {"func", "verbose", "workers", "out", "meta_out", "json_out", "filtered_out"}


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1); 2 is reserved for domain refusals."""
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# -----------------------------
# Shared flag groups
# -----------------------------
def _add_spec_flags(ap: argparse.ArgumentParser, require_model: bool = True) -> None:
    ap.add_argument("--model", choices=ALL_FAMILIES, required=require_model)
    ap.add_argument("--r", type=float, help="dispersion r > 0")
    ap.add_argument("--alpha", type=float, help="tail parameter alpha > 1 (BNB only)")
    level = ap.add_mutually_exclusive_group()
    level.add_argument("--omega", type=float)
    level.add_argument("--delta", type=float, help="unconditional mean; omega is derived")
    ap.add_argument("--phi", type=float)
    ap.add_argument("--tau", type=float)


def _spec_from_args(args: argparse.Namespace) -> ModelSpec:
    missing = [n for n in ("r", "phi", "tau") if getattr(args, n) is None]
    if args.omega is None and args.delta is None:
        missing.append("omega|delta")
    if args.model.startswith("bnb") and args.alpha is None:
        missing.append("alpha")
    if missing:
        raise ValueError(f"missing model flags: {', '.join('--' + m for m in missing)}")
    return ModelSpec.build(
        args.model,
        r=args.r,
        phi=args.phi,
        tau=args.tau,
        alpha=args.alpha,
        omega=args.omega,
        delta=args.delta,
    )


def _config(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _emit_json(obj: Dict[str, Any], out: Optional[str]) -> None:
    if out:
        write_json(out, obj)
    else:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _float_list(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


# -----------------------------
# Subcommands
# -----------------------------
def cmd_simulate(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    path = simulate(spec, args.T, args.burn_in, args.seed, allow_nonstationary=args.force)
    config = _config(args)
    write_series_csv(args.out, path.y, path.lam, "lambda", config)
    meta = {"config": config, **path.metadata()}
    write_json(args.meta_out or f"{args.out}.meta.json", meta)
    print(f"Wrote {args.out} with {len(path)} rows.")
    return EXIT_OK


def _fit_options(args: argparse.Namespace) -> FitOptions:
    return FitOptions(n_restarts=args.restarts, seed=args.seed, lambda_init=args.lambda_init, n_jobs=args.workers)


def cmd_fit(args: argparse.Namespace) -> int:
    y = read_series(args.series)
    options = _fit_options(args)
    config = _config(args)

    if args.compare == "all":
        fits = fit_all(y, options)
        ranking = compare(fits)
        best = next(f for f in fits if f.family == ranking[0].model)
        doc = {
            "config": config,
            "fits": [f.to_dict() for f in fits],
            "ranking": [row.to_dict() for row in ranking],
        }
        _emit_json(doc, args.out)
        table = sys.stdout if args.out else sys.stderr
        print(f"{'rank':>4}  {'model':<12} {'k':>2} {'loglik':>12} {'AIC':>12} {'dAIC':>9}", file=table)
        for row in ranking:
            print(f"{row.rank:>4}  {row.model:<12} {row.k:>2} {row.loglik:>12.2f} {row.aic:>12.2f} {row.delta_aic:>9.2f}",
                  file=table)
    else:
        best = fit(args.model, y, options)
        _emit_json({"config": config, **best.to_dict()}, args.out)

    if args.filtered_out:
        flt = filter_series(best.spec, y, best.lambda_init)
        write_series_csv(args.filtered_out, y, flt.lambda_hat, "lambda_hat", {**config, "filtered_model": best.family})
    return EXIT_OK


def cmd_mc(args: argparse.Namespace) -> int:
    if args.preset:
        spec = preset_spec(args.preset)
    else:
        if args.model is None:
            raise ValueError("give --preset or a full set of model flags")
        spec = _spec_from_args(args)
    options = FitOptions(n_restarts=args.restarts, seed=0, n_jobs=1)
    params = REPORT_PARAMS if spec.alpha is not None else tuple(p for p in REPORT_PARAMS if p != "inv_alpha")
    design = McDesign(
        spec=spec,
        T_grid=tuple(_int_list(args.T_grid)),
        n_reps=args.reps,
        base_seed=args.seed,
        burn_in=args.burn_in,
        report_params=params,
        fit_options=options,
    )
    report = run_mc(design, n_jobs=args.workers)
    config = {**_config(args), "design": design.to_dict()}
    report.to_csv(args.out, config)
    if args.json_out:
        report.to_json(args.json_out, config)
    if report.flagged:
        logger.warning("%d replications failed", report.failure_count)
    print(f"Wrote {args.out}: {len(report.cells)} cells, {report.failure_count} failed replications.")
    return EXIT_OK


def cmd_score_curve(args: argparse.Namespace) -> int:
    points = score_curve(_float_list(args.alpha), args.r, args.lam, args.y_max)
    write_table_csv(args.out, ["alpha", "y", "s"], ((p.alpha, p.y, p.score) for p in points), _config(args))
    print(f"Wrote {args.out} with {len(points)} rows.")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    doc = {
        "config": _config(args),
        "model": spec.name,
        "delta": spec.delta,
        "strict": check_strict_stationarity(spec).to_dict(),
        "weak": check_weak_stationarity(spec).to_dict(),
    }
    _emit_json(doc, args.out)
    return EXIT_OK


def cmd_fixture(args: argparse.Namespace) -> int:
    path = lookalike_fixture(args.seed)
    config = _config(args)
    write_series_csv(args.out, path.y, None, config={**config, "note": path.note})
    write_json(args.meta_out or f"{args.out}.meta.json", {"config": config, **path.metadata()})
    print(f"Wrote {args.out} ({path.note}).")
    return EXIT_OK


# -----------------------------
# Entry point
# -----------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bnbar", description="Beta-negative-binomial count autoregressions.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug (stderr)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a path to CSV (t,y,lambda)")
    _add_spec_flags(p)
    p.add_argument("--T", dest="T", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--force", action="store_true", help="simulate even if the stationarity check fails")
    p.add_argument("--out", required=True)
    p.add_argument("--meta-out", default=None, help="metadata JSON (default: <out>.meta.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum likelihood fit of a series")
    p.add_argument("--series", required=True)
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--model", choices=ALL_FAMILIES)
    which.add_argument("--compare", choices=["all"], default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--lambda-init", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="JSON output (default: stdout)")
    p.add_argument("--filtered-out", default=None, help="CSV t,y,lambda_hat for the (best) fitted model")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mc", help="Monte Carlo parameter recovery study")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    _add_spec_flags(p, require_model=False)
    p.add_argument("--T-grid", default=",".join(str(T) for T in DEFAULT_T_GRID))
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("--restarts", type=int, default=MC_FIT_OPTIONS.n_restarts)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("score-curve", help="score innovation s(y) for several alpha")
    p.add_argument("--alpha", default="1.5,2,5,10,100", help="comma separated alpha values")
    p.add_argument("--r", type=float, default=10.0)
    p.add_argument("--lam", type=float, default=10.0)
    p.add_argument("--y-max", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score_curve)

    p = sub.add_parser("check", help="strict and weak stationarity diagnostics")
    _add_spec_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("fixture", help="write the synthetic look-alike series (NOT real data)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--meta-out", default=None)
    p.set_defaults(func=cmd_fixture)

    return ap


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)

    try:
        return args.func(args)
    except SeriesFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (NonStationaryError, ParameterDomainError, MomentUndefinedError, SeriesMismatchError) as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except (TruncationError, FilterError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
