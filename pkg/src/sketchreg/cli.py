"""Command-line front end: ``sketchreg {fit,bounds,simulate,reproduce,project}``.

Every command accepts ``--config FILE`` with ``key=value`` lines naming any
flag (``d-grid=1..15``); flags given on the command line win.  The seed is
taken from ``--seed``, then the config file, then ``$SKETCHREG_SEED``,
then 0.  Exit status is 0 on success, 2 on usage errors and 1 on runtime
errors.
"""

import argparse
import datetime
import os
import sys

import numpy as np

from . import _io
from .design import DesignMatrix, NoiseModel, Spectrum, center, load_csv, synthetic_design
from .errors import SketchRegError
from .estimators import (
    aclse_fit,
    clse_fit,
    ols_fit,
    ridge_fit,
    row_compressed_ols,
    select_dim_cv,
)
from .montecarlo import McConfig, content_hash, empirical_mse, estimate_eta, estimate_tau, reproduce_figure, write_result
from .projections import FAMILIES, ProjectionSpec, apply_columns, apply_rows, sample_projection
from .theory import matched_ridge_penalty, ridge_mse, theorem1_bound, theorem2_bound, theorem4_bound

SEED_ENV = "SKETCHREG_SEED"
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


class _UsageError(Exception):
    pass


def parse_range(text):
    """``"a..b"`` (inclusive), ``"a,b,c"`` or ``"a"`` to a tuple of ints."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        values = tuple(int(t) for t in text.split(",") if t.strip())
        if not values:
            raise ValueError
        return values
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer range {text!r}; use a..b or a,b,c") from None


def _seed(text):
    try:
        value = int(str(text), 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None,
                        help=f"base random seed (unsigned 64-bit integer; default ${SEED_ENV} or 0)")
    common.add_argument("--config", metavar="FILE", help="key=value file supplying any flag")
    common.add_argument("--threads", type=_positive_int, default=1,
                        help="worker threads (count); results do not depend on it")

    parser = argparse.ArgumentParser(prog="sketchreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    fit = sub.add_parser("fit", parents=[common], help="fit a regression to a CSV file")
    fit.add_argument("--input", required=True, metavar="CSV", help="predictors then response, comma separated")
    fit.add_argument("--output", required=True, metavar="CSV", help="coefficients, one per row (+ .meta sidecar)")
    fit.add_argument("--method", choices=("ols", "ridge", "clse", "aclse", "row"), default="clse",
                     help="estimator (default clse)")
    fit.add_argument("--d", type=_positive_int, help="projection dimension for clse/aclse (count of columns)")
    fit.add_argument("--cv-grid", type=parse_range, help="choose d by cross-validation over this grid (a..b)")
    fit.add_argument("--folds", type=_positive_int, default=5, help="cross-validation folds (count, default 5)")
    fit.add_argument("--K", type=_positive_int, default=100, help="projections averaged by aclse (count, default 100)")
    fit.add_argument("--m", type=_positive_int, help="compressed sample size for row (count of rows)")
    fit.add_argument("--lambda", dest="lam", type=float, default=0.0,
                     help="ridge penalty (units of squared response per squared coefficient, default 0)")
    fit.add_argument("--family", choices=[f for f in FAMILIES if f != "explicit"], default="gaussian",
                     help="projection family (default gaussian)")
    fit.add_argument("--density", type=float, help="nonzero probability for the sparse family (fraction in (0,1])")
    fit.add_argument("--has-header", action="store_true", help="skip the first CSV row")
    fit.add_argument("--no-center", action="store_true", help="fit on raw columns instead of centered ones")
    fit.add_argument("--pinv", action="store_true", help="minimum-norm solution for singular Gram matrices")

    bounds = sub.add_parser("bounds", parents=[common], help="evaluate MSE bounds over a d grid")
    bounds.add_argument("--spectrum", required=True, metavar="CSV", help="Gram eigenvalues, one per row, non-increasing")
    bounds.add_argument("--beta", required=True, metavar="CSV", help="coefficients in the PC basis, one per row")
    bounds.add_argument("--sigma2", type=float, required=True, help="noise variance (squared response units)")
    bounds.add_argument("--d", dest="d_grid", type=parse_range, required=True, help="projection dimensions (a..b)")
    bounds.add_argument("--eta-samples", type=int, default=0,
                        help="Monte Carlo draws for tau (count); 0 uses the worst case tau = d")
    bounds.add_argument("--output", required=True, metavar="CSV",
                        help="columns d,thm1,thm2,thm4,ridge_at_matched_lambda")

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo MSE of an estimator")
    src = sim.add_mutually_exclusive_group()
    src.add_argument("--input", metavar="CSV", help="design matrix file (last column ignored)")
    src.add_argument("--design", choices=("identity", "inverse_index", "spiked"), default="inverse_index",
                     help="synthetic diagonal covariance (default inverse_index)")
    sim.add_argument("--has-header", action="store_true", help="skip the first CSV row of --input")
    sim.add_argument("--p", type=_positive_int, default=20, help="variables for --design (count, default 20)")
    sim.add_argument("--n", type=_positive_int, default=40, help="samples for --design (count, default 40)")
    sim.add_argument("--scale", type=float, default=1.0, help="covariance scale C for --design (default 1)")
    sim.add_argument("--spike-d", type=_positive_int, default=5, help="leading unit variances of spiked (count)")
    sim.add_argument("--eps", type=float, default=1e-6, help="trailing variance of spiked (default 1e-6)")
    sim.add_argument("--beta", metavar="CSV", help="true coefficients, one per row (default all ones)")
    sim.add_argument("--beta-value", type=float, default=1.0, help="constant true coefficient if --beta is absent")
    sim.add_argument("--sigma2", type=float, default=0.0, help="noise variance (squared response units)")
    sim.add_argument("--method", choices=("ols", "ridge", "clse", "aclse", "row_ols"), default="clse",
                     help="estimator (default clse)")
    sim.add_argument("--d", dest="d_grid", type=parse_range, default=(1, 2, 3, 4, 5),
                     help="projection dimensions, or m for row_ols (a..b)")
    sim.add_argument("--K", type=_positive_int, default=100, help="projections per averaged estimator (count)")
    sim.add_argument("--lambda", dest="lam", type=float, help="ridge penalty")
    sim.add_argument("--family", choices=[f for f in FAMILIES if f != "explicit"], default="gaussian",
                     help="projection family (default gaussian)")
    sim.add_argument("--density", type=float, help="sparse family density (fraction)")
    sim.add_argument("--M", type=_positive_int, default=2000, help="projection draws (count, default 2000)")
    sim.add_argument("--R", type=_positive_int, default=500, help="noise draws per projection (count, default 500)")
    sim.add_argument("--replicates", type=_positive_int, default=200,
                     help="averaged-estimator or OLS/ridge replicates (count, default 200)")
    sim.add_argument("--eta-samples", type=_positive_int, default=20000,
                     help="draws for eta/tau theory columns (count, default 20000)")
    sim.add_argument("--output", required=True, metavar="CSV", help="one row per d")

    rep = sub.add_parser("reproduce", parents=[common], help="regenerate a figure's series as CSV")
    rep.add_argument("--figure", choices=("fig1", "fig2", "fig3"), required=True, help="which figure")
    rep.add_argument("--output-dir", default=".", metavar="DIR", help="directory for <figure>_<panel>.csv files")
    rep.add_argument("--d", dest="d_grid", type=parse_range, default=tuple(range(1, 16)),
                     help="projection dimensions (a..b, default 1..15)")
    rep.add_argument("--p", type=_positive_int, default=20, help="variables (count, default 20)")
    rep.add_argument("--M", type=_positive_int, default=20000, help="draws for eta/tau (count, default 20000)")
    rep.add_argument("--draws", type=_positive_int, default=2000,
                     help="projection draws for single-estimator MSE in fig2 (count, default 2000)")
    rep.add_argument("--R", type=_positive_int, default=500, help="noise draws (count, default 500)")
    rep.add_argument("--K", type=_positive_int, default=100, help="projections per averaged estimator (count)")
    rep.add_argument("--replicates", type=_positive_int, default=200, help="averaged-estimator replicates (count)")

    proj = sub.add_parser("project", parents=[common], help="write a randomly projected copy of a CSV file")
    proj.add_argument("--input", required=True, metavar="CSV", help="predictors then response")
    proj.add_argument("--output", required=True, metavar="CSV", help="projected predictors then response")
    proj.add_argument("--role", choices=("columns", "rows"), default="columns",
                      help="compress variables (p -> d) or samples (n -> d)")
    proj.add_argument("--d", type=_positive_int, required=True, help="output dimension (count)")
    proj.add_argument("--family", choices=[f for f in FAMILIES if f != "explicit"], default="gaussian",
                      help="projection family (default gaussian)")
    proj.add_argument("--density", type=float, help="sparse family density (fraction)")
    proj.add_argument("--has-header", action="store_true", help="skip the first CSV row")
    return parser


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _preparse(argv):
    """``(command, config path)`` from ``argv`` without validating anything else."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.command, known.config


def _apply_config(parser, command, path):
    """Install the key=value file at ``path`` as defaults of ``command``."""
    sub = _subparser(parser, command)
    try:
        with open(path) as fh:
            values = _io.parse_keyvalue(fh.read())
    except OSError as exc:
        raise SketchRegError(f"cannot read config file {path}: {exc}") from exc
    by_dest = {}
    for action in sub._actions:
        for opt in action.option_strings:
            by_dest[opt.lstrip("-")] = action
            by_dest[opt.lstrip("-").replace("-", "_")] = action
        by_dest.setdefault(action.dest, action)
    defaults = {}
    for key, raw in values.items():
        action = by_dest.get(key)
        if action is None or action.dest in ("help", "config"):
            raise _UsageError(f"unknown key {key!r} in config file {path}")
        if isinstance(action, argparse._StoreTrueAction):
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise _UsageError(f"key {key!r} expects true/false, got {raw!r}")
            defaults[action.dest] = low in _TRUE
        else:
            defaults[action.dest] = raw
        action.required = False
    sub.set_defaults(**defaults)


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return _seed(env)
        except argparse.ArgumentTypeError as exc:
            raise _UsageError(f"${SEED_ENV}: {exc}") from None
    return 0


def _echo(args):
    skip = {"command", "config"}
    fields = {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}
    print(f"sketchreg {args.command}: seed={args.seed}", file=sys.stderr)
    for key, value in fields.items():
        if key != "seed":
            print(f"  {key}={value}", file=sys.stderr)


def _read_vector(path):
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=1)
    except ValueError as exc:
        raise SketchRegError(f"{path}: {exc}") from exc
    return np.asarray(data, dtype=float).ravel()


def _provenance(args):
    meta = {"command": args.command, "seed": args.seed, "threads": args.threads}
    meta["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return meta


def _cmd_fit(args):
    x, y = load_csv(args.input, has_header=args.has_header)
    if not args.no_center:
        x = center(x)
        y = y - y.mean()
    p, n = x.p, x.n
    extra = {}
    if args.method == "ols":
        res = ols_fit(x, y, pinv=args.pinv)
    elif args.method == "ridge":
        res = ridge_fit(x, y, args.lam)
    elif args.method in ("clse", "aclse"):
        d = args.d
        if args.cv_grid:
            template = ProjectionSpec(args.family, p, max(args.cv_grid), args.seed, args.density)
            report = select_dim_cv(x, y, template, args.cv_grid, folds=args.folds)
            d = report.chosen_d
            extra = {"cv_grid": list(report.grid), "cv_chosen_d": report.chosen_d,
                     "cv_one_se_d": report.one_se_d}
        if d is None:
            raise _UsageError(f"--method {args.method} needs --d or --cv-grid")
        spec = ProjectionSpec(args.family, p, d, args.seed, args.density)
        if args.method == "clse":
            res = clse_fit(x, y, spec)
        else:
            res = aclse_fit(x, y, spec, args.K, threads=args.threads)
    else:
        if args.m is None:
            raise _UsageError("--method row needs --m")
        res = row_compressed_ols(x, y, ProjectionSpec(args.family, n, args.m, args.seed, args.density),
                                 pinv=args.pinv)
    meta = {**res.provenance(), **extra, **_provenance(args),
            "centered": not args.no_center, "input": args.input}
    _io.atomic_write_text(args.output, res.to_csv())
    _io.atomic_write_text(_io.sidecar_path(args.output), _io.dump_keyvalue(meta))


def _cmd_bounds(args):
    lam = _read_vector(args.spectrum)
    beta = _read_vector(args.beta)
    spectrum = Spectrum(lam)
    noise = NoiseModel(args.sigma2)
    rows, matched = [], []
    for d in args.d_grid:
        if args.eta_samples:
            from .projections import substream_seed

            tau = estimate_tau(estimate_eta(spectrum, d, args.eta_samples, substream_seed(args.seed, d),
                                            threads=args.threads))
        else:
            tau = float(d)
        penalty = matched_ridge_penalty(spectrum, d)
        matched.append(penalty)
        rows.append([
            d,
            theorem1_bound(spectrum, beta, noise, d).total,
            theorem2_bound(spectrum, beta, noise, d).total,
            theorem4_bound(spectrum, beta, noise, d, tau).total,
            ridge_mse(spectrum, beta, noise, penalty).total,
        ])
    _io.atomic_write_text(args.output, _io.table_to_csv(
        ("d", "thm1", "thm2", "thm4", "ridge_at_matched_lambda"), rows))
    meta = {**_provenance(args), "sigma2": args.sigma2, "eta_samples": args.eta_samples,
            "tau": "estimated" if args.eta_samples else "upper bound d",
            "matched_lambda": matched, "content_hash": content_hash(lam, beta)}
    _io.atomic_write_text(_io.sidecar_path(args.output), _io.dump_keyvalue(meta))


def _cmd_simulate(args):
    if args.input:
        x, _ = load_csv(args.input, has_header=args.has_header)
        x = center(x)
        inputs = (x.values,)
    else:
        x, _ = synthetic_design(args.design, args.n, args.p, d=args.spike_d if args.design == "spiked" else None,
                                eps=args.eps if args.design == "spiked" else None, scale=args.scale)
        inputs = ()
    beta = _read_vector(args.beta) if args.beta else np.full(x.p, args.beta_value)
    config = McConfig(num_projection_samples=args.M, num_noise_reps=args.R, base_seed=args.seed,
                      d_grid=tuple(args.d_grid) if args.method != "ols" and args.method != "ridge" else (1,),
                      K_grid=(args.K,), num_replicates=args.replicates, num_eta_samples=args.eta_samples)
    result = empirical_mse(x, beta, args.sigma2, args.method, config, K=args.K, lam=args.lam,
                           family=args.family, density=args.density, threads=args.threads)
    write_result(result, args.output, _provenance(args), inputs=(*inputs, beta))


def _cmd_reproduce(args):
    config = McConfig(num_projection_samples=args.draws, num_noise_reps=args.R, base_seed=args.seed,
                      d_grid=tuple(args.d_grid), K_grid=(args.K,), num_replicates=args.replicates,
                      num_eta_samples=args.M)
    panels = reproduce_figure(args.figure, config, p=args.p, threads=args.threads)
    os.makedirs(args.output_dir, exist_ok=True)
    for panel, result in panels.items():
        path = os.path.join(args.output_dir, f"{args.figure}_{panel}.csv")
        write_result(result, path, _provenance(args))
        print(path, file=sys.stderr)


def _cmd_project(args):
    x, y = load_csv(args.input, has_header=args.has_header)
    if args.role == "columns":
        spec = ProjectionSpec(args.family, x.p, args.d, args.seed, args.density)
        px, py = apply_columns(sample_projection(spec), x), y
    else:
        spec = ProjectionSpec(args.family, x.n, args.d, args.seed, args.density)
        px, py = apply_rows(sample_projection(spec), x, y)
    table = np.hstack([px, py.reshape(-1, 1)])
    _io.atomic_write_text(args.output, "".join(",".join(_io.format_float(v) for v in row) + "\n" for row in table))
    meta = _io.parse_keyvalue(spec.to_text())
    meta.update({"role": args.role, **_provenance(args)})
    _io.atomic_write_text(_io.sidecar_path(args.output), _io.dump_keyvalue(meta))


COMMANDS = {
    "fit": _cmd_fit,
    "bounds": _cmd_bounds,
    "simulate": _cmd_simulate,
    "reproduce": _cmd_reproduce,
    "project": _cmd_project,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        command, config = _preparse(argv)
        if config and command in COMMANDS:
            _apply_config(parser, command, config)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        args.seed = _resolve_seed(args)
        _echo(args)
        COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sketchreg: error: {exc}", file=sys.stderr)
        return 2
    except (SketchRegError, OSError, ValueError) as exc:
        print(f"sketchreg: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
