"""Command-line entry point.

Every subcommand writes machine records to the output stream (stdout unless
``--output`` is given) and diagnostics to stderr.  JSON output is one object
per line and every object carries the command name and its fully resolved
parameters under ``"params"``; CSV output starts with a ``#`` comment line
holding the same parameters.  Any flag can also be set through an environment
variable named ``TRAPWALK_<FLAG>`` (upper case, dashes as underscores);
explicit flags win.

Exit codes: 0 on success, 2 on invalid input, 3 when a numerical guarantee
could not be met.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .env import GapLaw, compute_records, sample_environment
from .errors import NumericalGuaranteeError, ValidationError
from .limit import LimitParams, limit_tail_cdf, sample_limit_many
from .periodic import PeriodicSpec, confinement_rate, phi_homogeneous, phi_periodic
from .stats import ExperimentConfig, convergence_experiment, records_statistics, report_to_csv
from .survival import (
    SurvivalParams,
    confined_survival_probability,
    fkg_compare,
    lambda_sequence,
    lambda_two_sided,
    survival_for_seed,
)

ENV_PREFIX = "TRAPWALK_"


def sci_int(text) -> int:
    """Parse integers written plainly or in scientific notation (``1e5``)."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if not math.isfinite(value) or value != int(value):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def int_list(text) -> list[int]:
    return [sci_int(t) for t in str(text).split(",") if t.strip()]


def float_list(text) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


# -- output -----------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


class Emitter:
    def __init__(self, stream, fmt, command, params):
        self.stream = stream
        self.fmt = fmt
        self.command = command
        self.params = params
        self._writer = None

    def record(self, rec: dict):
        rec = {k: _jsonable(v) for k, v in rec.items()}
        if self.fmt == "json":
            out = {**rec, "command": self.command, "params": self.params}
            self.stream.write(json.dumps(out) + "\n")
            return
        if self._writer is None:
            self.stream.write("# " + json.dumps({"command": self.command, "params": self.params}) + "\n")
            self._writer = csv.DictWriter(self.stream, fieldnames=list(rec.keys()), lineterminator="\n")
            self._writer.writeheader()
        self._writer.writerow(rec)


# -- subcommands ------------------------------------------------------------


def _law(args) -> GapLaw:
    return GapLaw(args.gamma, args.law)


def cmd_sample_env(args, emit):
    env = sample_environment(_law(args), args.count, args.seed, args.env_index)
    if emit.fmt == "text":
        emit.stream.write(env.to_text())
        return
    if emit.fmt == "json":
        emit.record({**json.loads(env.to_json()), "env_index": args.env_index})
        return
    for i, (g, p) in enumerate(zip(env.gaps, env.positions[1:]), start=1):
        emit.record({"i": i, "gap": int(g), "position": int(p)})


def cmd_survival(args, emit):
    law = _law(args)
    params = SurvivalParams(args.beta, args.n, args.drop_threshold)
    for index in range(args.env_index, args.env_index + args.envs):
        res, _ = survival_for_seed(law, params, args.seed, index)
        emit.record({**res.to_record(args.gamma, args.seed), "law": law.kind, "env_index": index})


def cmd_lambda(args, emit):
    law = _law(args)
    if args.method == "two-sided":
        est = lambda_two_sided(law, args.beta, args.samples, args.left_truncation, args.seed, args.tolerance)
        emit.record(
            {
                "gamma": args.gamma,
                "beta": args.beta,
                "lambda": est.value,
                "stderr": est.stderr,
                "truncation_bound": est.truncation_bound,
                "samples": est.samples,
                "left_truncation": est.left_truncation,
                "seed": args.seed,
            }
        )
        return
    finals = []
    for index in range(args.env_index, args.env_index + args.envs):
        seq = lambda_sequence(law, args.beta, args.ell, args.seed, index)
        finals.append(seq.estimate)
        rows = zip(seq.ell, seq.value) if args.profile else [(seq.ell[-1], seq.value[-1])]
        for ell, lam in rows:
            emit.record({"gamma": args.gamma, "beta": args.beta, "ell": int(ell), "lambda": float(lam), "seed": args.seed, "env_index": index})
    if args.envs > 1:
        vals = np.asarray(finals)
        emit.record(
            {
                "gamma": args.gamma,
                "beta": args.beta,
                "ell": args.ell,
                "lambda_mean": float(vals.mean()),
                "stderr": float(vals.std(ddof=1) / math.sqrt(vals.size)),
                "envs": args.envs,
                "seed": args.seed,
            }
        )


def cmd_confine(args, emit):
    res = confined_survival_probability(args.t, args.n)
    emit.record({"t": args.t, "n": args.n, "log_p": res.log_p, "rate": res.rate, "g_t": confinement_rate(args.t)})


def cmd_fkg(args, emit):
    law = _law(args)
    env = sample_environment(law, 1, args.seed, args.env_index)
    count = 1
    while env.last_position < args.x:
        count *= 2
        env = sample_environment(law, count, args.seed, args.env_index)
    cmp_ = fkg_compare(env, args.x, args.n, args.beta)
    for m, a, b in zip(cmp_.m, cmp_.cdf_killed, cmp_.cdf_free):
        emit.record({"m": int(m), "cdf_killed": float(a), "cdf_free": float(b), "x": args.x, "beta": args.beta, "seed": args.seed})


def cmd_limit_sample(args, emit):
    params = LimitParams(args.lam, args.gamma, args.c_tau)
    batch = sample_limit_many(params, args.samples, args.seed, args.box_scale)
    for i in range(args.samples):
        emit.record({"f": float(batch.f[i]), "x_star": float(batch.x_star[i]), "y_star": float(batch.y_star[i]), "seed": args.seed, "index": i})


def cmd_limit_cdf(args, emit):
    params = LimitParams(args.lam, args.gamma, args.c_tau)
    us = np.linspace(0.0, args.u_max, args.points)
    for u, tail in zip(us, limit_tail_cdf(params, us)):
        emit.record({"u": float(u), "tail": float(tail)})


def cmd_phi(args, emit):
    phi = phi_homogeneous(args.t, args.beta)
    first = math.pi**2 / (2 * args.t**2) * (1 - 4 / (math.expm1(args.beta) * args.t))
    emit.record({"t": args.t, "beta": args.beta, "phi": phi, "g_t": confinement_rate(args.t), "first_order": first})


def cmd_phi_periodic(args, emit):
    for pattern in args.pattern:
        spec = PeriodicSpec.parse(pattern)
        for beta in args.beta:
            res = phi_periodic(spec, beta)
            homog = phi_homogeneous(spec.t_max, beta) if spec.t_max >= 2 else math.nan
            emit.record(
                {
                    "pattern": spec.label(),
                    "beta": beta,
                    "phi": res.phi,
                    "g_tmax": confinement_rate(spec.t_max),
                    "phi_homog_tmax": homog,
                }
            )


def cmd_records(args, emit):
    rep = records_statistics(_law(args), args.n, args.replicates, args.seed)
    if emit.fmt == "json":
        emit.record(rep)
        return
    for tail in rep["tail"]:
        emit.record({"n": rep["n"], "b": tail["b"], "frequency": tail["frequency"], "reference": tail["reference"], "mean": rep["mean"], "harmonic": rep["harmonic"]})


def cmd_converge(args, emit):
    cfg = ExperimentConfig(
        gamma=args.gamma,
        beta=args.beta,
        n_grid=tuple(args.n),
        env_count=args.envs,
        seed=args.seed,
        lambda_source="provided" if args.lam is not None else "estimated",
        lambda_value=args.lam,
        law=args.law,
        lambda_ell=args.lambda_ell,
        lambda_envs=args.lambda_envs,
        drop_threshold=args.drop_threshold,
    )
    report = convergence_experiment(cfg, jobs=args.jobs)
    if emit.fmt == "json":
        emit.record(report)
    else:
        emit.stream.write("# " + json.dumps({"command": emit.command, "params": emit.params}) + "\n")
        emit.stream.write(report_to_csv(report))


# -- parser -----------------------------------------------------------------


def _common(fmt_default="json", formats=("json", "csv")):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=sci_int, default=0, help="master seed (64-bit)")
    p.add_argument("--format", choices=formats, default=fmt_default)
    p.add_argument("--output", default="-", help="output path, '-' for stdout")
    p.add_argument("--jobs", type=sci_int, default=1, help="worker processes")
    return p


def _law_args(p, gamma=2.0):
    p.add_argument("--gamma", type=float, default=gamma)
    p.add_argument("--law", choices=("pareto", "zeta"), default="pareto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trapwalk", description="Random walk among heavy-tailed soft traps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-env", parents=[_common("text", ("text", "json", "csv"))], help="sample a trap environment")
    _law_args(p)
    p.add_argument("--count", type=sci_int, required=True)
    p.add_argument("--env-index", type=sci_int, default=0)
    p.set_defaults(func=cmd_sample_env)

    p = sub.add_parser("survival", parents=[_common()], help="log survival probability and free energy")
    _law_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n", type=sci_int, required=True)
    p.add_argument("--envs", type=sci_int, default=1)
    p.add_argument("--env-index", type=sci_int, default=0)
    p.add_argument("--drop-threshold", type=float, default=None)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("lambda", parents=[_common()], help="crossing cost per trap")
    _law_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--method", choices=("sequence", "two-sided"), default="sequence")
    p.add_argument("--ell", type=sci_int, default=10_000)
    p.add_argument("--envs", type=sci_int, default=1)
    p.add_argument("--env-index", type=sci_int, default=0)
    p.add_argument("--profile", action="store_true", help="emit every l, not only the last")
    p.add_argument("--samples", type=sci_int, default=10_000)
    p.add_argument("--left-truncation", type=sci_int, default=200)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("confine", parents=[_common()], help="survival inside a gap")
    p.add_argument("--t", type=sci_int, required=True)
    p.add_argument("--n", type=sci_int, required=True)
    p.set_defaults(func=cmd_confine)

    p = sub.add_parser("fkg", parents=[_common()], help="hitting-time CDFs with and without killing")
    _law_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--x", type=sci_int, required=True)
    p.add_argument("--n", type=sci_int, required=True)
    p.add_argument("--env-index", type=sci_int, default=0)
    p.set_defaults(func=cmd_fkg)

    for name, helptext, func in (
        ("limit-sample", "exact samples of the limit law", cmd_limit_sample),
        ("limit-cdf", "closed-form tail of the limit law", cmd_limit_cdf),
    ):
        fmt = "json" if name == "limit-sample" else "csv"
        p = sub.add_parser(name, parents=[_common(fmt)], help=helptext)
        p.add_argument("--lambda", dest="lam", type=float, required=True)
        p.add_argument("--gamma", type=float, required=True)
        p.add_argument("--c-tau", type=float, required=True)
        if name == "limit-sample":
            p.add_argument("--samples", type=sci_int, default=1000)
            p.add_argument("--box-scale", type=float, default=1.0)
        else:
            p.add_argument("--u-max", type=float, default=10.0)
            p.add_argument("--points", type=sci_int, default=101)
        p.set_defaults(func=func)

    p = sub.add_parser("phi", parents=[_common("csv")], help="decay rate for equally spaced traps")
    p.add_argument("--t", type=sci_int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("phi-periodic", parents=[_common("csv")], help="decay rate for a periodic gap pattern")
    p.add_argument("--pattern", action="append", required=True, help="comma-separated gaps; repeatable")
    p.add_argument("--beta", type=float_list, required=True, help="comma-separated values")
    p.set_defaults(func=cmd_phi_periodic)

    p = sub.add_parser("records", parents=[_common()], help="record-count statistics")
    _law_args(p)
    p.add_argument("--n", type=sci_int, required=True)
    p.add_argument("--replicates", type=sci_int, default=1000)
    p.set_defaults(func=cmd_records)

    p = sub.add_parser("converge", parents=[_common()], help="law of F_n against the limit law")
    _law_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n", type=int_list, required=True, help="comma-separated horizons, e.g. 1e3,1e4")
    p.add_argument("--envs", type=sci_int, default=200)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="use this crossing cost instead of estimating it")
    p.add_argument("--lambda-ell", type=sci_int, default=10_000)
    p.add_argument("--lambda-envs", type=sci_int, default=8)
    p.add_argument("--drop-threshold", type=float, default=1e-280)
    p.set_defaults(func=cmd_converge)

    _apply_env_overrides(sub)
    return parser


def _apply_env_overrides(sub_action):
    """Replace defaults by ``TRAPWALK_<FLAG>`` environment variables when set."""
    for subparser in sub_action.choices.values():
        for action in subparser._actions:
            if not action.option_strings or action.dest in ("help",):
                continue
            name = ENV_PREFIX + action.option_strings[-1].lstrip("-").replace("-", "_").upper()
            if name not in os.environ:
                continue
            raw = os.environ[name]
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes")
            elif action.type is not None:
                try:
                    value = action.type(raw)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise ValidationError(f"{name}: {exc}") from exc
            else:
                value = raw
            if action.choices is not None and value not in action.choices:
                raise ValidationError(f"{name}: {value!r} not in {list(action.choices)}")
            if isinstance(action, argparse._AppendAction):
                value = [value]
            action.default = value
            action.required = False


def _resolved(args) -> dict:
    skip = {"func", "output", "format", "command"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None) -> int:
    try:
        parser = build_parser()
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    params = _resolved(args)
    buf = io.StringIO()
    emit = Emitter(buf, args.format, args.command, params)
    code = 0
    try:
        if args.format == "text" and args.command != "sample-env":
            raise ValidationError("text format is only available for sample-env")
        args.func(args, emit)
    except NumericalGuaranteeError as exc:
        print(f"error: numerical guarantee not met: {exc}", file=sys.stderr)
        code = 3
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    text = buf.getvalue()
    if text:
        if args.output == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
