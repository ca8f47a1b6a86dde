"""Command-line front end.

Model files are JSON objects. A Gaussian model needs ``mu`` and either a
full ``cov`` matrix or ``sigma`` plus a constant ``rho`` (``b_ij = sigma_i
sigma_j rho`` off the diagonal). Signs are given either as ``signs`` (a
list of +1/-1 with all +1 first) or as ``m``, the number of positive terms;
the default is all positive.

A market file (for ``stress``) has ``s0``, ``theta``, the covariance in
either encoding, ``horizon``, the ``benchmark`` weights and optionally the
``held`` weights.

Exit status: 0 on success, 1 on a library error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import conditional_laws, monte_carlo, risk_engine, simplex_qp, tail_asymptotics
from .errors import LogTailsError, ParseError, ValidationError
from .matrix_core import CovMatrix, ModelSpec

CSV_FMT = "%.17g"

SWEEP_HEADER = (
    "log_x",
    "x",
    "asymptotic",
    "log_asymptotic",
    "mc",
    "log_mc",
    "mc_std_error",
    "ratio",
)
MC_HEADER = (
    "x",
    "log_x",
    "is_estimate",
    "log_is_estimate",
    "is_std_error",
    "standard_estimate",
    "standard_std_error",
    "reduction_factor",
    "reduction_factor_se",
)
STRESS_HEADER = ("asset", "class", "exponent", "expectation", "log_expectation")


class UsageError(Exception):
    """Bad command-line arguments (exit status 2)."""


# ---------------------------------------------------------------- parsing


def _load_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read model file {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}:1:1: top level must be an object")
    return data


def _vector(data: dict, key: str, n: int | None = None) -> np.ndarray:
    if key not in data:
        raise ParseError(f"missing field '{key}'")
    try:
        v = np.asarray(data[key], dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field '{key}' must be a list of numbers") from None
    if v.ndim != 1 or (n is not None and v.size != n):
        want = f" of length {n}" if n is not None else ""
        raise ParseError(f"field '{key}' must be a list{want}")
    return v


def _covariance(data: dict) -> CovMatrix:
    if "cov" in data:
        if "sigma" in data or "rho" in data:
            raise ParseError("give either 'cov' or 'sigma' and 'rho', not both")
        try:
            b = np.asarray(data["cov"], dtype=float)
        except (TypeError, ValueError):
            raise ParseError("field 'cov' must be a matrix of numbers") from None
        if b.ndim != 2:
            raise ParseError("field 'cov' must be a square matrix")
        try:
            return CovMatrix(b)
        except LogTailsError as exc:
            raise ValidationError(f"cov: {exc}") from None
    if "sigma" not in data or "rho" not in data:
        raise ParseError("missing covariance: need 'cov' or 'sigma' and 'rho'")
    sigma = _vector(data, "sigma")
    try:
        rho = float(data["rho"])
    except (TypeError, ValueError):
        raise ParseError("field 'rho' must be a number") from None
    try:
        return CovMatrix.from_sigma_rho(sigma, rho)
    except LogTailsError as exc:
        raise ValidationError(f"sigma/rho: {exc}") from None


def model_from_dict(data: dict) -> ModelSpec:
    """Validated :class:`ModelSpec` from a parsed model file."""
    cov = _covariance(data)
    mu = _vector(data, "mu", cov.n) if "mu" in data else np.zeros(cov.n)
    if "signs" in data and "m" in data:
        raise ParseError("give either 'signs' or 'm', not both")
    if "signs" in data:
        signs = _vector(data, "signs", cov.n)
        if not np.all(np.isin(signs, (-1.0, 1.0))):
            raise ValidationError("signs must be +1 or -1")
        m = int(np.count_nonzero(signs > 0))
        if np.any(signs[:m] < 0):
            raise ValidationError("signs must list every +1 before any -1")
    else:
        m = data.get("m", cov.n)
        if not isinstance(m, int) or isinstance(m, bool):
            raise ParseError("field 'm' must be an integer")
    try:
        return ModelSpec(mu, cov, m)
    except LogTailsError as exc:
        raise ValidationError(str(exc)) from None


def market_from_dict(data: dict):
    """``(MarketModel, benchmark, held)`` from a parsed market file."""
    cov = _covariance(data)
    s0 = _vector(data, "s0", cov.n)
    theta = _vector(data, "theta", cov.n) if "theta" in data else np.zeros(cov.n)
    horizon = data.get("horizon", 1.0)
    if not isinstance(horizon, (int, float)) or isinstance(horizon, bool):
        raise ParseError("field 'horizon' must be a number")
    market = risk_engine.MarketModel(s0, theta, cov, float(horizon))
    benchmark = _vector(data, "benchmark", cov.n)
    held = _vector(data, "held", cov.n) if "held" in data else None
    return market, benchmark, held


def parse_model_file(path: str | Path):
    """Model from a JSON file: a :class:`ModelSpec`, or a market triple if ``s0`` is present."""
    data = _load_json(path)
    if "s0" in data:
        return market_from_dict(data)
    return model_from_dict(data)


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from None


def _sweep(text: str) -> list[float]:
    parts = _floats(text, "--sweep")
    if len(parts) != 3 or parts[2] != int(parts[2]) or parts[2] < 1:
        raise UsageError("--sweep takes START,STOP,COUNT with COUNT >= 1")
    start, stop, count = parts[0], parts[1], int(parts[2])
    if not (start > 0 and stop > 0):
        raise UsageError("--sweep bounds must be positive")
    return list(np.geomspace(start, stop, count))


def levels_from_args(args) -> list[float]:
    """Levels from ``--levels``, ``--log-levels`` or ``--sweep`` (geometric)."""
    given = [a for a in (args.levels, args.log_levels, args.sweep) if a is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of --levels, --log-levels, --sweep")
    if args.levels is not None:
        out = _floats(args.levels, "--levels")
    elif args.log_levels is not None:
        out = [math.exp(v) for v in _floats(args.log_levels, "--log-levels")]
    else:
        out = _sweep(args.sweep)
    if not out or any(not x > 0 for x in out):
        raise UsageError("levels must be positive")
    return out


# ----------------------------------------------------------------- output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return CSV_FMT % float(v)


def write_csv(header: Sequence[str], rows: Sequence[Sequence], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    write_csv(header, rows, buf)
    return buf.getvalue()


def _vec(v) -> str:
    return "[" + ", ".join(f"{float(a):.6g}" for a in np.asarray(v).ravel()) + "]"


# ------------------------------------------------------------ subcommands


def _need_model(obj) -> ModelSpec:
    if not isinstance(obj, ModelSpec):
        raise UsageError("this subcommand needs a Gaussian model file, not a market file")
    return obj


def _tail_of(model: ModelSpec, requested: str | None) -> str:
    tail = requested or ("left" if model.m == model.n else "right")
    return tail


def cmd_qp(args) -> str:
    model = _need_model(parse_model_file(args.model))
    lines = []
    if model.m == model.n:
        sol = simplex_qp.solve(model.cov)
        lines.append(_qp_block("sum simplex", sol))
    for p in range(model.m) if model.m < model.n else ():
        region = simplex_qp.FeasibleRegion.signed(model.n, model.m, p)
        lines.append(_qp_block(f"split p={p}", simplex_qp.solve(model.cov, region)))
    return "\n".join(lines) + "\n"


def _qp_block(title: str, sol) -> str:
    return "\n".join(
        [
            f"[{title}]",
            f"wbar      = {_vec(sol.wbar)}",
            f"support   = {list(sol.active_set)}",
            f"min value = {sol.min_value:.12g}",
            "margins   = {"
            + ", ".join(f"{i}: {v:.6g}" for i, v in sol.assumption_margins.items())
            + "}",
            f"assumption holds = {sol.assumption_ok}",
        ]
    )


def _asymptote_text(asym, levels) -> str:
    lines = [
        f"delta1 = {asym.delta1:.12g}",
        f"delta2 = {asym.delta2:.12g}",
        f"delta3 = {asym.delta3:.12g}",
        f"delta4 = {asym.delta4:.12g}",
        f"C      = {asym.constant_C:.12g}",
        f"relative error order = {asym.error_order}",
    ]
    if levels:
        lines.append("")
        lines.append(_csv_text(("x", "log_x", asym.kind, f"log_{asym.kind}", "in_regime"), [
            (x, math.log(x), math.exp(lv) if lv > -745 else 0.0, lv, str(asym.in_regime(x)).lower())
            for x, lv in ((x, asym.log_value(x)) for x in levels)
        ]).rstrip("\n"))
    return "\n".join(lines) + "\n"


def _optional_levels(args):
    if args.levels is None and args.log_levels is None and args.sweep is None:
        return []
    return levels_from_args(args)


def cmd_left_tail(args) -> str:
    model = _need_model(parse_model_file(args.model))
    levels = _optional_levels(args)
    asym = (
        tail_asymptotics.left_tail_density_asymptote(model)
        if args.density
        else tail_asymptotics.left_tail_cdf_asymptote(model)
    )
    return _asymptote_text(asym, levels)


def cmd_right_tail(args) -> str:
    model = _need_model(parse_model_file(args.model))
    levels = _optional_levels(args)
    sel = tail_asymptotics.right_tail_mixed(model)
    asym = tail_asymptotics.right_tail_density_asymptote(sel) if args.density else sel.merged
    head = f"dominant splits: P4={list(sel.p4)} P3={list(sel.p3)} P2={list(sel.p2)}\n"
    return head + _asymptote_text(asym, levels)


def cmd_conditional(args) -> str:
    model = _need_model(parse_model_file(args.model))
    tail = _tail_of(model, args.tail)
    limit = (
        conditional_laws.limiting_gaussian_left(model)
        if tail == "left"
        else conditional_laws.limiting_gaussian_right(model)
    )
    lines = [
        f"tail        = {tail}",
        f"driving     = {list(limit.driving)}",
        f"lambda_bar  = {_vec(limit.lambda_bar)}",
        f"slope       = {_vec(limit.slope)}",
        f"mu_prime    = {_vec(limit.mu_prime)}",
        "cov_prime   =",
    ]
    lines += ["  " + _vec(r) for r in limit.cov_prime]
    levels = _optional_levels(args)
    if levels:
        rows = []
        for x in levels:
            logs = [limit.log_laplace(np.eye(model.n)[i], x) for i in range(model.n)]
            rows.append((x, math.log(x), *logs))
        head = ("x", "log_x", *(f"log_E_exp_Y{i}" for i in range(model.n)))
        lines += ["", _csv_text(head, rows).rstrip("\n")]
    return "\n".join(lines) + "\n"


def _config(args) -> monte_carlo.McConfig:
    return monte_carlo.McConfig(n_samples=args.samples, seed=args.seed, workers=args.workers)


def cmd_mc(args) -> str:
    model = _need_model(parse_model_file(args.model))
    levels = levels_from_args(args)
    if args.samples < 1:
        raise UsageError("mc needs --samples >= 1")
    rows = monte_carlo.reduction_table(
        model, levels, _config(args), tail=_tail_of(model, args.tail), use_is=not args.no_is
    )
    out = [
        (
            r.x,
            math.log(r.x),
            r.is_estimate.estimate,
            r.is_estimate.log_estimate,
            r.is_estimate.std_error,
            r.standard_estimate.estimate,
            r.standard_estimate.std_error,
            r.factor,
            r.factor_se,
        )
        for r in rows
    ]
    return _csv_text(MC_HEADER, out)


def run_sweep(model: ModelSpec, levels, samples: int, seed: int, tail=None, use_is=True, workers=1):
    """Rows of ``(log x, x, asymptotic, log asymptotic, mc, log mc, se, ratio)``.

    MC columns are ``None`` when ``samples == 0``.
    """
    tail = _tail_of(model, tail)
    asym = (
        tail_asymptotics.left_tail_cdf_asymptote(model)
        if tail == "left"
        else tail_asymptotics.right_tail_cdf_asymptote(model)
    )
    drift = None
    if samples and use_is:
        drift = (
            monte_carlo.optimal_drift_left(model)
            if tail == "left"
            else monte_carlo.optimal_drift_right(model)
        )
    cfg = monte_carlo.McConfig(n_samples=samples, seed=seed, workers=workers) if samples else None
    rows = []
    for x in levels:
        la = asym.log_value(x)
        a = math.exp(la) if la > -745 else 0.0
        if cfg is None:
            rows.append((math.log(x), x, a, la, None, None, None, None))
            continue
        est = monte_carlo._estimate(model, x, cfg, drift, tail == "right")
        ratio = math.exp(est.log_estimate - la) if est.log_estimate > -math.inf else 0.0
        rows.append(
            (math.log(x), x, a, la, est.estimate, est.log_estimate, est.std_error, ratio)
        )
    return rows


def cmd_sweep(args) -> str:
    model = _need_model(parse_model_file(args.model))
    levels = levels_from_args(args)
    if args.samples < 0:
        raise UsageError("--samples must be >= 0")
    rows = run_sweep(
        model, levels, args.samples, args.seed, args.tail, not args.no_is, args.workers
    )
    return _csv_text(SWEEP_HEADER, rows)


def cmd_stress(args) -> str:
    parsed = parse_model_file(args.model)
    if isinstance(parsed, ModelSpec):
        raise UsageError("stress needs a market file (with 's0' and 'benchmark')")
    market, benchmark, held = parsed
    levels = levels_from_args(args)
    chunks = []
    for x in levels:
        rep = risk_engine.stress_report(market, benchmark, x)
        rows = [
            (i, rep.classes[i], rep.exponent[i], rep.expectations[i], rep.log_expectations[i])
            for i in range(market.n)
        ]
        text = f"# x = {x:.17g}, tail = {rep.tail}\n" + _csv_text(STRESS_HEADER, rows)
        if held is not None:
            value = risk_engine.portfolio_conditional_value(market, held, benchmark, x)
            text += f"# held portfolio conditional value = {value:.17g}\n"
        chunks.append(text)
    return "".join(chunks)


COMMANDS = {
    "qp": cmd_qp,
    "left-tail": cmd_left_tail,
    "right-tail": cmd_right_tail,
    "conditional": cmd_conditional,
    "mc": cmd_mc,
    "stress": cmd_stress,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logtails", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [
        ("qp", "minimum-variance weights, support and assumption margins"),
        ("left-tail", "left-tail asymptote of an all-positive sum"),
        ("right-tail", "right-tail asymptote of a long-short sum"),
        ("conditional", "limiting conditional Gaussian law"),
        ("mc", "importance-sampled and standard estimates with reduction factors"),
        ("stress", "conditional asset expectations for a market scenario"),
        ("sweep", "asymptotic versus Monte Carlo CSV over levels"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--model", required=True, help="JSON model or market file")
        p.add_argument("--levels", help="comma-separated levels x")
        p.add_argument("--log-levels", help="comma-separated values of log x")
        p.add_argument("--sweep", help="START,STOP,COUNT geometric grid of levels")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=0 if name == "sweep" else 1_000_000)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--no-is", action="store_true", help="use a zero drift")
        p.add_argument("--tail", choices=("left", "right"))
        p.add_argument("--density", action="store_true", help="density instead of tail probability")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _emit(COMMANDS[args.command](args), args.out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except LogTailsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0
