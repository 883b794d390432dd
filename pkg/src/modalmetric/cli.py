"""Command-line front end.

Exit codes: 0 ok, 2 unreadable or malformed input, 3 violated precondition
(determinism, exhaustivity, metric axioms), 4 budget or convergence failure.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import bisim, dynamics, metrics, topology
from .errors import BudgetExceeded, ConditionError, ConvergenceError, FormulaSyntaxError, SignatureError
from .formula import Signature, parse, render
from .kripke import PointedKripkeModel, content_lines, dumps_model, loads_model, satisfies, successor_closure

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONDITION = 3
EXIT_BUDGET = 4


@dataclass(frozen=True)
class RunConfig:
    tolerance: Fraction = Fraction(1, 1024)
    budget: int = bisim.DEFAULT_BUDGET
    depth: int = 3
    fmt: str = "text"

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.fmt not in ("text", "structured"):
            raise ValueError("format is text or structured")


class Output:
    """Collects ordered fields; prints them as text lines or one JSON object."""

    def __init__(self, config: RunConfig, out=None):
        self.config = config
        self.fields: list[tuple[str, object]] = []
        self.lines: list[str] = []
        self.out = out or sys.stdout

    def add(self, key: str, value, text: str | None = None):
        self.fields.append((key, value))
        if text is not None:
            self.lines.append(text)

    def emit(self):
        if self.config.fmt == "structured":
            self.out.write(json.dumps(dict(self.fields), default=str) + "\n")
        else:
            for line in self.lines:
                self.out.write(line + "\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormulaSyntaxError(f"cannot read {path}: {exc.strerror}") from exc


def _model(path: str) -> PointedKripkeModel:
    return loads_model(_read(path))


def _models_in(path: str) -> list[PointedKripkeModel]:
    p = Path(path)
    if not p.is_dir():
        raise FormulaSyntaxError(f"{path} is not a directory")
    files = sorted(f for f in p.iterdir() if f.is_file() and not f.name.startswith("."))
    if not files:
        raise FormulaSyntaxError(f"no model files in {path}")
    return [loads_model(f.read_text(encoding="utf-8")) for f in files]


def _same_sig(models) -> Signature:
    sig = models[0].signature
    if any(x.signature != sig for x in models):
        raise SignatureError("all models must declare the same signature")
    return sig


# ------------------------------------------------------------ commands


def cmd_check(args, config: RunConfig, out: Output) -> int:
    x = _model(args.model)
    f = parse(args.formula, x.signature)
    verdict = satisfies(x, f)
    out.add("formula", render(f))
    out.add("satisfied", verdict, "true" if verdict else "false")
    return EXIT_OK


def _metric_for(spec: str, sig: Signature, models, config: RunConfig):
    """(descriptor, weights) for a metric spec, or None for the closed-form metrics."""
    if spec.startswith("hamming:"):
        try:
            n = int(spec.partition(":")[2])
        except ValueError as exc:
            raise FormulaSyntaxError(f"bad metric spec {spec!r}") from exc
        return metrics.hamming_descriptor(sig, n)
    if spec == "b":
        return metrics.bisim_descriptor_b(sig, successor_closure(models))
    if spec == "depth":
        return metrics.close_to_home_descriptor(sig, config.budget)
    if spec.startswith("custom:"):
        df = metrics.loads_descriptor(_read(spec.partition(":")[2]), sig)
        if df.metric and df.metric != "custom":
            if df.formulas:
                raise FormulaSyntaxError("a built-in metric header takes no formulas")
            return _metric_for(df.metric, sig, models, config)
        return metrics.descriptor_from_file(df, sig, config.budget)
    raise FormulaSyntaxError(f"unknown metric {spec!r}; use hamming:<n>, bisim, goranko, b, depth or custom:<file>")


def _closed_form(spec: str) -> Callable | None:
    return {"bisim": metrics.bisim_metric_dB, "goranko": metrics.goranko_metric_dg}.get(spec)


def cmd_dist(args, config: RunConfig, out: Output) -> int:
    x, y = _model(args.left), _model(args.right)
    sig = _same_sig([x, y])
    spec = args.metric
    if spec.startswith("custom:"):
        header = metrics.loads_descriptor(_read(spec.partition(":")[2]), sig).metric
        if header in ("bisim", "goranko"):
            spec = header
    exact = _closed_form(spec)
    if exact is not None:
        v = exact(x, y)
        iv = metrics.DistanceInterval(v, v)
    else:
        D, w = _metric_for(spec, sig, [x, y], config)
        iv = metrics.distance(x, y, D, w, config.tolerance)
    out.add("lower", iv.lower)
    out.add("upper", iv.upper, str(iv))
    return EXIT_OK


def cmd_update(args, config: RunConfig, out: Output) -> int:
    x = _model(args.model)
    A = dynamics.loads_action_model(_read(args.action))
    y = dynamics.product_update(x, A)
    text = dumps_model(y)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        out.add("written", args.out, f"wrote {args.out}")
    else:
        out.add("model", text, text.rstrip("\n"))
    return EXIT_OK


def cmd_bisim(args, config: RunConfig, out: Output) -> int:
    x, y = _model(args.left), _model(args.right)
    _same_sig([x, y])
    n = bisim.first_difference(x, y)
    out.add("first_difference", n)
    if args.depth is None:
        if n is None:
            out.add("bisimilar", True, "bisimilar")
        else:
            text = "not bisimilar" + (f"; {n - 1}-bisimilar" if n > 0 else "")
            out.add("bisimilar", False, text)
        return EXIT_OK
    k = args.depth
    if n is None or n > k:
        out.add("n_bisimilar", True, f"{k}-bisimilar")
    else:
        text = f"not {k}-bisimilar" + (f"; {n - 1}-bisimilar" if n > 0 else "")
        out.add("n_bisimilar", False, text)
    return EXIT_OK


def cmd_topology(args, config: RunConfig, out: Output) -> int:
    models = _models_in(args.models)
    sig = _same_sig(models)
    df = metrics.loads_descriptor(_read(args.descriptor), sig)
    if not df.formulas:
        raise FormulaSyntaxError("the topology command needs explicit descriptor formulas")
    D, _ = metrics.descriptor_from_file(df, sig, config.budget)
    space = metrics.quotient(models, D)
    T = topology.stone_topology(space, D)
    clopens = topology.clopen_sets(T)
    if len(T.opens) <= topology.MAX_COVER_OPENS:
        compact = topology.is_compact(T)
    else:
        compact = True  # finite space; covers not enumerated
    out.add("points", len(space), f"points: {len(space)}")
    out.add("opens", len(T.opens), f"opens: {len(T.opens)}")
    out.add("clopens", len(clopens), f"clopens: {len(clopens)}")
    out.add("hausdorff", topology.is_hausdorff(T), f"hausdorff: {str(topology.is_hausdorff(T)).lower()}")
    td = topology.is_totally_disconnected(T)
    out.add("totally_disconnected", td, f"totally_disconnected: {str(td).lower()}")
    out.add("compact", compact, f"compact: {str(compact).lower()}")
    rows = topology.definable_check(T, space, D)
    table = []
    for row in rows:
        members = "{" + ",".join(sorted(row.members, key=int)) + "}"
        formula = render(row.formula) if row.formula is not None else None
        table.append([members, formula])
        out.lines.append(f"  {members}: {formula if formula is not None else 'UNDEFINABLE'}")
    out.add("definability", table)
    return EXIT_OK


def cmd_continuity(args, config: RunConfig, out: Output) -> int:
    A = dynamics.loads_action_model(_read(args.action))
    sample = _models_in(args.samples)
    sig = _same_sig(sample)
    if sig != A.signature:
        raise SignatureError("action model and samples declare different signatures")
    report = dynamics.check_conditions(A, sample, config.depth)
    if not (report.deterministic and report.exhaustive):
        raise ConditionError("; ".join(report.failures))
    images = [dynamics.product_update(x, A) for x in sample]
    universe = successor_closure(sample + images)
    if args.metric == "bisim":
        D, w = metrics.bisim_descriptor_b(sig, universe)
    elif args.metric == "depth":
        D, w = metrics.close_to_home_descriptor(sig, config.budget)
    else:
        raise FormulaSyntaxError("continuity needs a representative metric: bisim or depth")
    eps = Fraction(args.epsilon)
    delta = dynamics.continuity_modulus(A, D, w, eps, budget=config.budget)
    pairs = list(itertools.combinations(sample, 2))
    probe = dynamics.probe_continuity(A, D, w, eps, delta, pairs, config.tolerance)
    out.add("epsilon", eps, f"epsilon: {eps}")
    out.add("delta", delta, f"delta: {delta}")
    out.add("closing", report.closing, f"closing (up to {config.depth}-bisimilarity): {str(report.closing).lower()}")
    out.add("pairs", probe.checked, f"pairs: {probe.checked}")
    out.add("in_scope", probe.in_scope, f"in scope: {probe.in_scope}")
    out.add("violations", len(probe.violations), f"violations: {len(probe.violations)}")
    return EXIT_OK


def loads_space(text: str) -> tuple[list[str], dict]:
    points = None
    d = {}
    for lineno, line in content_lines(text):
        key, colon, rest = line.partition(":")
        if not colon:
            raise FormulaSyntaxError(f"line {lineno}: expected 'key: value'")
        words = key.split()
        if words == ["points"]:
            points = rest.split()
        elif len(words) == 3 and words[0] == "d":
            try:
                d[(words[1], words[2])] = Fraction(rest.strip())
            except (ValueError, ZeroDivisionError) as exc:
                raise FormulaSyntaxError(f"line {lineno}: bad distance {rest.strip()!r}") from exc
        else:
            raise FormulaSyntaxError(f"line {lineno}: unknown header {key.strip()!r}")
    if points is None:
        raise FormulaSyntaxError("missing 'points:' line")
    unknown = {p for pair in d for p in pair} - set(points)
    if unknown:
        raise FormulaSyntaxError(f"distances mention undeclared points {sorted(unknown)}")
    return points, d


def cmd_embed(args, config: RunConfig, out: Output) -> int:
    points, d = loads_space(_read(args.space))
    e = metrics.embed_finite_space(points, d)
    weights = []
    out.lines.append("weights:")
    for prop in e.propositions:
        name = "phi_" + ",".join(x for x in e.points if x in prop)
        weights.append([name, e.weights[prop]])
        out.lines.append(f"  {name}: {e.weights[prop]}")
    out.add("weights", weights)
    out.add("c", e.c, f"c: {e.c}")
    table = []
    out.lines.append("x y d d_w d_w-d")
    for x, y, dv, dw, diff in e.table():
        table.append([x, y, dv, dw, diff])
        out.lines.append(f"{x} {y} {dv} {dw} {diff}")
    out.add("table", table)
    return EXIT_OK


# ------------------------------------------------------------- parsing


def _fraction(text: str) -> Fraction:
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_fraction, default=Fraction(1, 1024), help="truncation tolerance (rational)")
    common.add_argument("--budget", type=int, default=bisim.DEFAULT_BUDGET, help="type enumeration budget")
    common.add_argument("--format", choices=("text", "structured"), default="text")

    p = argparse.ArgumentParser(prog="modalmetric", description="Distances, topologies and updates on pointed Kripke models.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="evaluate a formula at a model's point")
    s.add_argument("model")
    s.add_argument("formula")
    s.set_defaults(run=cmd_check)

    s = sub.add_parser("dist", parents=[common], help="distance between two pointed models")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("metric", help="hamming:<n> | bisim | goranko | b | depth | custom:<file>")
    s.set_defaults(run=cmd_dist)

    s = sub.add_parser("update", parents=[common], help="product update with an action model")
    s.add_argument("model")
    s.add_argument("action")
    s.add_argument("-o", "--out", help="write the updated model here instead of stdout")
    s.set_defaults(run=cmd_update)

    s = sub.add_parser("bisim", parents=[common], help="(n-)bisimilarity of two pointed models")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("--depth", type=int, default=None)
    s.set_defaults(run=cmd_bisim)

    s = sub.add_parser("topology", parents=[common], help="Stone-like topology of a directory of models")
    s.add_argument("models")
    s.add_argument("descriptor")
    s.set_defaults(run=cmd_topology)

    s = sub.add_parser("continuity", parents=[common], help="continuity modulus and probe for an action model")
    s.add_argument("action")
    s.add_argument("metric", choices=("bisim", "depth"))
    s.add_argument("epsilon", type=_fraction)
    s.add_argument("samples")
    s.add_argument("--depth", type=int, default=3, help="bisimulation depth for the closing check")
    s.set_defaults(run=cmd_continuity)

    s = sub.add_parser("embed", parents=[common], help="embed a finite metric space")
    s.add_argument("space")
    s.set_defaults(run=cmd_embed)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    depth = getattr(args, "depth", None)
    try:
        config = RunConfig(args.tol, args.budget, 3 if depth is None else depth, args.format)
    except ValueError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    out = Output(config, stdout)
    try:
        code = args.run(args, config, out)
    except (FormulaSyntaxError, SignatureError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except (ConditionError, ValueError) as exc:
        stderr.write(f"precondition violated: {exc}\n")
        return EXIT_CONDITION
    except (BudgetExceeded, ConvergenceError) as exc:
        stderr.write(f"budget exceeded: {exc}\n")
        return EXIT_BUDGET
    out.emit()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
