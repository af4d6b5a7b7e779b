"""Command-line front end emitting plot-ready CSV or JSON tables.

Subcommands: ``probs``, ``fisher``, ``simulate``, ``sweep``, ``converge``.
Exit status is 0 on success, 1 on a computation error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from dataclasses import dataclass
from typing import Sequence

from qmetro import fisher, lab, strategies
from qmetro.strategies import Kind, StrategyConfig

SEED_ENV = "QMETRO_SEED"
DEFAULT_ETA_GRID = "0:0.9:0.1"
DEFAULT_EVENTS_GRID = "10,100,1000,2000,10000"
SIG_DIGITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_ANGLE = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*$")


def parse_angle(text: str) -> float:
    """Radians; accepts ``pi``, ``-pi``, ``0.5pi`` and ``1.5*pi`` as well as plain numbers."""
    t = str(text).strip().lower()
    m = _ANGLE.match(t)
    if m:
        return math.pi if m.group(1) is None else float(m.group(1)) * math.pi
    if t in ("-pi", "+pi"):
        return -math.pi if t[0] == "-" else math.pi
    try:
        value = float(t)
    except ValueError:
        raise UsageError(f"malformed angle {text!r}") from None
    if not math.isfinite(value):
        raise UsageError(f"angle must be finite, got {text!r}")
    return value


def parse_grid(text: str, cast=float) -> list:
    """``start:stop:step`` (stop included within half a step) or a comma list."""
    t = str(text).strip()
    try:
        if ":" in t:
            start, stop, step = (float(x) for x in t.split(":"))
            if step <= 0 or stop < start:
                raise UsageError(f"malformed grid {text!r}: need start <= stop and step > 0")
            count = int(math.floor((stop - start) / step + 0.5)) + 1
            values = [round(start + i * step, 12) for i in range(count)]
        else:
            values = [float(x) for x in t.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"malformed grid {text!r}") from None
    if not values:
        raise UsageError(f"empty grid {text!r}")
    if cast is int:
        if any(v != int(v) for v in values):
            raise UsageError(f"grid {text!r} must contain integers")
        return [int(v) for v in values]
    return values


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    kind: Kind
    etas: tuple[float, ...]
    v: float
    phi: float
    events: int
    events_grid: tuple[int, ...]
    repetitions: int
    seed: int
    estimator: str
    fmt: str
    output: str | None
    workers: int
    include_single: bool


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmetro", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--config", help="file of 'key = value' defaults")
    common.add_argument("--kind", choices=[k.value for k in Kind], default="ancilla")
    common.add_argument("--v", default="1.0", help="interferometer visibility")
    common.add_argument("--phi", default="pi", help="true phase in radians")
    common.add_argument("--events", default="2000", help="events per repetition")
    common.add_argument("--repetitions", default="50")
    common.add_argument("--seed", default=None, help=f"master seed (fallback ${SEED_ENV}, then 42)")
    common.add_argument("--estimator", choices=lab.ESTIMATORS, default="inversion")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--workers", default="1")

    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, help_text in [
        ("probs", "outcome probabilities, circuit and closed form"),
        ("fisher", "quantum and classical Fisher information"),
        ("simulate", "one repeated counting experiment"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--eta", default=None, help="damping rate (or use --eta-grid)")
        p.add_argument("--eta-grid", default=None)
    p = sub.add_parser("sweep", parents=[common], help="phase SD against damping rate")
    p.add_argument("--eta-grid", default=DEFAULT_ETA_GRID)
    p.add_argument("--eta", default=None)
    p.add_argument("--include-single", default="false", help="also simulate the single probe")
    p = sub.add_parser("converge", parents=[common], help="normalised variance against events")
    p.add_argument("--eta", default="0.5")
    p.add_argument("--eta-grid", default=None)
    p.add_argument("--events-grid", default=DEFAULT_EVENTS_GRID)
    return parser


def _number(name: str, text, cast=float, lo=None, hi=None):
    try:
        value = cast(str(text).strip())
    except ValueError:
        raise UsageError(f"--{name}: malformed value {text!r}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise UsageError(f"--{name}: value must be finite")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise UsageError(f"--{name}: {value} out of range [{lo}, {hi if hi is not None else 'inf'}]")
    return value


def _flag(name: str, text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"--{name}: expected true or false, got {text!r}")


def parse_args(argv: Sequence[str] | None = None, environ=None) -> CliConfig:
    """Parse and validate; precedence is flag, then config file, then defaults."""
    environ = os.environ if environ is None else environ
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    first = parser.parse_args(argv)
    if first.config:
        file_values = read_config_file(first.config)
        sub = parser._subparsers._group_actions[0].choices[first.subcommand]
        known = {a.dest for a in sub._actions}
        if "format" in file_values:
            file_values["fmt"] = file_values.pop("format")
        unknown = sorted(set(file_values) - known - {"config", "help"})
        if unknown:
            raise UsageError(f"{first.config}: unknown key(s) {', '.join(unknown)}")
        sub.set_defaults(**file_values)
        first = parser.parse_args(argv)
    ns = first

    if ns.kind not in {k.value for k in Kind}:
        raise UsageError(f"--kind: expected one of single, ancilla, got {ns.kind!r}")
    if ns.estimator not in lab.ESTIMATORS:
        raise UsageError(f"--estimator: expected one of {', '.join(lab.ESTIMATORS)}")
    if ns.fmt not in ("csv", "json"):
        raise UsageError(f"--format: expected csv or json, got {ns.fmt!r}")

    if ns.subcommand == "sweep":
        etas = parse_grid(ns.eta_grid) if ns.eta is None else [_number("eta", ns.eta)]
    elif ns.eta_grid is not None:
        etas = parse_grid(ns.eta_grid)
    elif ns.eta is not None:
        etas = [_number("eta", ns.eta)]
    else:
        raise UsageError(f"{ns.subcommand}: --eta or --eta-grid is required")
    for eta in etas:
        if not 0.0 <= eta <= 1.0:
            raise UsageError(f"--eta: {eta} out of range [0, 1]")

    seed_text = ns.seed if ns.seed is not None else environ.get(SEED_ENV, "42")
    events_grid = ()
    if ns.subcommand == "converge":
        events_grid = tuple(parse_grid(ns.events_grid, cast=int))
        if any(n < 1 for n in events_grid):
            raise UsageError("--events-grid: event counts must be >= 1")
        if any(b <= a for a, b in zip(events_grid, events_grid[1:])):
            raise UsageError("--events-grid: must be strictly ascending")

    return CliConfig(
        subcommand=ns.subcommand,
        kind=Kind(ns.kind),
        etas=tuple(etas),
        v=_number("v", ns.v, lo=0.0, hi=1.0),
        phi=parse_angle(ns.phi),
        events=_number("events", ns.events, int, lo=1),
        events_grid=events_grid,
        repetitions=_number("repetitions", ns.repetitions, int, lo=2),
        seed=_number("seed", seed_text, int, lo=0, hi=lab.SEED_MAX),
        estimator=ns.estimator,
        fmt=ns.fmt,
        output=ns.output,
        workers=_number("workers", ns.workers, int, lo=1),
        include_single=_flag("include-single", getattr(ns, "include_single", "false")),
    )


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{SIG_DIGITS}g}"
    return str(value)


def render_table(rows: Sequence[dict], fmt: str, columns: Sequence[str]) -> str:
    if rows and any(list(r) != list(columns) for r in rows):
        raise ValueError("rows must share the declared columns, in order")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([dict(r) for r in rows], indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_table(rows: Sequence[dict], fmt: str, destination: str | None, columns: Sequence[str] | None = None) -> None:
    """Write the table to ``destination`` atomically, or to stdout when None."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    text = render_table(rows, fmt, columns)
    if destination is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(destination))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qmetro-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, destination)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _strategy(cfg: CliConfig, eta: float) -> StrategyConfig:
    return StrategyConfig(cfg.kind, eta, cfg.v, cfg.phi)


def _experiment(cfg: CliConfig, eta: float) -> lab.ExperimentConfig:
    return lab.ExperimentConfig(_strategy(cfg, eta), cfg.events, cfg.repetitions, cfg.seed, cfg.estimator)


def _probs_table(cfg: CliConfig):
    columns = ["eta", "outcome", "p_circuit", "p_closed_form"]
    rows = []
    for eta in cfg.etas:
        s = _strategy(cfg, eta)
        circ = strategies.circuit_distribution(s)
        closed = strategies.closed_form_distribution(s)
        for label in s.labels:
            rows.append({"eta": eta, "outcome": label, "p_circuit": circ[label], "p_closed_form": closed[label]})
    return rows, columns, f"crossover eta* = {fisher.crossover_noise(cfg.v):.6g} at v = {cfg.v:g}" if cfg.v > 0 else "v = 0: no crossover"


def _fisher_table(cfg: CliConfig):
    columns = ["eta", "F_single", "F_ancilla", "qfi_numeric_single", "qfi_numeric_ancilla", "cfi_single", "cfi_ancilla"]
    rows = []
    for eta in cfg.etas:
        single = strategies.make_family(Kind.SINGLE, eta)
        anc = strategies.make_family(Kind.ANCILLA, eta, cfg.v)
        rows.append(
            {
                "eta": eta,
                "F_single": fisher.single_probe_qfi_closed(eta),
                "F_ancilla": fisher.ancilla_qfi_closed(eta, cfg.v),
                "qfi_numeric_single": fisher.qfi_numeric(single, cfg.phi),
                "qfi_numeric_ancilla": fisher.qfi_numeric(anc, cfg.phi),
                "cfi_single": fisher.cfi(strategies.single_povm(), single, cfg.phi),
                "cfi_ancilla": fisher.cfi(strategies.ancilla_povm(), anc, cfg.phi),
            }
        )
    summary = (
        f"crossover eta* = {fisher.crossover_noise(cfg.v):.6g} at v = {cfg.v:g}"
        if cfg.v > 0
        else "v = 0: ancilla scheme carries no information"
    )
    return rows, columns, summary


def _simulate_table(cfg: CliConfig):
    columns = [
        "eta", "v", "phi", "events", "repetitions", "mean_estimate",
        "sample_variance", "sd", "normalized_variance", "qcrb_reference",
    ]
    rows = []
    for i, eta in enumerate(cfg.etas):
        exp = _experiment(cfg, eta)
        res = lab.run_experiment(exp, point=i, workers=cfg.workers)
        rows.append(
            {
                "eta": eta,
                "v": exp.strategy.v,
                "phi": cfg.phi,
                "events": cfg.events,
                "repetitions": cfg.repetitions,
                "mean_estimate": float(res.estimates.mean()),
                "sample_variance": res.sample_variance,
                "sd": res.sd,
                "normalized_variance": res.normalized_variance,
                "qcrb_reference": res.qcrb_reference,
            }
        )
    last = rows[-1]
    return rows, columns, f"normalized variance {last['normalized_variance']:.6g} at eta = {last['eta']:g}"


def _sweep_table(cfg: CliConfig):
    columns = list(lab.SWEEP_COLUMNS) + (list(lab.SWEEP_SINGLE_COLUMNS) if cfg.include_single else [])
    rows = lab.sweep_noise(cfg.etas, _experiment(cfg, cfg.etas[0]), cfg.include_single, workers=cfg.workers)
    return rows, columns, f"crossover eta* = {fisher.crossover_noise(cfg.v):.6g} at v = {cfg.v:g}" if cfg.v > 0 else "v = 0: no crossover"


def _converge_table(cfg: CliConfig):
    rows = lab.convergence_study(_experiment(cfg, cfg.etas[0]), cfg.events_grid, workers=cfg.workers)
    onset = lab.asymptotic_onset(rows)
    summary = f"within 10% of 1/F from N = {onset}" if onset is not None else "not within 10% of 1/F on this grid"
    return rows, list(lab.CONVERGENCE_COLUMNS), summary


_DISPATCH = {
    "probs": _probs_table,
    "fisher": _fisher_table,
    "simulate": _simulate_table,
    "sweep": _sweep_table,
    "converge": _converge_table,
}


def run(cfg: CliConfig) -> int:
    try:
        rows, columns, summary = _DISPATCH[cfg.subcommand](cfg)
        emit_table(rows, cfg.fmt, cfg.output, columns)
    except (ArithmeticError, ValueError, OSError) as exc:
        print(f"qmetro: error: {exc}", file=sys.stderr)
        return 1
    print(f"qmetro {cfg.subcommand}: {summary}", file=sys.stderr)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"qmetro: usage error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
