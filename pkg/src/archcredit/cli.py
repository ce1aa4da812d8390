"""Command-line front end: configure experiments, dispatch estimators, and
emit CSV or markdown report tables.

Data rows go to stdout (or ``--output``); progress and diagnostics go to
stderr.  Exit codes: 0 success, 2 configuration error, 3 numerical or
estimation failure in at least one row.

Every row carries a fixed column set::

    method, alpha, n, b, estimate, std_error, rel_error_pct, var_reduction,
    asymptotic, discrepancy_pct, runtime_ms, seed

Numeric fields are emitted with 17 significant digits so parsing the CSV
recovers them exactly.  ``runtime_ms`` is left empty unless ``--timings`` is
given, keeping re-runs with the same seed and thread count byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

from .asymptotics import (
    AsymptoticInputs,
    expected_shortfall_asymptotic,
    tail_probability_asymptotic,
)
from .errors import EstimationError, NumericalError
from .estimators import EstimatorConfig, is_expected_shortfall, run_tail_estimate
from .portfolio import DefaultScale, Portfolio, SubPortfolio

COLUMNS = (
    "method",
    "alpha",
    "n",
    "b",
    "estimate",
    "std_error",
    "rel_error_pct",
    "var_reduction",
    "asymptotic",
    "discrepancy_pct",
    "runtime_ms",
    "seed",
)

_CONFIG_KEYS = {
    "alpha",
    "groups",
    "scale",
    "b",
    "n",
    "l",
    "c",
    "methods",
    "m",
    "seed",
    "threads",
    "x0",
    "format",
    "output",
    "asymptotic",
    "timings",
}

_SCALE_NAMES = {"reciprocal": "reciprocal", "log-reciprocal": "log_reciprocal", "constant": "constant"}


class ConfigError(ValueError):
    pass


@dataclass
class Settings:
    alpha: float = 1.5
    n: list[int] | None = None
    l: float = 0.5
    c: float = 1.0
    groups: list[dict] | None = None
    scale_kind: str = "reciprocal"
    scale_value: float | None = None
    b: list[float] | None = None
    methods: list[str] | None = None
    m: int = 50_000
    seed: int = 20240
    threads: int = 1
    x0: float = 1.0
    fmt: str = "csv"
    output: str | None = None
    asymptotic: bool = False
    timings: bool = False


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return f"{x:.17g}"


def _portfolio(settings: Settings, n: int) -> Portfolio:
    if settings.groups is not None:
        groups = []
        for g in settings.groups:
            extra = set(g) - {"exposure", "pd_scale", "count"}
            if extra:
                raise ConfigError(f"unknown group keys: {sorted(extra)}")
            try:
                groups.append(SubPortfolio(g["exposure"], g["pd_scale"], g["count"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad group {g}: {exc}") from exc
        return Portfolio(groups)
    return Portfolio.homogeneous(n, exposure=settings.c, pd_scale=settings.l)


def _scale(settings: Settings) -> DefaultScale:
    if settings.scale_kind == "constant":
        if settings.scale_value is None:
            raise ConfigError("constant scale requires --f (or scale.value in the config)")
        return DefaultScale.constant(settings.scale_value)
    return DefaultScale(settings.scale_kind)


def _load_config_file(path: str, settings: Settings) -> Settings:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "alpha" in raw:
        settings.alpha = float(raw["alpha"])
    if "groups" in raw:
        settings.groups = list(raw["groups"])
    if "scale" in raw:
        sc = raw["scale"]
        if not isinstance(sc, dict) or "kind" not in sc or set(sc) - {"kind", "value"}:
            raise ConfigError('config "scale" must be {"kind": ..., "value"?: ...}')
        kind = str(sc["kind"]).replace("-", "_")
        if kind not in ("reciprocal", "log_reciprocal", "constant"):
            raise ConfigError(f"unknown scale kind {sc['kind']!r}")
        settings.scale_kind = kind
        settings.scale_value = float(sc["value"]) if "value" in sc else None
    if "b" in raw:
        settings.b = [float(x) for x in (raw["b"] if isinstance(raw["b"], list) else [raw["b"]])]
    if "n" in raw:
        settings.n = [int(x) for x in (raw["n"] if isinstance(raw["n"], list) else [raw["n"]])]
    if "l" in raw:
        settings.l = float(raw["l"])
    if "c" in raw:
        settings.c = float(raw["c"])
    if "methods" in raw:
        settings.methods = [str(x) for x in raw["methods"]]
    if "m" in raw:
        settings.m = int(raw["m"])
    if "seed" in raw:
        settings.seed = int(raw["seed"])
    if "threads" in raw:
        settings.threads = int(raw["threads"])
    if "x0" in raw:
        settings.x0 = float(raw["x0"])
    if "format" in raw:
        settings.fmt = str(raw["format"])
    if "output" in raw:
        settings.output = str(raw["output"])
    if "asymptotic" in raw:
        settings.asymptotic = bool(raw["asymptotic"])
    if "timings" in raw:
        settings.timings = bool(raw["timings"])
    return settings


def _apply_flags(args, settings: Settings) -> Settings:
    if args.config:
        settings = _load_config_file(args.config, settings)
    for name, attr in (
        ("alpha", "alpha"),
        ("l", "l"),
        ("c", "c"),
        ("f", "scale_value"),
        ("m", "m"),
        ("seed", "seed"),
        ("threads", "threads"),
        ("x0", "x0"),
        ("output", "output"),
    ):
        val = getattr(args, name, None)
        if val is not None:
            setattr(settings, attr, val)
    if getattr(args, "scale", None) is not None:
        settings.scale_kind = _SCALE_NAMES[args.scale]
    if getattr(args, "n", None):
        settings.n = list(args.n)
    if getattr(args, "b", None):
        settings.b = list(args.b)
    if getattr(args, "method", None):
        settings.methods = list(args.method)
    if getattr(args, "format", None) is not None:
        settings.fmt = args.format
    if getattr(args, "asymptotic", False):
        settings.asymptotic = True
    if getattr(args, "timings", False):
        settings.timings = True
    if settings.fmt not in ("csv", "markdown"):
        raise ConfigError(f"unknown output format {settings.fmt!r}")
    return settings


def _row(method, alpha, n, b, seed, report=None, asym=None, timings=False):
    est = se = rel = vr = disc = runtime = None
    if report is not None:
        est = report.estimate
        se = report.std_error
        rel = report.rel_error_pct
        vr = report.variance_reduction
        if timings:
            runtime = report.runtime_s * 1000.0
        if asym is not None and asym > 0.0:
            disc = 100.0 * (report.estimate - asym) / asym
    return {
        "method": method,
        "alpha": _fmt(alpha),
        "n": _fmt(n),
        "b": _fmt(b),
        "estimate": _fmt(est),
        "std_error": _fmt(se),
        "rel_error_pct": _fmt(rel),
        "var_reduction": _fmt(vr),
        "asymptotic": _fmt(asym),
        "discrepancy_pct": _fmt(disc),
        "runtime_ms": _fmt(runtime),
        "seed": _fmt(seed),
    }


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


@dataclass
class _Task:
    """One planned report row: a validated config plus its display metadata."""

    method: str
    alpha: float
    n: int
    b: float
    seed: int
    config: EstimatorConfig
    runner: object
    asym: float | None


def _make_task(method, pf, settings, alpha, b, seed, asym) -> _Task:
    runner = is_expected_shortfall if method == "es_importance" else run_tail_estimate
    kind = "importance" if method == "es_importance" else method
    try:
        cfg = EstimatorConfig(
            portfolio=pf,
            alpha=alpha,
            scale=_scale(settings),
            b=b,
            m=settings.m,
            seed=seed,
            x0=settings.x0,
            kind=kind,
            threads=settings.threads,
        )
    except ValueError as exc:
        raise ConfigError(f"{method} (alpha={alpha}, n={pf.n}, b={b}): {exc}") from exc
    return _Task(method, alpha, pf.n, b, seed, cfg, runner, asym)


def _execute(tasks: list[_Task], settings: Settings) -> tuple[list[dict], bool]:
    rows: list[dict] = []
    failed = False
    for task in tasks:
        _log(
            f"running {task.method}: alpha={task.alpha} n={task.n} b={task.b} m={task.config.m}"
        )
        try:
            report = task.runner(task.config)
        except (NumericalError, EstimationError) as exc:
            _log(f"row failed ({task.method}, alpha={task.alpha}, n={task.n}, b={task.b}): {exc}")
            rows.append(_row(task.method, task.alpha, task.n, task.b, task.seed, asym=task.asym))
            failed = True
            continue
        rows.append(
            _row(
                task.method,
                task.alpha,
                task.n,
                task.b,
                task.seed,
                report,
                task.asym,
                settings.timings,
            )
        )
    return rows, failed


def _run_estimate_rows(settings: Settings) -> tuple[list[dict], bool]:
    methods = settings.methods if settings.methods is not None else ["importance", "conditional"]
    if not methods:
        raise ConfigError("estimator set is empty; pass at least one --method")
    for meth in methods:
        if meth not in ("naive", "importance", "conditional"):
            raise ConfigError(f"unknown estimator {meth!r}")
    tasks: list[_Task] = []
    idx = 0
    for n in settings.n or [500]:
        pf = _portfolio(settings, n)
        for b in settings.b or [0.8]:
            asym = None
            if settings.asymptotic:
                asym = tail_probability_asymptotic(
                    AsymptoticInputs(pf, settings.alpha, _scale(settings), b)
                )
            for meth in methods:
                tasks.append(_make_task(meth, pf, settings, settings.alpha, b, settings.seed + idx, asym))
                idx += 1
    return _execute(tasks, settings)


def _run_es_rows(settings: Settings) -> tuple[list[dict], bool]:
    tasks: list[_Task] = []
    idx = 0
    for n in settings.n or [500]:
        pf = _portfolio(settings, n)
        for b in settings.b or [0.8]:
            inputs = AsymptoticInputs(pf, settings.alpha, _scale(settings), b)
            asym = expected_shortfall_asymptotic(inputs)
            tasks.append(
                _make_task("es_importance", pf, settings, settings.alpha, b, settings.seed + idx, asym)
            )
            idx += 1
    return _execute(tasks, settings)


def _run_asymptotic_rows(settings: Settings, want_es: bool) -> tuple[list[dict], bool]:
    ns = settings.n or [500]
    bs = settings.b or [0.8]
    rows: list[dict] = []
    scale = _scale(settings)
    for n in ns:
        pf = _portfolio(settings, n)
        for b in bs:
            inputs = AsymptoticInputs(pf, settings.alpha, scale, b)
            tail = tail_probability_asymptotic(inputs)
            rows.append(_row("asymptotic_tail", settings.alpha, pf.n, b, None, asym=tail))
            if want_es:
                es = expected_shortfall_asymptotic(inputs)
                rows.append(_row("asymptotic_es", settings.alpha, pf.n, b, None, asym=es))
    return rows, False


_TABLE_PRESETS = {
    "2": dict(alphas=[1.1, 1.5, 2.0, 5.0], ns=[500], bs=[0.8], with_asym=False),
    "3": dict(alphas=[1.5], ns=[500], bs=[0.3, 0.5, 0.7, 0.9], with_asym=False),
    "4": dict(alphas=[1.5], ns=[100, 250, 500, 1000], bs=[0.8], with_asym=True),
}


def _run_table_rows(settings: Settings, table: str) -> tuple[list[dict], bool]:
    if table == "5":
        settings.n = [50, 100, 250, 500]
        settings.b = [0.8]
        return _run_es_rows(settings)
    preset = _TABLE_PRESETS[table]
    tasks: list[_Task] = []
    idx = 0
    for alpha in preset["alphas"]:
        for n in preset["ns"]:
            pf = _portfolio(settings, n)
            for b in preset["bs"]:
                asym = None
                if preset["with_asym"]:
                    asym = tail_probability_asymptotic(
                        AsymptoticInputs(pf, alpha, _scale(settings), b)
                    )
                for meth in ("importance", "conditional"):
                    tasks.append(_make_task(meth, pf, settings, alpha, b, settings.seed + idx, asym))
                    idx += 1
    return _execute(tasks, settings)


def _emit(rows: list[dict], settings: Settings) -> None:
    if settings.fmt == "csv":
        text = _render_csv(rows)
    else:
        text = _render_markdown(rows)
    if settings.output:
        with open(settings.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([row[c] for c in COLUMNS])
    return buf.getvalue()


def _render_markdown(rows: list[dict]) -> str:
    lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
    for row in rows:
        lines.append("| " + " | ".join(row[c] for c in COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archcredit",
        description="Large-loss probabilities and expected shortfall for "
        "Gumbel-copula credit portfolios",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_methods=False, with_es_flag=False):
        p.add_argument("--config", help="JSON config file; flags override its entries")
        p.add_argument("--alpha", type=float, help="copula tail-dependence index (> 1)")
        p.add_argument("--n", type=int, action="append", help="portfolio size (repeatable)")
        p.add_argument("--l", type=float, help="default-probability multiplier per obligor")
        p.add_argument("--c", type=float, help="exposure at default per obligor")
        p.add_argument(
            "--scale",
            choices=sorted(_SCALE_NAMES),
            help="default-probability scale rule f_n",
        )
        p.add_argument("--f", type=float, help="value for the constant scale")
        p.add_argument("--b", type=float, action="append", help="loss level (repeatable)")
        if with_methods:
            p.add_argument(
                "--method",
                action="append",
                choices=["naive", "importance", "conditional"],
                help="estimator to run (repeatable; default: importance and conditional)",
            )
        p.add_argument("--m", type=int, help="number of replications")
        p.add_argument("--seed", type=int, help="base seed; row i uses seed + i")
        p.add_argument("--threads", type=int, help="worker threads (part of the reproducibility contract)")
        p.add_argument("--x0", type=float, help="importance-sampling tail splice point")
        p.add_argument("--format", choices=["csv", "markdown"], help="output format")
        p.add_argument("--output", "-o", help="output path (default: stdout)")
        p.add_argument("--timings", action="store_true", help="fill the runtime_ms column")
        if with_es_flag:
            p.add_argument("--es", action="store_true", help="also emit shortfall asymptotics")

    p_est = sub.add_parser("estimate", help="tail-probability estimators")
    add_common(p_est, with_methods=True)
    p_est.add_argument(
        "--asymptotic", action="store_true", help="include the deterministic asymptotic column"
    )

    p_es = sub.add_parser("es", help="expected shortfall via importance sampling")
    add_common(p_es)

    p_asym = sub.add_parser("asymptotic", help="deterministic approximations only")
    add_common(p_asym, with_es_flag=True)

    p_table = sub.add_parser("table", help="preset experiment grids")
    p_table.add_argument("table", choices=["2", "3", "4", "5"])
    add_common(p_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _apply_flags(args, Settings())
        if args.command == "estimate":
            rows, failed = _run_estimate_rows(settings)
        elif args.command == "es":
            rows, failed = _run_es_rows(settings)
        elif args.command == "asymptotic":
            rows, failed = _run_asymptotic_rows(settings, args.es)
        else:
            rows, failed = _run_table_rows(settings, args.table)
    except (ConfigError, ValueError) as exc:
        _log(f"configuration error: {exc}")
        return 2
    except (NumericalError, EstimationError) as exc:
        _log(f"numerical failure: {exc}")
        return 3
    _emit(rows, settings)
    return 3 if failed else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
