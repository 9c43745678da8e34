"""Command-line front end: ``gqvar <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime error, 2 a check failed, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, fields

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK = 2
EXIT_USAGE = 64

SUBCOMMANDS = ("cumulants", "rates", "simulate", "asclt", "hypothesis")
MODELS = ("fbm", "subfbm", "bifbm", "gsfbm", "tabulated")
FORMATS = ("csv", "json")
USES = ("kappa3", "kappa4", "m_stat", "ks")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


def parse_n_list(text: str) -> tuple[int, ...]:
    """``a:b:x2`` doubles from a up to b; ``a,b,c`` lists; a bare integer is one size."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3 or parts[2] != "x2":
                raise ValueError
            a, b = int(parts[0]), int(parts[1])
            if a < 1 or b < a:
                raise ValueError
            out, n = [], a
            while n <= b:
                out.append(n)
                n *= 2
            return tuple(out)
        out = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"bad n-list {text!r}; use a:b:x2 or a comma list") from None
    if not out or any(n < 1 for n in out):
        raise UsageError(f"bad n-list {text!r}")
    return out


def format_n_list(ns) -> str:
    ns = list(ns)
    if len(ns) > 1 and all(b == 2 * a for a, b in zip(ns, ns[1:])):
        return f"{ns[0]}:{ns[-1]}:x2"
    return ",".join(str(n) for n in ns)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    model: str = "fbm"
    hurst: float | None = None
    hp: float | None = None
    k: float | None = None
    grid: str | None = None
    n_list: tuple = ()
    reps: int = 10000
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    use: str = "m_stat"
    phi: str = "indicator_nonpositive"
    threads: int | None = None
    samples: str | None = None

    def serialize(self) -> str:
        """Canonical key=value text: sorted keys, unset values omitted."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if value is None or value == ():
                continue
            text = format_n_list(value) if f.name == "n_list" else (repr(value) if isinstance(value, float) else str(value))
            lines.append(f"{f.name}={text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> RunConfig:
        values = parse_config_text(text)
        if "subcommand" not in values:
            raise UsageError("config needs a subcommand")
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        conv = {}
        for key, value in values.items():
            if value is None:
                continue
            conv[key] = _convert(key, value)
        cfg = cls(**conv)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.model not in MODELS:
            raise UsageError(f"unknown model {self.model!r}")
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {FORMATS}")
        if self.use not in USES:
            raise UsageError(f"use must be one of {USES}")
        if self.reps < 1:
            raise UsageError("reps must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("seed must fit in 64 unsigned bits")
        if self.threads is not None and self.threads < 1:
            raise UsageError("threads must be positive")


_INT_KEYS = {"reps", "seed", "threads"}
_FLOAT_KEYS = {"hurst", "hp", "k"}


def _convert(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None
    if key == "n_list":
        return parse_n_list(value)
    return value


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


# -- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gqvar", description="Quadratic variation of Gaussian processes: cumulants, rates, simulation.")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    s = argparse.SUPPRESS
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=s, help="key=value file; flags override it")
        p.add_argument("--model", choices=MODELS, default=s)
        p.add_argument("--hurst", type=float, default=s)
        p.add_argument("--hp", type=float, default=s, help="inner exponent H' for bifbm and gsfbm")
        p.add_argument("--k", type=float, default=s)
        p.add_argument("--grid", default=s, help="tabulated covariance CSV")
        p.add_argument("--n", dest="n_list", default=s, help="single size (same grammar as --n-list)")
        p.add_argument("--n-list", dest="n_list", default=s, help="a:b:x2 or comma list")
        p.add_argument("--reps", type=int, default=s)
        p.add_argument("--seed", type=int, default=s)
        p.add_argument("--out", default=s)
        p.add_argument("--format", choices=FORMATS, default=s)
        p.add_argument("--threads", type=int, default=s)
        p.add_argument("--use", choices=USES, default=s, help="sequence fitted by rates")
        p.add_argument("--phi", default=s, help="test function for asclt")
        p.add_argument("--samples", default=s, help="raw samples file (simulate)")
    return parser


def config_from_args(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    if not ns.get("subcommand"):
        raise UsageError("missing subcommand")
    values = {}
    path = ns.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    values.update(ns)
    return RunConfig.from_mapping(values)


# -- execution -------------------------------------------------------------

def build_model(cfg: RunConfig):
    from .errors import GqvarError
    from .models import CovarianceModel, read_tabulated

    def need(*names):
        missing = [n for n in names if getattr(cfg, n) is None]
        if missing:
            raise UsageError(f"model {cfg.model} needs --{' --'.join(missing)}")

    try:
        if cfg.model in ("fbm", "subfbm"):
            need("hurst")
            return getattr(CovarianceModel, cfg.model)(cfg.hurst)
        if cfg.model == "bifbm":
            need("hp", "k")
            return CovarianceModel.bifbm(cfg.hp, cfg.k)
        if cfg.model == "gsfbm":
            need("hp", "k")
            return CovarianceModel.gensubfbm(cfg.hp, cfg.k)
        need("grid", "hurst")
    except GqvarError as exc:
        raise UsageError(str(exc)) from None
    try:
        grid = read_tabulated(cfg.grid)
    except OSError as exc:
        raise RuntimeError(f"cannot read grid: {exc}") from None
    try:
        return CovarianceModel.tabulated(grid, cfg.hurst)
    except GqvarError as exc:
        raise UsageError(str(exc)) from None


def _emit(cfg: RunConfig, rows: list[dict], columns, payload=None) -> None:
    if cfg.format == "json":
        body = json.dumps(payload if payload is not None else rows, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
        body = buf.getvalue()
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)


def _say(line: str) -> None:
    print(line, file=sys.stderr)


def _sizes(cfg: RunConfig, default: tuple) -> tuple:
    return cfg.n_list or default


def run_cumulants(cfg, model) -> int:
    from .cumulants import CSV_FIELDS, report

    rows = []
    for n in _sizes(cfg, (100,)):
        rep = report(model, n)
        rows.append(rep.csv_row(model))
        _say(f"cumulants {model.label}({model.params_str()}) n={n} sigma_n_sq={rep.sigma_n_sq:.6g} m_stat={rep.m_stat:.6g}")
    _emit(cfg, rows, CSV_FIELDS)
    return EXIT_OK


def run_rates(cfg, model) -> int:
    from .rates import doubling, regime_check

    sizes = _sizes(cfg, tuple(doubling(128, 8192)))
    rep = regime_check(model, sizes, cfg.use, reps=cfg.reps, seed=cfg.seed)
    for p in rep["points"]:
        _say(f"rates {model.label}({model.params_str()}) n={p['n']} {cfg.use}={p['y']:.6g}")
    _say(f"rates fitted a={rep['fitted']['a']:.4f} b={rep['fitted']['b']:.4f} verdict={rep['verdict']}")
    flat = {"model": rep["model"], "params": model.params_str(), "use": rep["use"], "a": rep["fitted"]["a"],
            "b": rep["fitted"]["b"], "r2": rep["fitted"]["r2"], "theoretical_a": rep["theoretical"]["a"],
            "verdict": rep["verdict"]}
    _emit(cfg, [flat], flat.keys(), payload=rep)
    return EXIT_CHECK if rep["verdict"] == "FAIL" else EXIT_OK


def run_simulate(cfg, model) -> int:
    from .simulation import CSV_FIELDS, simulate, write_samples

    rows = []
    sizes = _sizes(cfg, (64,))
    for n in sizes:
        run = simulate(model, n, cfg.reps, cfg.seed)
        rows.append(run.csv_row(model))
        _say(f"simulate {model.label}({model.params_str()}) n={n} ks={run.ks_distance:.6g} var={run.empirical_var:.6g}")
        if cfg.samples:
            path = cfg.samples if len(sizes) == 1 else f"{cfg.samples}.{n}"
            write_samples(path, run)
    _emit(cfg, rows, CSV_FIELDS)
    return EXIT_OK


def run_asclt(cfg, model) -> int:
    from .simulation import asclt_average, path_factor

    rows = []
    for n in _sizes(cfg, (1024,)):
        res = asclt_average(model, n, cfg.phi, cfg.seed, factor=path_factor(model, n))
        rows.append({"model": model.label, "params": model.params_str(), "n": n, "phi": res.phi_id, "seed": res.seed,
                     "log_average": res.log_average, "target": res.target, "weight_sum": res.weight_sum})
        _say(f"asclt {model.label}({model.params_str()}) n={n} log_average={res.log_average:.6g} target={res.target:.6g}")
    _emit(cfg, rows, rows[0].keys())
    return EXIT_OK


def run_hypothesis(cfg, model) -> int:
    from .hypothesis import run_hypothesis_suite

    n = _sizes(cfg, (512,))[-1]
    records = run_hypothesis_suite(model, n)
    ok = all(r["pass"] for r in records)
    for r in records:
        _say(f"hypothesis {r['check']} {model.label}({model.params_str()}) n={n} pass={r['pass']}")
    payload = {"model": model.label, "params": model.params, "n": n, "checks": records, "pass": ok}
    rows = [{**r, "params": model.params_str()} for r in records]
    _emit(cfg, rows, ("check", "model", "params", "fitted_constant", "max_ratio", "pass"), payload=payload)
    return EXIT_OK if ok else EXIT_CHECK


_RUNNERS = {
    "cumulants": run_cumulants,
    "rates": run_rates,
    "simulate": run_simulate,
    "asclt": run_asclt,
    "hypothesis": run_hypothesis,
}


def run(cfg: RunConfig) -> int:
    if cfg.threads is not None:
        for var in _THREAD_VARS:
            os.environ[var] = str(cfg.threads)
    from .errors import GqvarError

    model = build_model(cfg)
    try:
        return _RUNNERS[cfg.subcommand](cfg, model)
    except (GqvarError, OSError, RuntimeError) as exc:
        _say(f"error: {exc}")
        return EXIT_ERROR


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
        return run(cfg)
    except UsageError as exc:
        _say(f"usage error: {exc}")
        return EXIT_USAGE
    except RuntimeError as exc:
        _say(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
