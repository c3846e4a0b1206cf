"""Command-line driver: constants, oracle estimates, verification suites,
parameter sweeps and suite summaries."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import constants as K
from .oracle import InequalitySpec, best_constant_estimate
from .transforms import ConditionError
from .verify import REDUCTIONS, THEOREMS, SuiteConfig, run_suite
from .weights import INF, WeightFormatError, make_log_grid, weight_from_dict

__all__ = ["ConfigError", "Job", "emit_report", "main", "parse_config", "run"]

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DEFAULT_GRID = (1e-6, 1e6, 4096)
DEFAULT_WINDOW = (1.0 / 8.0, 8.0)

INEQUALITIES = (
    "hardy-dec", "hardy-inc", "copson-dec", "copson-inc",
    "c1", "c2", "c3", "c4", "c1s1", "c2s1", "c3s1", "c4s1",
)
ORACLE_FORMS = {
    "ihi1": "IHI1", "ihi2": "IHI2", "ihi3": "IHI3", "ihi4": "IHI4",
    "plain-hardy": "PlainHardy", "plain-copson": "PlainCopson",
    "cone-hardy": "ConeHardy", "cone-copson": "ConeCopson",
}
VERIFY_THEOREMS = tuple(THEOREMS) + REDUCTIONS

_COMMON = {"cmd", "schema_version", "grid", "window", "seed", "out", "format"}
_KEYS = {
    "constant": _COMMON | {"ineq", "u", "v", "w", "p", "q", "s", "scan"},
    "oracle": _COMMON | {"form", "cone", "lift", "u", "v", "w", "p", "q", "s", "budget"},
    "verify": _COMMON | {"theorem", "samples", "cases", "budget", "negative_control"},
    "sweep": _COMMON | {"lattice", "scan"},
    "report": _COMMON | {"input"},
}
_LATTICE_KEYS = {"ineq", "u", "v", "w", "p", "q", "s"}

INSTANCE_COLUMNS = ("id", "theorem", "case", "left", "right", "ratio", "status", "reason")
SWEEP_COLUMNS = ("ineq", "p", "q", "s", "regime", "exactness", "total", "boundary", "error")
SUMMARY_COLUMNS = ("theorem", "case", "pass", "fail", "inconclusive", "pass_rate")


class ConfigError(ValueError):
    """A configuration that does not match the schema; ``path`` names the
    offending entry."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class Job:
    cmd: str
    params: dict = field(default_factory=dict)
    grid: tuple = DEFAULT_GRID
    window: tuple = DEFAULT_WINDOW
    seed: int = 0
    out: str | None = None
    format: str = "json"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _number(data, key, path, allow_inf=True):
    val = data[key]
    if isinstance(val, str) and allow_inf and val.lower() in ("inf", "infinity"):
        return INF
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(key if path == "$" else f"{path}.{key}", "expected a number")
    return float(val)


def _pair(val, path):
    if not (isinstance(val, (list, tuple)) and len(val) == 2):
        raise ConfigError(path, "expected [low, high]")
    lo, hi = (float(x) for x in val)
    if not (0 < lo <= 1 <= hi):
        raise ConfigError(path, "window must satisfy 0 < low <= 1 <= high")
    return (lo, hi)


def _grid(val, path):
    if isinstance(val, dict):
        unknown = set(val) - {"a", "b", "n"}
        if unknown:
            raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
        try:
            val = (val["a"], val["b"], val["n"])
        except KeyError as exc:
            raise ConfigError(f"{path}.{exc.args[0]}", "missing key") from None
    if not (isinstance(val, (list, tuple)) and len(val) == 3):
        raise ConfigError(path, "expected {a, b, n}")
    a, b, n = float(val[0]), float(val[1]), val[2]
    try:
        make_log_grid(a, b, n)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None
    return (a, b, int(n))


def _weight(data, key):
    if key not in data:
        raise ConfigError(key, "missing required weight")
    try:
        return weight_from_dict(data[key], key)
    except WeightFormatError as exc:
        raise ConfigError(exc.path, str(exc).split(": ", 1)[-1]) from None


def parse_config(text: str) -> Job:
    """Validate a JSON job description and fill in defaults."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("$", "expected an object")
    cmd = data.get("cmd")
    if cmd not in _KEYS:
        raise ConfigError("cmd", f"expected one of {sorted(_KEYS)}")
    unknown = sorted(set(data) - _KEYS[cmd])
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"only version {SCHEMA_VERSION} is supported")
    job = Job(cmd)
    if "grid" in data:
        job.grid = _grid(data["grid"], "grid")
    if "window" in data:
        job.window = _pair(data["window"], "window")
    if "seed" in data:
        if isinstance(data["seed"], bool) or not isinstance(data["seed"], int):
            raise ConfigError("seed", "expected an integer")
        job.seed = data["seed"]
    if "out" in data:
        job.out = str(data["out"])
    if "format" in data:
        if data["format"] not in ("json", "csv"):
            raise ConfigError("format", "expected 'json' or 'csv'")
        job.format = data["format"]
    job.params = _PARSERS[cmd](data)
    return job


def _parse_constant(data):
    ineq = data.get("ineq")
    if ineq not in INEQUALITIES:
        raise ConfigError("ineq", f"expected one of {list(INEQUALITIES)}")
    params = {"ineq": ineq}
    for key in ("u", "v", "w"):
        params[key] = _weight(data, key)
    for key in ("p", "q"):
        if key not in data:
            raise ConfigError(key, "missing required exponent")
        params[key] = _number(data, key, "$")
    if ineq in ("c1", "c2", "c3", "c4"):
        if "s" not in data:
            raise ConfigError("s", "missing required exponent")
        params["s"] = _number(data, "s", "$", allow_inf=False)
    elif "s" in data:
        raise ConfigError("s", f"not used by {ineq}")
    if "scan" in data:
        params["scan"] = _grid(data["scan"], "scan")
    return params


def _parse_oracle(data):
    form = data.get("form")
    if form not in ORACLE_FORMS:
        raise ConfigError("form", f"expected one of {list(ORACLE_FORMS)}")
    params = {"form": ORACLE_FORMS[form]}
    for key in ("u", "v", "w"):
        params[key] = _weight(data, key)
    for key in ("p", "q"):
        if key not in data:
            raise ConfigError(key, "missing required exponent")
        params[key] = _number(data, key, "$")
    if form.startswith("ihi"):
        if "s" not in data:
            raise ConfigError("s", "missing required exponent")
        params["s"] = _number(data, "s", "$")
    if "cone" in data:
        if data["cone"] not in ("Nonneg", "Dec", "Inc"):
            raise ConfigError("cone", "expected Nonneg, Dec or Inc")
        params["cone"] = data["cone"]
    if "lift" in data:
        params["lift"] = _number(data, "lift", "$", allow_inf=False)
    params["budget"] = _positive_int(data, "budget", 60)
    return params


def _positive_int(data, key, default):
    val = data.get(key, default)
    if isinstance(val, bool) or not isinstance(val, int) or val < 0:
        raise ConfigError(key, "expected a nonnegative integer")
    return val


def _parse_verify(data):
    theorem = data.get("theorem", "Thm2.5")
    if theorem not in VERIFY_THEOREMS:
        raise ConfigError("theorem", f"expected one of {list(VERIFY_THEOREMS)}")
    params = {"theorem": theorem, "samples": _positive_int(data, "samples", 20), "budget": _positive_int(data, "budget", 30)}
    if "cases" in data:
        cases = data["cases"]
        if not (isinstance(cases, list) and all(isinstance(c, str) for c in cases)):
            raise ConfigError("cases", "expected a list of case names")
        params["cases"] = tuple(cases)
    params["negative_control"] = bool(data.get("negative_control", False))
    return params


def _parse_sweep(data):
    lattice = data.get("lattice")
    if not isinstance(lattice, dict):
        raise ConfigError("lattice", "expected an object")
    unknown = sorted(set(lattice) - _LATTICE_KEYS)
    if unknown:
        raise ConfigError(f"lattice.{unknown[0]}", "unknown key")
    ineq = lattice.get("ineq")
    if ineq not in INEQUALITIES:
        raise ConfigError("lattice.ineq", f"expected one of {list(INEQUALITIES)}")
    params = {"ineq": ineq}
    for key in ("u", "v", "w"):
        if key not in lattice:
            raise ConfigError(f"lattice.{key}", "missing required weight")
        try:
            params[key] = weight_from_dict(lattice[key], f"lattice.{key}")
        except WeightFormatError as exc:
            raise ConfigError(exc.path, str(exc).split(": ", 1)[-1]) from None
    for key in ("p", "q", "s"):
        vals = lattice.get(key, [None] if key == "s" else None)
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"lattice.{key}", "expected a nonempty list")
        params[key] = [None if x is None else _number({key: x}, key, "lattice") for x in vals]
    if "scan" in data:
        params["scan"] = _grid(data["scan"], "scan")
    return params


def _parse_report(data):
    if not isinstance(data.get("input"), str):
        raise ConfigError("input", "expected a path to a suite report")
    return {"input": data["input"]}


_PARSERS = {
    "constant": _parse_constant,
    "oracle": _parse_oracle,
    "verify": _parse_verify,
    "sweep": _parse_sweep,
    "report": _parse_report,
}


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value"):
        return obj.value
    return str(obj)


def _csv_cell(val):
    if val is None:
        return ""
    if isinstance(val, (float, np.floating)):
        x = float(val)
        if math.isinf(x) or math.isnan(x):
            return ""
        return f"{x:.12g}"
    if isinstance(val, (dict, list, tuple)):
        return json.dumps(_jsonable(val), separators=(",", ":"))
    return str(val)


def emit_report(results, fmt: str = "json", columns=None) -> bytes:
    """Serialise results deterministically.

    JSON keeps the field order of ``results``; floats carry 12 significant
    digits and infinities become the string ``"inf"``.  CSV takes a list of
    flat rows (or a suite report, whose instances become the rows); infinite
    values become empty cells.
    """
    if fmt == "json":
        return (json.dumps(_jsonable(results), indent=2) + "\n").encode("utf-8")
    if fmt != "csv":
        raise ValueError("format must be 'json' or 'csv'")
    rows = results
    if isinstance(results, dict):
        rows = results.get("instances", [results])
        columns = columns or INSTANCE_COLUMNS
    rows = list(rows)
    if columns is None:
        columns = tuple(rows[0].keys()) if rows else INSTANCE_COLUMNS
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _scan(params):
    return K.ScanGrid(*params["scan"]) if "scan" in params else K.DEFAULT_SCAN


def _constant_report(ineq, u, v, w, p, q, s, scan) -> K.ConstantReport:
    if ineq == "hardy-dec":
        return K.hardy_decreasing_constant(u, v, w, p, q, scan)
    if ineq == "hardy-inc":
        return K.hardy_increasing_constant(u, v, w, p, q, scan)
    if ineq == "copson-inc":
        return K.hardy_dual_increasing_constant(u, v, w, p, q, scan)
    if ineq == "copson-dec":
        return K.copson_decreasing_constant(u, v, w, p, q, scan)
    if ineq.endswith("s1"):
        return K.iterated_constant_s1(ineq.upper(), u, v, w, p, q, scan)
    return K.iterated_constant(ineq.upper(), u, v, w, p, q, s, scan)


def _run_constant(job):
    pr = job.params
    rep = _constant_report(pr["ineq"], pr["u"], pr["v"], pr["w"], pr["p"], pr["q"], pr.get("s"), _scan(pr))
    out = {"schema_version": SCHEMA_VERSION, "ineq": pr["ineq"]}
    out.update(rep.to_dict())
    out["boundary"] = list(rep.boundary)
    out["notes"] = list(rep.notes)
    return EXIT_OK, emit_report(out if job.format == "json" else [_flat_constant(out)], job.format)


def _flat_constant(out):
    row = {k: out[k] for k in ("ineq", "regime", "exactness", "total")}
    for name, val in out["terms"].items():
        row[name] = val
    return row


def _run_oracle(job):
    pr = job.params
    spec = InequalitySpec(
        pr["form"], pr["u"], pr["v"], pr["w"], pr["p"], pr["q"], pr.get("s"),
        cone=pr.get("cone"), lift=pr.get("lift", 1.0), grid=make_log_grid(*job.grid),
    )
    est = best_constant_estimate(spec, budget=max(1, pr["budget"]), seed=job.seed)
    if job.format == "csv":
        return EXIT_OK, est.witness.to_csv().encode("utf-8")
    out = {"schema_version": SCHEMA_VERSION, "form": pr["form"], "cone": spec.cone}
    out.update(est.to_dict())
    return EXIT_OK, emit_report(out, "json")


def suite_config(job) -> SuiteConfig:
    pr = job.params
    theorem = pr["theorem"]
    if "cases" in pr:
        cases = pr["cases"]
    elif theorem in THEOREMS and THEOREMS[theorem][0].startswith("IHI") or theorem in REDUCTIONS:
        cases = ("i", "ii", "iii", "iv")
    else:
        cases = ("I", "II", "III", "IV")
    return SuiteConfig(
        theorems=(theorem,),
        cases=tuple(cases),
        samples=pr["samples"],
        grid=tuple(job.grid),
        equiv_window=tuple(job.window),
        seed=job.seed,
        budget=max(1, pr["budget"]),
        negative_control=pr["negative_control"],
    )


def _run_verify(job):
    report = run_suite(suite_config(job))
    report = {"schema_version": SCHEMA_VERSION, **report}
    failed = any(inst["status"] == "Fail" and inst["theorem"] != "negative_control" for inst in report["instances"])
    return (EXIT_FAIL if failed else EXIT_OK), emit_report(report, job.format)


def _run_sweep(job):
    pr = job.params
    rows = []
    for p, q, s in itertools.product(pr["p"], pr["q"], pr["s"]):
        row = {"ineq": pr["ineq"], "p": p, "q": q, "s": s}
        try:
            rep = _constant_report(pr["ineq"], pr["u"], pr["v"], pr["w"], p, q, s, _scan(pr))
            row.update(regime=rep.regime.value, exactness=rep.exactness, total=rep.total, boundary=";".join(rep.boundary), error="")
        except (ConditionError, ValueError) as exc:
            row.update(regime="", exactness="", total=None, boundary="", error=str(exc))
        rows.append(row)
    if job.format == "json":
        return EXIT_OK, emit_report({"schema_version": SCHEMA_VERSION, "rows": rows}, "json")
    return EXIT_OK, emit_report(rows, "csv", SWEEP_COLUMNS)


def summarize(report: dict) -> list:
    summary = report.get("summary", {})
    if "instances" in report:
        summary = {}
        for inst in report["instances"]:
            bucket = summary.setdefault(f"{inst['theorem']}/{inst['case']}", {"Pass": 0, "Fail": 0, "Inconclusive": 0})
            bucket[inst["status"]] += 1
    rows = []
    for key, counts in summary.items():
        theorem, _, case = key.partition("/")
        total = counts["Pass"] + counts["Fail"] + counts["Inconclusive"]
        rows.append({
            "theorem": theorem,
            "case": case,
            "pass": counts["Pass"],
            "fail": counts["Fail"],
            "inconclusive": counts["Inconclusive"],
            "pass_rate": counts["Pass"] / total if total else None,
        })
    return rows


def _run_report(job):
    with open(job.params["input"], encoding="utf-8") as fh:
        try:
            report = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("input", f"not a suite report: {exc.msg}") from None
    try:
        rows = summarize(report)
    except (AttributeError, KeyError, TypeError):
        raise ConfigError("input", "not a suite report") from None
    if job.format == "json":
        return EXIT_OK, emit_report({"schema_version": SCHEMA_VERSION, "summary": rows}, "json")
    return EXIT_OK, emit_report(rows, "csv", SUMMARY_COLUMNS)


_RUNNERS = {
    "constant": _run_constant,
    "oracle": _run_oracle,
    "verify": _run_verify,
    "sweep": _run_sweep,
    "report": _run_report,
}


def run(job: Job, stdout=None) -> int:
    """Execute a validated job, write its report and return the exit code."""
    stdout = stdout or sys.stdout
    try:
        code, payload = _RUNNERS[job.cmd](job)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConditionError as exc:
        print(f"condition failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"unsupported request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if job.out:
            with open(job.out, "wb") as fh:
                fh.write(payload)
        else:
            stdout.write(payload.decode("utf-8"))
            stdout.flush()
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardyiter", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON job, or the JSON text itself")
    common.add_argument("--grid", help="a,b,n")
    common.add_argument("--window", help="low,high")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"))
    p = sub.add_parser("constant", parents=[common], help="characterization constant")
    p.add_argument("--ineq", choices=INEQUALITIES)
    p = sub.add_parser("oracle", parents=[common], help="oracle estimate of a best constant")
    p.add_argument("--form", choices=tuple(ORACLE_FORMS))
    p.add_argument("--budget", type=int)
    p = sub.add_parser("verify", parents=[common], help="formula against oracle on sampled instances")
    p.add_argument("--theorem", choices=VERIFY_THEOREMS)
    p.add_argument("--samples", type=int)
    p.add_argument("--cases", help="comma-separated case names")
    p.add_argument("--budget", type=int)
    p.add_argument("--negative-control", action="store_true", default=None)
    p = sub.add_parser("sweep", parents=[common], help="constants over a parameter lattice")
    p.add_argument("--lattice", help="path to the lattice JSON")
    p = sub.add_parser("report", parents=[common], help="pass-rate summary of a suite report")
    p.add_argument("--input", help="path to a suite report")
    return parser


def _load_config(arg):
    if arg is None:
        return {}
    text = arg if arg.lstrip().startswith("{") else open(arg, encoding="utf-8").read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("$", "expected an object")
    return data


def _split(text, n, path, cast=float):
    parts = text.split(",")
    if len(parts) != n:
        raise ConfigError(path, f"expected {n} comma-separated values")
    try:
        return [cast(x) for x in parts]
    except ValueError:
        raise ConfigError(path, "not a number") from None


def job_from_args(args) -> Job:
    data = _load_config(args.config)
    if data.get("cmd", args.cmd) != args.cmd:
        raise ConfigError("cmd", f"config is for {data['cmd']!r}, not {args.cmd!r}")
    data["cmd"] = args.cmd
    simple = {"ineq": "ineq", "form": "form", "theorem": "theorem", "samples": "samples", "budget": "budget",
              "seed": "seed", "out": "out", "format": "format", "input": "input"}
    for attr, key in simple.items():
        val = getattr(args, attr, None)
        if val is not None:
            data[key] = val
    if getattr(args, "negative_control", None):
        data["negative_control"] = True
    if getattr(args, "cases", None):
        data["cases"] = args.cases.split(",")
    if args.grid:
        a, b, n = _split(args.grid, 3, "--grid")
        data["grid"] = {"a": a, "b": b, "n": int(n)}
    if args.window:
        data["window"] = _split(args.window, 2, "--window")
    if getattr(args, "lattice", None):
        with open(args.lattice, encoding="utf-8") as fh:
            try:
                data["lattice"] = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("lattice", f"invalid JSON: {exc.msg}") from None
    return parse_config(json.dumps(data))


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        job = job_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return run(job)


if __name__ == "__main__":
    sys.exit(main())
