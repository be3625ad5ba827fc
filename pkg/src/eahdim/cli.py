"""Command line front end: ``eahdim <command> --config run.json``.

Exit codes: 0 on success, 1 for bad input or exhausted budgets, 2 when a
numerical routine fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import io
import json
import math
import sys
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional

import numpy as np

from . import dimension, ifs as ifs_mod, oracle, symbolic
from .errors import InputError, NumericError, ResourceError

COMMANDS = ("dim", "sweep", "rates", "check-g", "witness", "count", "gapcheck", "pressure")
DEFAULT_FORMAT = {"sweep": "csv", "count": "csv"}
SWEEP_HEADER = ["v", "dim_lambda", "s_hat_plus", "s_hat_minus", "omega_plus", "omega_minus", "theta_star", "condition5"]
COUNT_HEADER = ["n", "count", "log_rate", "semantics"]

BUILTIN_ORACLES = {"continued_fraction": ifs_mod.continued_fraction_oracle}


# -- serialization -----------------------------------------------------------


def _fmt_float(x: float) -> Optional[float]:
    if not math.isfinite(x):
        return None
    return float("%.12g" % x)


def to_plain(obj: Any) -> Any:
    """JSON-ready copy with floats at 12 significant digits and dataclass field order."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_plain(x) for x in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [to_plain(x) for x in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(x: Any) -> str:
    x = to_plain(x)
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return repr(x) if isinstance(x, float) else str(x)


def render_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(x) for x in row])
    return buf.getvalue()


def _flat(x: Any) -> bool:
    return not isinstance(x, (dict, list)) or (isinstance(x, list) and all(not isinstance(i, (dict, list)) for i in x))


def _dump(x: Any, depth: int) -> str:
    # arrays of scalars (and of short scalar tuples) stay on one line
    pad, inner = "  " * depth, "  " * (depth + 1)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_dump(v, depth + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(x, list) and x and not all(_flat(i) for i in x):
        return "[\n" + ",\n".join(inner + _dump(i, depth + 1) for i in x) + "\n" + pad + "]"
    if isinstance(x, list) and x and not all(not isinstance(i, list) for i in x):
        return "[\n" + ",\n".join(inner + json.dumps(i) for i in x) + "\n" + pad + "]"
    return json.dumps(x)


def render_json(obj: Any) -> str:
    return _dump(to_plain(obj), 0) + "\n"


# -- config ------------------------------------------------------------------


def _int_list(x, what: str) -> tuple[int, ...]:
    if not isinstance(x, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in x):
        raise InputError(f"{what} must be an array of integers")
    return tuple(x)


def parse_ifs(doc: Optional[dict]) -> ifs_mod.IfsSpec:
    if not isinstance(doc, dict):
        raise InputError("config needs an 'ifs' object")
    if "oracle" in doc:
        name = doc["oracle"]
        if name == "similarity":
            return ifs_mod.ConformalOracle.from_similarity(doc.get("ratios", []), float(doc.get("distortion_log_K", 0.0)))
        if name not in BUILTIN_ORACLES:
            raise InputError(f"unknown builtin oracle {name!r}; known: {sorted(BUILTIN_ORACLES) + ['similarity']}")
        base = BUILTIN_ORACLES[name](int(doc.get("S", 2)))
        if "distortion_log_K" in doc:
            base = dataclasses.replace(base, distortion_log_K=float(doc["distortion_log_K"]))
        return base
    if "ratios" not in doc:
        raise InputError("ifs needs 'ratios' or 'oracle'")
    ratios = doc["ratios"]
    if not isinstance(ratios, list) or not all(isinstance(r, (int, float)) for r in ratios):
        raise InputError("ifs.ratios must be an array of numbers")
    return ifs_mod.Similarity(tuple(ratios))


def parse_target(doc: Optional[dict]) -> symbolic.TargetSpec:
    if not isinstance(doc, dict):
        raise InputError("config needs a 'target' object")
    kind = doc.get("type")
    if kind == "periodic":
        return symbolic.Periodic(_int_list(doc.get("word"), "target.word"))
    if kind == "explicit":
        fill = doc.get("tail_fill")
        if not isinstance(fill, int):
            raise InputError("explicit target needs an integer tail_fill")
        return symbolic.ExplicitPrefix(_int_list(doc.get("prefix"), "target.prefix"), fill)
    if kind == "doubling":
        return symbolic.DoublingBlocks(
            _int_list(doc.get("head", []), "target.head"), _int_list(doc.get("block_letters"), "target.block_letters")
        )
    raise InputError(f"target.type must be periodic, explicit or doubling, got {kind!r}")


def parse_window(params: dict):
    w = params.get("window")
    if w is None:
        return symbolic.FloorWindow(_num(params, "v"))
    if not isinstance(w, dict):
        raise InputError("params.window must be an object")
    if w.get("type") == "floor":
        v = w.get("v")
        # rationals such as "1/3" are kept exact
        return symbolic.FloorWindow(Fraction(v) if isinstance(v, str) else float(v))
    if w.get("type") == "power":
        return symbolic.PowerWindow(float(w.get("coeff", 1.0)), float(w.get("power", 2.0)))
    raise InputError("window.type must be 'floor' or 'power'")


def _num(params: dict, key: str, default=None):
    x = params.get(key, default)
    if x is None:
        raise InputError(f"missing parameter '{key}'")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"parameter '{key}' must be a number")
    return x


def _int(params: dict, key: str, default=None) -> int:
    x = _num(params, key, default)
    if int(x) != x:
        raise InputError(f"parameter '{key}' must be an integer")
    return int(x)


def _num_list(params: dict, key: str) -> list[float]:
    x = params.get(key)
    if isinstance(x, str):
        x = _parse_grid(x)
    if not isinstance(x, list) or not x or not all(isinstance(i, (int, float)) for i in x):
        raise InputError(f"parameter '{key}' must be a nonempty array of numbers")
    return [float(i) for i in x]


def _parse_grid(text: str) -> list[float]:
    """``"a:b:h"`` (inclusive range) or ``"x,y,z"``."""
    try:
        if ":" in text:
            a, b, h = (float(p) for p in text.split(":"))
            if not h > 0:
                raise InputError("grid step must be positive")
            k = int(math.floor((b - a) / h + 1e-9))
            return [round(a + i * h, 12) for i in range(k + 1)]
        return [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad grid {text!r}") from exc


def _search_cfg(params: dict) -> dimension.SearchConfig:
    kw = {}
    for key in ("M_lo", "M_hi", "stride", "grid_points"):
        if key in params:
            kw[key] = _int(params, key)
    return dimension.SearchConfig(**kw)


def _alphabet(cfg: dict, params: dict) -> int:
    if "S" in params:
        return _int(params, "S")
    return parse_ifs(cfg.get("ifs")).S


# -- commands ----------------------------------------------------------------


def _dim_report(ifs, t, v: float, params: dict) -> dimension.DimensionReport:
    case = dimension.classify_case(v)
    if case is not dimension.Case.RANGE01:
        dim = dimension.dim_attractor(ifs) if isinstance(ifs, ifs_mod.Similarity) else None
        return dimension.DimensionReport(dim, [], None, None, None, None, case, None, v)
    return dimension.omega_bounds(ifs, t, v, _search_cfg(params))


def _sweep_row(r: dimension.DimensionReport) -> list:
    return [r.v, r.dim_lambda, r.s_hat_plus, r.s_hat_minus, r.omega_plus_bound, r.omega_minus_bound, r.theta_star_plus, r.condition5_holds]


def cmd_dim(cfg, params, fmt, threads):
    r = _dim_report(parse_ifs(cfg.get("ifs")), parse_target(cfg.get("target")), float(_num(params, "v")), params)
    if fmt == "csv":
        return render_csv(SWEEP_HEADER, [_sweep_row(r)])
    return render_json(r)


def cmd_sweep(cfg, params, fmt, threads):
    ifs, t = parse_ifs(cfg.get("ifs")), parse_target(cfg.get("target"))
    grid = sorted(_num_list(params, "v_grid"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(lambda v: _dim_report(ifs, t, v, params), grid))
    else:
        reports = [_dim_report(ifs, t, v, params) for v in grid]
    rows = [_sweep_row(r) for r in reports]
    if fmt == "csv":
        return render_csv(SWEEP_HEADER, rows)
    return render_json([dict(zip(SWEEP_HEADER, row)) for row in rows])


def _read_word(params: dict) -> np.ndarray:
    if "e_prefix" in params:
        return np.asarray(_int_list(params["e_prefix"], "params.e_prefix"), dtype=np.int64)
    if "e_file" in params:
        try:
            with open(params["e_file"]) as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read e_file: {exc}") from exc
        tokens = text.replace(",", " ").split()
        if len(tokens) == 1 and len(tokens[0]) > 1:
            tokens = list(tokens[0])  # a bare digit string
        try:
            return np.asarray([int(x) for x in tokens], dtype=np.int64)
        except ValueError as exc:
            raise InputError("e_file must hold integer letters") from exc
    raise InputError("rates needs params.e_prefix or params.e_file")


def cmd_rates(cfg, params, fmt, threads):
    t = parse_target(cfg.get("target"))
    e = _read_word(params)
    if e.size == 0:
        raise InputError("e_prefix must be nonempty")
    d = symbolic.decompose_matches(e, t)
    est = symbolic.estimate_rates(d, _int(params, "tail_window", 8))
    out = {
        "rates": est,
        "n_filtered": d.n_filtered,
        "m_filtered": d.m_filtered,
        "runs": len(d.n_prime),
        "truncated": d.truncated,
        "lambda_shift": symbolic.in_lambda_t_prefix(e, t),
    }
    return render_json(out)


def cmd_check_g(cfg, params, fmt, threads):
    t = parse_target(cfg.get("target"))
    res = symbolic.is_in_G_up_to(t, _int(params, "N0", 1), _int(params, "n_max"))
    v = res.first_violation
    return render_json({"ok": res.ok, "first_violation": None if v is None else v._asdict()})


def cmd_witness(cfg, params, fmt, threads):
    t = parse_target(cfg.get("target"))
    S = _alphabet(cfg, params) if ("S" in params or "ifs" in cfg) else max(2, max(t.letters))
    Lc = oracle.build_L(t, float(_num(params, "theta")), float(_num(params, "v")), _int(params, "depth", 1000), S)
    out = {
        "theta": Lc.theta,
        "v": Lc.v,
        "a": Lc.a,
        "n_k": Lc.n_k,
        "m_k": Lc.m_k,
        "depth": Lc.depth,
        "witness_prefix": Lc.witness_prefix,
    }
    return render_json(out)


def cmd_count(cfg, params, fmt, threads):
    t = parse_target(cfg.get("target"))
    S = _alphabet(cfg, params)
    window = parse_window(params)
    ns = params.get("n")
    ns = ns if isinstance(ns, list) else [_int(params, "n")]
    sem = params.get("semantics", "pessimistic")
    sems = list(symbolic.Semantics) if sem == "both" else [symbolic.Semantics(sem)]
    method = params.get("method", "dp")
    results = [oracle.count_eah_words(S, t, window, int(n), s, method) for n in ns for s in sems]
    if fmt == "csv":
        return render_csv(COUNT_HEADER, [[r.n, r.count, r.log_rate, r.semantics] for r in results])
    return render_json(results)


def cmd_gapcheck(cfg, params, fmt, threads):
    ifs, t = parse_ifs(cfg.get("ifs")), parse_target(cfg.get("target"))
    deltas = _num_list(params, "delta_list") if "delta_list" in params else [10.0**-k for k in range(1, 6)]
    rep = dimension.gap_bound_check(ifs, t, float(_num(params, "theta")), float(_num(params, "v")), deltas)
    return render_json(rep)


def cmd_pressure(cfg, params, fmt, threads):
    ifs = parse_ifs(cfg.get("ifs"))
    s_values = _num_list(params, "s") if isinstance(params.get("s"), (list, str)) else [float(_num(params, "s", 1.0))]
    rows = []
    if isinstance(ifs, ifs_mod.Similarity):
        for s in s_values:
            rows.append({"s": s, "pressure": ifs_mod.pressure(ifs, s), "derivative": ifs_mod.pressure_derivative(ifs, s)})
        out = {"dim_attractor": ifs_mod.dim_attractor(ifs), "values": rows}
    else:
        n = _int(params, "n", 8)
        for s in s_values:
            lo, hi = ifs_mod.pressure_bracket(ifs, s, n)
            rows.append({"s": s, "lower": lo, "upper": hi})
        lo, hi = ifs_mod.linear_root_bracket(ifs, 0.0, n)
        out = {"dim_bracket": [lo, hi], "n": n, "values": rows}
    if fmt == "csv":
        return render_csv(list(rows[0]), [list(r.values()) for r in rows])
    return render_json(out)


HANDLERS = {
    "dim": cmd_dim,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "check-g": cmd_check_g,
    "witness": cmd_witness,
    "count": cmd_count,
    "gapcheck": cmd_gapcheck,
    "pressure": cmd_pressure,
}

# scalar overrides available as flags
FLAG_PARAMS = {
    "v": float, "theta": float, "delta": float, "epsilon": float, "s": float,
    "n": int, "depth": int, "N0": int, "n_max": int, "tail_window": int,
    "M_lo": int, "M_hi": int, "stride": int, "S": int,
    "semantics": str, "method": str, "v_grid": str, "delta_list": str,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eahdim", description="Dimension bounds for eventually-always-hitting sets.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--threads", type=int, default=1)
    for key, typ in FLAG_PARAMS.items():
        p.add_argument("--" + key.replace("_", "-"), dest="p_" + key, type=typ, default=None)
    p.add_argument("--param", action="append", default=[], metavar="KEY=JSON", help="override any params entry")
    return p


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    return doc


def run(argv: Optional[list[str]] = None) -> tuple[int, str, bool]:
    """Execute a command; returns ``(exit code, output text, written to a file)``."""
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        params = dict(cfg.get("params") or {})
        for key in FLAG_PARAMS:
            val = getattr(args, "p_" + key)
            if val is not None:
                params[key] = val
        for item in args.param:
            key, sep, raw = item.partition("=")
            if not sep:
                raise InputError(f"--param expects KEY=VALUE, got {item!r}")
            try:
                params[key] = json.loads(raw)
            except json.JSONDecodeError:
                params[key] = raw
        out_cfg = cfg.get("output") or {}
        fmt = args.format or out_cfg.get("format") or DEFAULT_FORMAT.get(args.command, "json")
        if fmt not in ("json", "csv"):
            raise InputError(f"unknown output format {fmt!r}")
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        try:
            text = HANDLERS[args.command](cfg, params, fmt, args.threads)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (InputError, NumericError)):
                raise
            raise InputError(f"bad configuration: {exc}") from exc
        path = args.out or out_cfg.get("path")
        if path:
            try:
                with open(path, "w") as fh:
                    fh.write(text)
            except OSError as exc:
                raise InputError(f"cannot write output: {exc}") from exc
        return 0, text, bool(path)
    except (InputError, ResourceError) as exc:
        return 1, f"error: {exc}\n", False
    except NumericError as exc:
        return 2, f"numeric error: {exc}\n", False


def main(argv: Optional[list[str]] = None) -> int:
    code, text, written = run(argv)
    if code:
        sys.stderr.write(text)
    elif not written:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
