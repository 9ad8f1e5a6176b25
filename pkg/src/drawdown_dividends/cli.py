"""Command-line front door.

    drawdown-dividends CONFIG.json [--output PATH] [--format json|csv]
                                   [--seed-override N] [--threads N]

The config names the command and carries every input; see docs/config.md.
Exit codes: 0 success, 2 invalid input (JSON error object on stderr),
3 numerical failure (no bracket, singularity, empty feasible set).
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from typing import Optional

import numpy as np

from .drawdown import drawdown_from_dict, validate
from .errors import ConfigError, NoBracketError
from .models import model_from_dict
from .pontryagin import PMPConfig, optimize, verify_pmp

COMMANDS = ("scale", "value", "optimize", "simulate", "oracle", "verify")
TOP_KEYS = {"command", "model", "drawdown", "problem", "sim", "oracle", "query", "output", "format"}
REQUIRED = {
    "scale": {"model", "query"},
    "value": {"model", "drawdown", "query"},
    "optimize": {"model", "problem"},
    "simulate": {"model", "drawdown", "sim"},
    "oracle": {"model", "problem"},
    "verify": {"model", "problem"},
}
PROBLEM_KEYS = {"a", "d_a", "d_a_max", "K", "u_max"}
SIM_KEYS = {"dt", "n_paths", "seed", "t_max", "floor", "b", "x0", "functional", "x"}
ORACLE_KEYS = {"n_segments", "b_grid"}
QUERY_KEYS = {"x", "b", "x_grid"}


class InputError(ValueError):
    """Validation failure carrying a machine-readable payload."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return f"{float(v):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _only(section: str, d: dict, allowed: set):
    if not isinstance(d, dict):
        raise InputError(f"section {section!r} must be an object")
    extra = set(d) - allowed
    if extra:
        raise InputError(f"unknown keys in {section!r}: {sorted(extra)}", {"section": section, "keys": sorted(extra)})


# parsing


def parse_config(cfg: dict) -> dict:
    """Validate the raw config and build domain objects; raises InputError / ConfigError."""
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    _only("config", cfg, TOP_KEYS)
    cmd = cfg.get("command")
    if cmd not in COMMANDS:
        raise InputError(f"command must be one of {list(COMMANDS)}, got {cmd!r}")
    missing = REQUIRED[cmd] - set(cfg)
    if missing:
        raise InputError(f"command {cmd!r} needs sections {sorted(missing)}", {"missing": sorted(missing)})
    out = {"command": cmd, "raw": cfg}
    out["model"] = model_from_dict(cfg["model"])
    if "drawdown" in cfg:
        dd = drawdown_from_dict(cfg["drawdown"])
        v = validate(dd)
        if v is not None:
            raise InputError(f"{v.clause}: {v.detail}", v.to_dict())
        out["drawdown"] = dd
    if "problem" in cfg:
        p = cfg["problem"]
        _only("problem", p, PROBLEM_KEYS)
        out["problem"] = PMPConfig(out["model"], **p)
    if "sim" in cfg:
        _only("sim", cfg["sim"], SIM_KEYS)
        f = cfg["sim"].get("functional", "value")
        if f not in ("value", "survival"):
            raise InputError(f"sim.functional must be 'value' or 'survival', got {f!r}")
    if "oracle" in cfg:
        _only("oracle", cfg["oracle"], ORACLE_KEYS)
    if "query" in cfg:
        _only("query", cfg["query"], QUERY_KEYS)
    fmt = cfg.get("format", "json")
    if fmt not in ("json", "csv"):
        raise InputError(f"format must be json or csv, got {fmt!r}")
    return out


def _sim_config(parsed, dd, b=None, x0=None, threads=None):
    from .simulate import SimConfig

    s = dict(parsed["raw"].get("sim", {}))
    s.pop("functional", None)
    s.pop("x", None)
    if b is not None:
        s.setdefault("b", b)
    if x0 is not None:
        s.setdefault("x0", x0)
    if "b" not in s or "x0" not in s:
        raise InputError("sim needs b and x0")
    return SimConfig(parsed["model"], dd, threads=threads, **s)


# commands


def cmd_scale(parsed, fmt, threads):
    m = parsed["model"].base
    q = parsed["raw"]["query"]
    if "x_grid" not in q:
        raise InputError("scale needs query.x_grid")
    x = np.asarray(q["x_grid"], dtype=float)
    cols = {
        "x": x,
        "W": m.scale_w(x, 0),
        "W1": m.scale_w(x, 1),
        "W2": m.scale_w(x, 2),
        "nu": np.where(x > 0, m.nu(np.where(x > 0, x, 1.0)), np.inf),
        "nu1": np.where(x > 0, m.nu_prime(np.where(x > 0, x, 1.0)), -np.inf),
    }
    res = {"phi_q": m.phi_q, "rho_q": m.rho_q, "delta": m.delta, "table": {k: np.atleast_1d(v) for k, v in cols.items()}}
    return res, _table_csv(cols)


def cmd_value(parsed, fmt, threads):
    from .valuation import objective_J, value

    q = parsed["raw"]["query"]
    if "x" not in q or "b" not in q:
        raise InputError("value needs query.x and query.b")
    tm, dd = parsed["model"], parsed["drawdown"]
    vb = value(tm, dd, float(q["x"]), float(q["b"]))
    res = vb.to_dict()
    if float(q["x"]) == dd.a:
        res["J"] = objective_J(tm, dd, dd.a, float(q["b"]))
    return res, _kv_csv(res)


def cmd_optimize(parsed, fmt, threads):
    sol = optimize(parsed["problem"])
    res = sol.to_dict()
    csv = sol.costate.to_csv() if sol.costate is not None else "t,d,u,p,switching_value\n"
    return res, csv


def cmd_simulate(parsed, fmt, threads):
    from .simulate import simulate_survival_factor, simulate_value

    sim = parsed["raw"]["sim"]
    cfg = _sim_config(parsed, parsed["drawdown"], threads=threads)
    if sim.get("functional", "value") == "value":
        r = simulate_value(cfg)
    else:
        r = simulate_survival_factor(cfg, sim.get("x", cfg.x0), cfg.b)
    res = {**r.to_dict(), "functional": sim.get("functional", "value"), "t_max": cfg.t_max}
    return res, _kv_csv(res)


def _oracle_config(parsed, b_star):
    from .oracle import OracleConfig, centered_grid

    o = parsed["raw"].get("oracle", {})
    pc = parsed["problem"]
    if pc.free_initial:
        raise InputError("the oracle needs problem.d_a")
    grid = o.get("b_grid") or centered_grid(b_star, pc.a)
    return OracleConfig(pc.model, tuple(grid), pc.a, float(pc.d_a), pc.u_max, pc.K, o.get("n_segments", 12))


def cmd_oracle(parsed, fmt, threads):
    from .oracle import compare_with_pmp, enumerate_controls

    sol = optimize(parsed["problem"])
    oc = _oracle_config(parsed, sol.b_star)
    r = enumerate_controls(oc, keep_table=fmt == "csv", threads=threads)
    res = {**r.to_dict(), "b_grid": list(oc.b_grid), "comparison": compare_with_pmp(r, sol, parsed["problem"]).to_dict()}
    return res, (r.to_csv() if fmt == "csv" else "")


def cmd_verify(parsed, fmt, threads):
    """optimize -> verify_pmp -> oracle -> simulate, one pass/fail report."""
    from .oracle import compare_with_pmp, enumerate_controls
    from .simulate import simulate_value

    pc = parsed["problem"]
    sol = optimize(pc)
    rep = verify_pmp(pc.model, sol, pc)
    stages = {"optimize": sol.to_dict(), "verify_pmp": rep.to_dict()}
    ok = rep.passed
    if not pc.free_initial and float(pc.d_a) > 0:
        oc = _oracle_config(parsed, sol.b_star)
        orr = enumerate_controls(oc, threads=threads)
        cmp_ = compare_with_pmp(orr, sol, pc)
        stages["oracle"] = {**orr.to_dict(), "comparison": cmp_.to_dict()}
        ok = ok and cmp_.passed
    else:
        stages["oracle"] = {"skipped": "objective is infinite when d(a) = 0"}
    if "sim" in parsed["raw"] and sol.dd.d_a > 0:
        cfg = _sim_config(parsed, sol.dd, b=sol.b_star, x0=sol.dd.a, threads=threads)
        r = simulate_value(cfg)
        z = r.zscore(sol.value)
        stages["simulate"] = {**r.to_dict(), "analytic": sol.value, "zscore": z, "passed": bool(abs(z) < 4.0),
                              "marginal": bool(3.0 <= abs(z) < 4.0)}
        ok = ok and abs(z) < 4.0
    else:
        stages["simulate"] = {"skipped": "no sim section or d(a) = 0"}
    res = {"passed": bool(ok), "stages": stages}
    return res, _kv_csv({"passed": ok})


HANDLERS = {
    "scale": cmd_scale,
    "value": cmd_value,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def _table_csv(cols: dict) -> str:
    buf = io.StringIO()
    keys = list(cols)
    buf.write(",".join(keys) + "\n")
    arrs = [np.atleast_1d(cols[k]) for k in keys]
    for row in zip(*arrs):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _kv_csv(d: dict) -> str:
    flat = {k: v for k, v in d.items() if isinstance(v, (int, float, bool, np.floating, np.integer, np.bool_))}
    return _table_csv({k: [v] for k, v in flat.items()})


# entry point


def run(cfg: dict, output: Optional[str] = None, fmt: Optional[str] = None, seed_override: Optional[int] = None,
        threads: Optional[int] = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    t0 = time.perf_counter()
    try:
        cfg = json.loads(json.dumps(cfg))
        if seed_override is not None and isinstance(cfg.get("sim"), dict):
            cfg["sim"]["seed"] = int(seed_override)
        if fmt is not None:
            cfg["format"] = fmt
        if output is not None:
            cfg["output"] = output
        parsed = parse_config(cfg)
        fmt = cfg.get("format", "json")
        res, csv = HANDLERS[parsed["command"]](parsed, fmt, threads)
    except (InputError, ConfigError, ValueError, KeyError, TypeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": 2}
        err.update(getattr(exc, "payload", {}))
        stderr.write(json.dumps(_jsonable(err)) + "\n")
        return 2
    except ArithmeticError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": 3}
        if isinstance(exc, NoBracketError):
            err["diagnostic"] = exc.diagnostic
        stderr.write(json.dumps(_jsonable(err)) + "\n")
        return 3
    res = {"command": parsed["command"], "result": res, "config": cfg, "runtime": time.perf_counter() - t0}
    text = csv if fmt == "csv" else json.dumps(_jsonable(res), indent=2) + "\n"
    dest = cfg.get("output")
    if dest in (None, "-", "stdout"):
        stdout.write(text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="drawdown-dividends", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="run config JSON file ('-' for stdin)")
    ap.add_argument("--output", default=None)
    ap.add_argument("--format", choices=["json", "csv"], default=None)
    ap.add_argument("--seed-override", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else open(args.config).read()
        cfg = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 2}) + "\n")
        return 2
    return run(cfg, args.output, args.format, args.seed_override, args.threads)


if __name__ == "__main__":
    sys.exit(main())
