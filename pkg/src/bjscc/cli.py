"""Command-line front end: bound evaluation, simulation, and rate curves.

Configuration is a single TOML file (documented in docs/config_reference.md);
results are CSV with a fixed dialect (comma separator, '.' decimal point,
LF line endings, UTF-8) preceded by '#' comment lines that embed the fully
resolved configuration and the seed, so every output file is self-describing
and byte-reproducible.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 statistical contract failure under --strict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import secrets
import sys

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import __version__
from .bounds import (
    JsccInstance,
    SchemeDescriptor,
    WzInstance,
    baseline_bound,
    baseline_scheme,
    bsc_bound,
    disjoint_bound,
    disjoint_scheme,
    hybrid_bound,
    hybrid_scheme,
    side_info_bound,
)
from .probability import DistortionMatrix, Kernel, Pmf
from .rate_search import rate_curve
from .second_order import ConvergenceError
from .simulate import simulate_scheme, simulate_side_info_scheme


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class StrictFailure(RuntimeError):
    """A simulate row violated its statistical contract under --strict."""


def _get(table, key, types, path, required=True, default=None, check=None, what=""):
    if key not in table:
        if required:
            raise ConfigError(f"[{path}] missing required key '{key}'")
        return default
    val = table[key]
    if types is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, types) or isinstance(val, bool):
        raise ConfigError(f"[{path}].{key}: expected {what or types}, got {val!r}")
    if check is not None and not check(val):
        raise ConfigError(f"[{path}].{key}: value {val!r} out of range ({what})")
    return val


def _num_list(table, key, path, cast=float, check=None):
    val = table.get(key)
    if not isinstance(val, list) or not val:
        raise ConfigError(f"[{path}].{key}: expected a non-empty array")
    out = []
    for i, x in enumerate(val):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"[{path}].{key}[{i}]: expected a number, got {x!r}")
        x = cast(x)
        if check is not None and not check(x):
            raise ConfigError(f"[{path}].{key}[{i}]: value {x!r} out of range")
        out.append(x)
    return out


def _matrix(table, key, path):
    val = table.get(key)
    if not isinstance(val, list) or not val or not all(isinstance(r, list) for r in val):
        raise ConfigError(f"[{path}].{key}: expected an array of arrays")
    try:
        return np.array(val, dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"[{path}].{key}: ragged or non-numeric matrix ({exc})") from None


def _wrap(path, key, fn, *args):
    try:
        return fn(*args)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{path}].{key}: {exc}") from None


def _parse_scheme(cfg, K, path="scheme") -> SchemeDescriptor:
    table = cfg.get("scheme", {})
    kind = _get(table, "kind", str, path, default="disjoint", required=False,
                check=lambda s: s in ("disjoint", "baseline", "hybrid"),
                what="one of disjoint/baseline/hybrid")
    if kind == "disjoint":
        return disjoint_scheme(K)
    if kind == "baseline":
        return baseline_scheme(K)
    J = _get(table, "groups", int, path, check=lambda v: v >= 1, what="integer >= 1")
    if K % J != 0:
        raise ConfigError(f"[{path}].groups: {J} does not divide the decoder count {K}")
    return hybrid_scheme(J, K // J)


def _parse_instance(cfg) -> JsccInstance:
    path = "instance"
    t = cfg.get(path)
    if not isinstance(t, dict):
        raise ConfigError(f"[{path}]: missing table")
    K = _get(t, "decoders", int, path, check=lambda v: v >= 1, what="integer >= 1")
    D = _get(t, "distortion_limit", float, path, check=lambda v: v >= 0, what="real >= 0")
    return _wrap(path, "instance", JsccInstance,
                 _wrap(path, "source", Pmf, _num_list(t, "source", path)),
                 _wrap(path, "channel_input", Pmf, _num_list(t, "channel_input", path)),
                 _wrap(path, "reconstruction", Pmf, _num_list(t, "reconstruction", path)),
                 _wrap(path, "channel", Kernel, _matrix(t, "channel", path)),
                 _wrap(path, "distortion", DistortionMatrix, _matrix(t, "distortion", path)),
                 D, K)


def _parse_wz(cfg) -> WzInstance:
    path = "wyner_ziv"
    t = cfg.get(path)
    if not isinstance(t, dict):
        raise ConfigError(f"[{path}]: missing table")
    K = _get(t, "decoders", int, path, check=lambda v: v >= 1, what="integer >= 1")
    D = _get(t, "distortion_limit", float, path, check=lambda v: v >= 0, what="real >= 0")
    phi = _matrix(t, "reconstruction_map", path)
    if not np.array_equal(phi, np.round(phi)):
        raise ConfigError(f"[{path}].reconstruction_map: entries must be integer indices")
    return _wrap(path, "wyner_ziv", WzInstance,
                 _wrap(path, "source", Pmf, _num_list(t, "source", path)),
                 _wrap(path, "test_channel", Kernel, _matrix(t, "test_channel", path)),
                 _wrap(path, "side_info_channel", Kernel, _matrix(t, "side_info_channel", path)),
                 phi.astype(np.int64),
                 _wrap(path, "channel_input", Pmf, _num_list(t, "channel_input", path)),
                 _wrap(path, "channel", Kernel, _matrix(t, "channel", path)),
                 _wrap(path, "distortion", DistortionMatrix, _matrix(t, "distortion", path)),
                 D, K)


def _csv_table(comments: list[str], header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v
                         for v in row])
    return buf.getvalue()


def _comments(command: str, cfg: dict, seed=None) -> list[str]:
    out = [f"bjscc {__version__} {command}",
           f"config = {json.dumps(cfg, sort_keys=True, separators=(',', ':'))}"]
    if seed is not None:
        out.append(f"seed = {seed}")
    return out


def cmd_bound(cfg: dict, args) -> str:
    rows = []
    if "bsc" in cfg:
        t = cfg["bsc"]
        path = "bsc"
        n = _get(t, "n", int, path, check=lambda v: v >= 1, what="integer >= 1")
        delta = _get(t, "delta", float, path, check=lambda v: 0 <= v <= 1, what="real in [0,1]")
        M = _get(t, "M", float, path, check=lambda v: v >= 1, what="real >= 1")
        K = _get(t, "decoders", int, path, check=lambda v: v >= 1, what="integer >= 1")
        sd = _parse_scheme(t, K, path="bsc.scheme")
        rows.append(["bsc", sd.kind, sd.J, sd.L, K, n, delta, M, None,
                     bsc_bound(sd, n, delta, M)])
    elif "wyner_ziv" in cfg:
        inst = _parse_wz(cfg)
        rows.append(["wyner_ziv", "disjoint", inst.K, 1, inst.K, None, None, None,
                     inst.D, side_info_bound(inst)])
    elif "instance" in cfg:
        inst = _parse_instance(cfg)
        requested = cfg.get("bound", {}).get("schemes")
        if requested is None:
            schemes = [_parse_scheme(cfg, inst.K)]
        else:
            if not isinstance(requested, list) or not requested:
                raise ConfigError("[bound].schemes: expected a non-empty array of scheme tables")
            schemes = [_parse_scheme({"scheme": s}, inst.K, path="bound.schemes")
                       for s in requested]
        for sd in schemes:
            if sd.kind == "disjoint":
                val = disjoint_bound(inst)
            elif sd.kind == "baseline":
                val = baseline_bound(inst)
            else:
                val = hybrid_bound(inst, sd)
            rows.append(["general", sd.kind, sd.J, sd.L, inst.K, None, None, None,
                         inst.D, val])
    else:
        raise ConfigError("[bound]: need one of the tables [bsc], [instance], [wyner_ziv]")
    header = ["family", "scheme", "J", "L", "K", "n", "delta", "M", "D", "bound"]
    return _csv_table(_comments("bound", cfg), header, rows)


def cmd_simulate(cfg: dict, args) -> str:
    t = cfg.get("simulate")
    if not isinstance(t, dict):
        raise ConfigError("[simulate]: missing table")
    trials = _get(t, "trials", int, "simulate", check=lambda v: v >= 1, what="integer >= 1")
    seed = args.seed
    if seed is None:
        seed = _get(t, "seed", int, "simulate", required=False)
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed = {seed}", file=sys.stderr)
    backend = _get(t, "backend", str, "simulate", default="cell_table", required=False,
                   check=lambda s: s in ("cell_table", "stream"),
                   what="one of cell_table/stream")
    workers = args.workers

    if "wyner_ziv" in cfg:
        inst = _parse_wz(cfg)
        if backend != "cell_table":
            raise ConfigError("[simulate].backend: side-information runs support cell_table only")
        bound = side_info_bound(inst)
        res = simulate_side_info_scheme(inst, trials=trials, seed=seed, workers=workers)
        family, sd = "wyner_ziv", disjoint_scheme(inst.K)
    else:
        inst = _parse_instance(cfg)
        sd = _parse_scheme(cfg, inst.K)
        if sd.kind == "disjoint":
            bound = disjoint_bound(inst)
        elif sd.kind == "baseline":
            bound = baseline_bound(inst)
        else:
            bound = hybrid_bound(inst, sd)
        res = simulate_scheme(inst, sd, trials=trials, seed=seed, backend=backend,
                              workers=workers)
        family = "general"

    passed = res.p_hat <= bound + 3.0 * res.stderr
    header = ["family", "scheme", "backend", "J", "L", "K", "trials", "seed",
              "errors", "ties", "p_hat", "stderr", "bound", "pass"]
    rows = [[family, sd.kind, backend, sd.J, sd.L, sd.K, trials, seed,
             res.errors, res.ties, res.p_hat, res.stderr, bound, passed]]
    out = _csv_table(_comments("simulate", cfg, seed), header, rows)
    if args.strict and not passed:
        raise StrictFailure(out)
    return out


def cmd_rate_curve(cfg: dict, args) -> str:
    t = cfg.get("rate_curve")
    if not isinstance(t, dict):
        raise ConfigError("[rate_curve]: missing table")
    n_list = _num_list(t, "n", "rate_curve", cast=int, check=lambda v: v >= 1)
    k_list = _num_list(t, "decoders", "rate_curve", cast=int, check=lambda v: v >= 1)
    delta = _get(t, "delta", float, "rate_curve", check=lambda v: 0 <= v <= 1,
                 what="real in [0,1]")
    eps = _get(t, "eps", float, "rate_curve", check=lambda v: 0 < v < 1,
               what="real in (0,1)")
    schemes = t.get("schemes", ["disjoint", "baseline", "hybrid"])
    if (not isinstance(schemes, list) or not schemes
            or any(s not in ("disjoint", "baseline", "hybrid") for s in schemes)):
        raise ConfigError("[rate_curve].schemes: expected an array drawn from "
                          "disjoint/baseline/hybrid")
    points = rate_curve(n_list, delta, eps, k_list, schemes=schemes)
    header = ["scheme", "n", "delta", "eps", "K", "J_opt", "rate"]
    rows = [[p.scheme, p.n, p.delta, p.eps, p.K, p.J, p.rate] for p in points]
    return _csv_table(_comments("rate-curve", cfg), header, rows)


_COMMANDS = {"bound": cmd_bound, "simulate": cmd_simulate, "rate-curve": cmd_rate_curve}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bjscc",
        description="Broadcast joint source-channel coding workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("bound", "evaluate closed-form achievability bounds"),
        ("simulate", "Monte-Carlo simulation of the coding schemes"),
        ("rate-curve", "achievable-rate sweep over the BSC"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", default=None, help="output CSV path (default stdout)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
        p.add_argument("--deterministic", action="store_true",
                       help="accepted for compatibility; outputs are always "
                            "deterministic given the seed")
        p.add_argument("--strict", action="store_true",
                       help="exit 4 when a simulate row fails its statistical check")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.workers < 1:
        print("config error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        with open(args.config, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    except tomllib.TOMLDecodeError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        output = _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except StrictFailure as exc:
        output = str(exc)
        _emit(output, args.out)
        print("strict mode: statistical contract failed", file=sys.stderr)
        return 4
    _emit(output, args.out)
    return 0


def _emit(output: str, out_path):
    if out_path is None:
        sys.stdout.write(output)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(output)


if __name__ == "__main__":
    raise SystemExit(main())
