"""Command-line front end: corpus generation, norms, decompositions and lemma checks.

Exit codes: 0 success, 2 invariant violation, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .atomic import ball_cover_report, decompose, l1_constant, validate_atom, verify_cone_bound
from .corpus import KINDS, generate_entries
from .gamma import GaussianSampler
from .geometry import (
    build_direction_net,
    check_ball_cover,
    cone_lemma_run,
    greedy_ball_cover,
    net_two_point_check,
    random_open_set,
    sector_constant,
    sector_diameter_check,
    sector_fraction_mc,
    sector_lemma_check,
    SET_SCALE,
)
from .halfspace import NormedSpace, build_grid, load_function, save_function, shadow_inside
from .maximal import WEAK_TYPE_CONSTANT, extension, weak_type_bound
from .sets import Ball, OpenSet
from .tentnorm import tent_norm_infty, tent_norm_p

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 2, 3

DEFAULTS = {
    "grid": {"n": 1, "L": 4.0, "h": 0.0625, "T": 2.0, "J": 5},
    "space": {"d": 1, "norm": "euclidean"},
    "seed": 0,
    "samples": 20_000,
    "format": "json",
    "out": None,
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- config -----------------------------------------------------------------


def _parse_grid(text: str) -> dict:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 5:
        raise ConfigError("--grid takes n,L,h,T,J")
    try:
        n, L, h, T, J = int(parts[0]), float(parts[1]), _number(parts[2]), float(parts[3]), int(parts[4])
    except ValueError as e:
        raise ConfigError(f"bad --grid value: {e}") from None
    return {"n": n, "L": L, "h": h, "T": T, "J": J}


def _number(s: str) -> float:
    if "/" in s:
        a, b = s.split("/")
        return float(a) / float(b)
    return float(s)


def _parse_space(text: str) -> dict:
    d, _, norm = str(text).partition(",")
    try:
        return {"d": int(d), "norm": norm.strip() or "euclidean"}
    except ValueError:
        raise ConfigError("--space takes d,norm") from None


def _floats(text: str) -> list:
    try:
        return [math.inf if s.strip() in ("inf", "infty") else float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad number list {text!r}") from None


COMMAND_DEFAULTS = {
    "generate": {"count": 12, "kinds": ",".join(KINDS), "aperture": 1.0},
    "norms": {"p": "1", "alpha": "1"},
    "decompose": {},
    "verify-lemmas": {"trials": 20, "cone_samples": 10_000},
}
_META = ("config", "grid", "space", "command", "func")


def resolve_config(args) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg.update(COMMAND_DEFAULTS.get(args.command, {}))
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in raw.items():
            if key == "grid" and isinstance(val, str):
                val = _parse_grid(val)
            if key == "space" and isinstance(val, str):
                val = _parse_space(val)
            if isinstance(val, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(val)
            else:
                cfg[key] = val
    if args.grid is not None:
        cfg["grid"] = _parse_grid(args.grid)
    if args.space is not None:
        cfg["space"] = _parse_space(args.space)
    for key, val in vars(args).items():
        if key not in _META and val is not None:
            cfg[key] = val
    if cfg["format"] not in ("json", "csv"):
        raise ConfigError("--format must be json or csv")
    if int(cfg["samples"]) < 2:
        raise ConfigError("--samples must be at least 2")
    return cfg


def _grid(cfg):
    g = cfg["grid"]
    try:
        return build_grid(g["n"], g["L"], g["h"], g["T"], g["J"])
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid grid: {e}") from None


def _space(cfg):
    try:
        return NormedSpace.from_tag(int(cfg["space"]["d"]), cfg["space"]["norm"])
    except (KeyError, ValueError) as e:
        raise ConfigError(f"invalid space: {e}") from None


# -- output -----------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(_jsonable(v))
        else:
            out[key] = v
    return out


def _to_csv(report: dict) -> str:
    buf = io.StringIO()
    rows = report.get("rows")
    if rows:
        flat = [_flatten(r) for r in rows]
        keys = list(dict.fromkeys(k for r in flat for k in r))
        w = csv.DictWriter(buf, fieldnames=keys)
        w.writeheader()
        w.writerows(flat)
    else:
        w = csv.writer(buf)
        w.writerow(["key", "value"])
        for k, v in _flatten({k: v for k, v in report.items() if k != "config"}).items():
            w.writerow([k, v])
    return buf.getvalue()


def emit(report: dict, cfg: dict, name: str = "report"):
    report = _jsonable(report)
    text = _to_csv(report) if cfg["format"] == "csv" else json.dumps(report, indent=1)
    if cfg.get("out"):
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.{cfg['format']}").write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_inputs(path) -> list:
    """[(name, GridFunction, ball or None)] from a function file, a manifest or a directory."""
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    if not p.exists():
        raise ConfigError(f"no such input {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p} is not JSON: {e}") from None
    if "entries" in doc:
        out = []
        for e in doc["entries"]:
            ball = Ball(e["ball"]["center"], e["ball"]["radius"]) if e.get("ball") else None
            out.append((e["file"], load_function(p.parent / e["file"]), ball))
        return out
    try:
        return [(p.name, load_function(p), None)]
    except (KeyError, ValueError) as e:
        raise ConfigError(f"cannot load {p}: {e}") from None


# -- commands ---------------------------------------------------------------


def cmd_generate(cfg) -> int:
    if not cfg.get("out"):
        raise ConfigError("generate needs --out")
    grid, space = _grid(cfg), _space(cfg)
    kinds = tuple(k.strip() for k in str(cfg["kinds"]).split(","))
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise ConfigError(f"unknown kinds {bad}; choose from {list(KINDS)}")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    entries = generate_entries(grid, space, int(cfg["count"]), int(cfg["seed"]), kinds, float(cfg["aperture"]))
    sampler = GaussianSampler(int(cfg["seed"]))
    rows, failures = [], 0
    for i, (kind, f, ball) in enumerate(entries):
        name = f"f_{i:04d}.json"
        save_function(f, out / name)
        row = {"file": name, "kind": kind, "ball": ball.as_dict() if ball else None}
        if ball is not None:
            rep = validate_atom(f, ball, M=int(cfg["samples"]), sampler=sampler.substream("atom", i))
            row["atom_valid"] = rep.valid
            failures += int(not rep.valid)
        rows.append(row)
    manifest = {"config": cfg, "entries": rows}
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=1))
    emit({"config": cfg, "count": len(rows), "atom_failures": failures, "rows": rows}, cfg, "generate")
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_norms(cfg) -> int:
    inputs = _load_inputs(cfg["input"])
    ps = _floats(cfg["p"])
    alphas = _floats(cfg["alpha"])
    if any(not (1 <= p) for p in ps) or any(a < 1 for a in alphas):
        raise ConfigError("need p >= 1 and alpha >= 1")
    M = int(cfg["samples"])
    sampler = GaussianSampler(int(cfg["seed"]))
    rows, fields = [], []
    for name, f, _ in inputs:
        if not shadow_inside(f, max(alphas)):
            raise ConfigError(f"{name}: cone shadows leave the base box; enlarge L or move the support")
        for a in alphas:
            for p in ps:
                s = sampler.substream(name, p, a)
                if math.isinf(p):
                    rep = tent_norm_infty(f, a, M, sampler=s)
                else:
                    rep = tent_norm_p(f, p, a, M, sampler=s)
                row = {"file": name, **rep.to_dict()}
                rows.append(row)
                for x, v in zip(f.grid.base.centers, rep.per_x):
                    fields.append([name, p, a, *x.tolist(), float(v)])
    emit({"config": cfg, "rows": rows}, cfg, "norms")
    if cfg.get("out"):
        out = Path(cfg["out"])
        with open(out / "per_x.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            n = inputs[0][1].grid.n if inputs else 1
            w.writerow(["file", "p", "alpha", *[f"x{i}" for i in range(n)], "S"])
            w.writerows(fields)
    return EXIT_OK


def cmd_decompose(cfg) -> int:
    inputs = _load_inputs(cfg["input"])
    M = int(cfg["samples"])
    sampler = GaussianSampler(int(cfg["seed"]))
    rows, failed = [], 0
    for idx, (name, f, _) in enumerate(inputs):
        if not shadow_inside(f, 1.0):
            raise ConfigError(f"{name}: cone shadows leave the base box")
        s = sampler.substream("decompose", name)
        try:
            dec = decompose(f, M, s)
        except AssertionError as e:
            rows.append({"file": name, "ok": False, "error": str(e)})
            failed += 1
            continue
        n = f.grid.n
        bound = l1_constant(n)
        atoms = [validate_atom(t.atom, t.ball, M=M, sampler=s.substream("atom", i)) for i, t in enumerate(dec.terms)]
        bad_atoms = sum(not a.valid for a in atoms)
        part = dec.partition_check()
        cone = verify_cone_bound(dec, rng=np.random.default_rng(int(cfg["seed"])))
        cover = ball_cover_report(dec)
        err = dec.reconstruction_error()
        l1_ok = dec.l1 <= bound * dec.source_norm * (1 + 1e-12)
        ok = err <= 1e-10 and bad_atoms == 0 and l1_ok and not any(part.values()) and cone.violations == 0 and cover["bad_levels"] == 0
        failed += int(not ok)
        row = {
            "file": name,
            "ok": ok,
            "terms": len(dec.terms),
            "reconstruction_error": err,
            "invalid_atoms": bad_atoms,
            "t1_norm": dec.source_norm,
            "l1": dec.l1,
            "l1_bound": bound * dec.source_norm,
            "partition": part,
            "cone_bound": cone.as_dict(),
            "ball_cover": cover,
        }
        if cfg.get("out"):
            sub = Path(cfg["out"]) / Path(name).stem
            row["manifest"] = str(dec.save(sub).relative_to(cfg["out"]))
        rows.append(row)
    emit({"config": cfg, "failures": failed, "rows": rows}, cfg, "decompose")
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_verify_lemmas(cfg) -> int:
    grid = _grid(cfg)
    base = grid.base
    n = base.n
    rng = np.random.default_rng(int(cfg["seed"]))
    trials = int(cfg["trials"])
    net = build_direction_net(n)
    rep = {"config": cfg}
    rep["net"] = {"N": net.N, "valid": net.is_valid(), "worst_cosine": net.worst_cosine()}
    p, se = sector_fraction_mc(n, int(cfg["samples"]), rng)
    c = sector_constant(n)
    rep["sector_constant"] = {"exact": c, "mc": p, "stderr": se, "ok": abs(p - c) <= 3 * se + 1e-15}
    diam = sector_diameter_check(net, int(cfg["samples"]), rng)
    two = net_two_point_check(net, int(cfg["samples"]), rng)
    rep["sector_diameter"] = {"max_ratio": diam, "ok": diam <= 1.0}
    rep["net_two_point"] = {"max": two, "ok": two <= 1.0}
    cover_bad = weak_bad = 0
    lemma = {"violations": 0, "marginal": 0}
    for _ in range(trials):
        E = random_open_set(base, rng, scale=SET_SCALE[n])
        balls = greedy_ball_cover(E).balls
        cover_bad += int(not check_ball_cover(E, grid, balls).ok)
        lam = float(rng.uniform(0.05, 0.95))
        weak_bad += int(extension(E, lam).measure > weak_type_bound(E, lam) * (1 + 1e-12))
        Es = extension(E, c / 2)
        sl = sector_lemma_check(E, Es, net, 20, rng)
        lemma["violations"] += sl.violations
        lemma["marginal"] += sl.marginal
    rep["ball_cover"] = {"trials": trials, "failures": cover_bad}
    rep["weak_type"] = {"trials": trials, "constant": WEAK_TYPE_CONSTANT[n], "violations": weak_bad}
    rep["sector_lemma"] = lemma
    rep["cone_cover"] = cone_lemma_run(base, trials, int(cfg["cone_samples"]), rng)
    if n == 1:
        E = OpenSet.from_intervals(base, [(0.0, 1.0)])
        m = extension(E, 0.5).measure
        rep["interval_extension"] = {"measure": m, "expected": 3.0, "ok": abs(m - 3.0) <= 2 * base.h + 1e-12}
    ok = (
        rep["net"]["valid"]
        and rep["sector_constant"]["ok"]
        and rep["sector_diameter"]["ok"]
        and rep["net_two_point"]["ok"]
        and cover_bad == 0
        and weak_bad == 0
        and lemma["violations"] == 0
        and rep["cone_cover"]["violations"] == 0
        and rep.get("interval_extension", {"ok": True})["ok"]
    )
    rep["ok"] = ok
    emit(rep, cfg, "verify_lemmas")
    return EXIT_OK if ok else EXIT_VIOLATION


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--grid", help="n,L,h,T,J (h may be a fraction like 1/16)")
    common.add_argument("--space", help="d,norm with norm euclidean | pnorm(p) | max")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="Monte Carlo sample count M")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("json", "csv"))

    parser = _Parser(prog="tentspace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write a seeded corpus of grid functions")
    g.add_argument("--count", type=int)
    g.add_argument("--kinds", help="comma list from " + ",".join(KINDS))
    g.add_argument("--aperture", type=float, help="keep cone shadows of this aperture in the box")
    g.set_defaults(func=cmd_generate)

    nm = sub.add_parser("norms", parents=[common], help="tent-space norms of stored functions")
    nm.add_argument("input", help="function JSON, corpus manifest or corpus directory")
    nm.add_argument("--p", help="comma list of exponents, inf for T^inf")
    nm.add_argument("--alpha", help="comma list of apertures")
    nm.set_defaults(func=cmd_norms)

    d = sub.add_parser("decompose", parents=[common], help="atomic decomposition with verification")
    d.add_argument("input")
    d.set_defaults(func=cmd_decompose)

    v = sub.add_parser("verify-lemmas", parents=[common], help="sampled geometry and maximal-function checks")
    v.add_argument("--trials", type=int)
    v.add_argument("--cone-samples", type=int)
    v.set_defaults(func=cmd_verify_lemmas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help()
            return EXIT_CONFIG
        cfg = resolve_config(args)
        cfg["command"] = args.command
        return args.func(cfg)
    except ConfigError as e:
        print(f"tentspace: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
