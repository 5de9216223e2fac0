"""Command line experiment runner.

Every command reads an optional ``key = value`` config file, lets flags
override it, and writes its tables into the output directory.  Nothing
random happens outside :func:`dlqi.qmaps.make_rng` seeded from the config.

Exit codes: 0 ok, 1 bad parameters, 2 resource budget exceeded, 3 a map
does not cover a needed window, 4 the up audit found a bad fiber.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .boundary import Clone
from .dlgraph import DEFAULT_BUDGET, build_box, folner_scan
from .errors import CoverageError, DLQIError, ParameterError, ResourceError
from .lift import preimage_audit, psi_on_box, up_interior_levels, up_vertex_map
from .qmaps import (
    PiecewiseMap,
    bilipschitz_bound,
    format_map,
    make_rng,
    measure_linear_report,
    random_measure_linear_map,
    read_map,
    shift_map,
)
from .ufh import CONSISTENT, OBSTRUCTED, bounded_matching, pushforward, whyte_scan

EXIT_OK, EXIT_PARAM, EXIT_RESOURCE, EXIT_COVERAGE, EXIT_UPAUDIT = 0, 1, 2, 3, 4


@dataclass
class ExperimentConfig:
    n: int = 2
    k: int = 1
    H_list: list[int] = field(default_factory=list)
    r: int = 1
    R: int | None = None
    match_H: int | None = None
    phi_l: str | None = None
    phi_u: str | None = None
    lambda_l: Fraction | None = None
    lambda_u: Fraction | None = None
    seed: int = 0
    ambient: str = "band"
    out: str = "."
    emit: str = "csv"
    budget: int = DEFAULT_BUDGET
    max_depth: int = 3

    def validate(self) -> "ExperimentConfig":
        if self.n < 2:
            raise ParameterError("n must be >= 2")
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if any(b <= a for a, b in zip(self.H_list, self.H_list[1:])):
            raise ParameterError(f"H_list must be strictly increasing, got {self.H_list}")
        if self.emit not in ("csv", "json"):
            raise ParameterError("emit must be csv or json")
        return self


def parse_H_list(text: str) -> list[int]:
    """``"4..10"``, ``"2,3,5"`` or a mix; empty text gives an empty list."""
    out: list[int] = []
    for tok in re.split(r"[,\s]+", text.strip()):
        if not tok:
            continue
        if ".." in tok:
            lo, hi = tok.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return out


_CONVERT = {
    "n": int, "k": int, "r": int, "R": int, "match_H": int, "seed": int, "budget": int,
    "max_depth": int, "H_list": parse_H_list, "lambda_l": Fraction, "lambda_u": Fraction,
}


def read_config(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "H":
            key = "H_list"
        if key not in ExperimentConfig.__dataclass_fields__:
            raise ParameterError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONVERT.get(key, str)(value)
    return values


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config(args.config) if args.config else {}
    for key in ExperimentConfig.__dataclass_fields__:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return ExperimentConfig(**values).validate()


# --- output helpers ------------------------------------------------------------


def _plain(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _write_table(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)] + [",".join(str(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def _outdir(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --- commands ------------------------------------------------------------------


def cmd_folner(cfg: ExperimentConfig) -> int:
    rows = folner_scan(cfg.n, cfg.H_list, cfg.r, cfg.ambient, cfg.budget)
    out = _outdir(cfg)
    header = ["H", "size", "boundary", "ratio"]
    table = [[r.H, r.size, r.boundary, r.ratio] for r in rows]
    if cfg.emit == "json":
        _write_json(out / "folner.json", {"n": cfg.n, "r": cfg.r, "ambient": cfg.ambient,
                                          "rows": [dict(zip(header, row)) for row in table]})
    else:
        _write_table(out / "folner.csv", header, table)
    for row in table:
        print(" ".join(f"{h}={v}" for h, v in zip(header, row)))
    return EXIT_OK


def _exponent(n: int, lam: Fraction) -> int:
    lam = Fraction(lam)
    if lam > 0:
        j = round(math.log(lam) / math.log(n))
        if Fraction(n) ** j == lam:
            return j
    raise ParameterError(
        f"lambda={lam} is not a power of {n}; no piecewise similarity of Q_{n} has that constant"
    )


def boundary_maps(cfg: ExperimentConfig) -> tuple[PiecewiseMap, PiecewiseMap]:
    """The two boundary maps: read from files, or synthesized as shifts of a
    window tall enough for every box in the scan."""
    maps = []
    top = max(cfg.H_list, default=1)
    lams = [cfg.lambda_l, cfg.lambda_u]
    drop = max([0] + [-_exponent(cfg.n, lam) for lam in lams if lam is not None])
    for path, lam in ((cfg.phi_l, cfg.lambda_l), (cfg.phi_u, cfg.lambda_u)):
        if path is not None:
            m = read_map(path)
            if m.n != cfg.n:
                raise ParameterError(f"map {path} lives in Q_{m.n}, config has n={cfg.n}")
        else:
            j = 0 if lam is None else _exponent(cfg.n, lam)
            m = shift_map(Clone(cfg.n, top + drop), j)
        maps.append(m)
    return maps[0], maps[1]


def run_obstruction(cfg: ExperimentConfig) -> dict:
    phi_l, phi_u = boundary_maps(cfg)
    K = max(bilipschitz_bound(phi_l).K, bilipschitz_bound(phi_u).K)
    out = _outdir(cfg)
    audits = {}
    psis = {}

    for H in cfg.H_list:
        size = (H + 1) * cfg.n ** H
        if size > cfg.budget:
            raise ResourceError(f"box n={cfg.n}, H={H} has {size} vertices, budget is {cfg.budget}")

    def family(H):
        box, psi = psi_on_box(phi_l, phi_u, H)
        psis[H] = (box, psi)
        audits[H] = preimage_audit(psi, box, K)
        return box, pushforward(psi, cfg.k, support=box)

    report = whyte_scan(family, cfg.H_list, cfg.r)
    verdict = {OBSTRUCTED: "OBSTRUCTED", CONSISTENT: "CONSISTENT"}.get(report.verdict, "INCONCLUSIVE")
    result = {
        "n": cfg.n, "k": cfg.k, "r": cfg.r, "K": K,
        "lambda_l": measure_linear_report(phi_l).global_lambda,
        "lambda_u": measure_linear_report(phi_u).global_lambda,
        "verdict": verdict,
        "slope": None if report.slope is None else round(report.slope, 12),
        "whyte": [[row.H, row.sum_a, row.boundary_size, row.ratio] for row in report.rows],
        "audit": {H: {"total": a.total, "center": a.center, "lower": a.lower, "upper": a.upper,
                      "in_sandwich": a.in_sandwich,
                      "levels": [[x.t, x.sum_counts, x.expected_center, x.lower_bound,
                                  x.upper_bound, int(x.in_sandwich)] for x in a.levels]}
                  for H, a in sorted(audits.items())},
    }
    if cfg.R is not None and cfg.match_H is not None:
        if cfg.match_H in psis:
            box, psi = psis[cfg.match_H]
        else:
            box, psi = psi_on_box(phi_l, phi_u, cfg.match_H)
        m = bounded_matching(psi, cfg.R)
        result["matching"] = {"H": cfg.match_H, "R": cfg.R, "perfect": m.perfect,
                              "deficiency": m.deficiency, "sources": m.sources, "targets": m.targets}
        if cfg.emit == "csv":
            m.write_csv(out / "matching.csv", out / "matching_witness.csv", None, box)

    if cfg.emit == "json":
        _write_json(out / "obstruction.json", result)
    else:
        report.write_csv(out / "whyte.csv")
        for H, a in sorted(audits.items()):
            a.write_csv(out / f"audit_H{H}.csv")
        (out / "verdict.txt").write_text(verdict + "\n")
    return result


def cmd_obstruction(cfg: ExperimentConfig) -> int:
    result = run_obstruction(cfg)
    for H, s, b, q in result["whyte"]:
        print(f"H={H} sum_a={s} boundary={b} ratio={q}")
    if "matching" in result:
        m = result["matching"]
        print(f"matching H={m['H']} R={m['R']} deficiency={m['deficiency']}")
    print(f"verdict: {result['verdict']}")
    return EXIT_OK


def run_upaudit(cfg: ExperimentConfig) -> dict:
    rows = []
    for H in cfg.H_list:
        box = build_box(cfg.n, H, budget=cfg.budget)
        counts = up_vertex_map(box, cfg.k).counts()
        hist: dict[int, int] = {}
        for t in up_interior_levels(box, cfg.k):
            for i in box.level_ids(t):
                c = counts.get(box.vertex(i), 0)
                hist[c] = hist.get(c, 0) + 1
        rows.extend([H, size, num] for size, num in sorted(hist.items()))
    bad = sum(num for _, size, num in rows if size != cfg.k)
    return {"n": cfg.n, "k": cfg.k, "rows": rows, "violations": bad}


def cmd_upaudit(cfg: ExperimentConfig) -> int:
    result = run_upaudit(cfg)
    out = _outdir(cfg)
    header = ["H", "fiber_size", "targets"]
    if cfg.emit == "json":
        _write_json(out / "upaudit.json", result)
    else:
        _write_table(out / "upaudit.csv", header, result["rows"])
    for row in result["rows"]:
        print(" ".join(f"{h}={v}" for h, v in zip(header, row)))
    print(f"violations: {result['violations']}")
    return EXIT_UPAUDIT if result["violations"] else EXIT_OK


def cmd_map_validate(cfg: ExperimentConfig, path: str) -> int:
    m = read_map(path)
    sys.stdout.write(format_map(m))
    bl = bilipschitz_bound(m)
    rec = measure_linear_report(m).to_record()
    rec["K"] = str(bl.K)
    for key in sorted(rec):
        print(f"# {key} = {rec[key]}")
    return EXIT_OK


def cmd_randmap(cfg: ExperimentConfig) -> int:
    m = random_measure_linear_map(make_rng(cfg.seed), cfg.n, cfg.max_depth)
    sys.stdout.write(format_map(m))
    return EXIT_OK


# --- argument parsing --------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--H", dest="H_list", type=parse_H_list, help="e.g. 4..10 or 2,3,5")
    common.add_argument("--r", type=int)
    common.add_argument("--R", type=int)
    common.add_argument("--match-H", dest="match_H", type=int)
    common.add_argument("--phi-l", dest="phi_l")
    common.add_argument("--phi-u", dest="phi_u")
    common.add_argument("--lambda-l", dest="lambda_l", type=Fraction)
    common.add_argument("--lambda-u", dest="lambda_u", type=Fraction)
    common.add_argument("--seed", type=int)
    common.add_argument("--ambient", choices=["box", "band"])
    common.add_argument("--out")
    common.add_argument("--emit", choices=["csv", "json"])
    common.add_argument("--budget", type=int)
    common.add_argument("--max-depth", dest="max_depth", type=int)

    p = argparse.ArgumentParser(prog="dlqi", description="Diestel-Leader quasi-isometry experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("folner", parents=[common], help="boundary-to-volume ratios of boxes")
    sub.add_parser("obstruction", parents=[common], help="pushforward statistic of a lifted map")
    sub.add_parser("upaudit", parents=[common], help="fiber sizes of the up map")
    mv = sub.add_parser("map-validate", parents=[common], help="check a map file and print it canonically")
    mv.add_argument("path")
    sub.add_parser("randmap", parents=[common], help="print a seeded random measure-linear map")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = make_config(args)
        if args.command == "folner":
            return cmd_folner(cfg)
        if args.command == "obstruction":
            return cmd_obstruction(cfg)
        if args.command == "upaudit":
            return cmd_upaudit(cfg)
        if args.command == "map-validate":
            return cmd_map_validate(cfg, args.path)
        return cmd_randmap(cfg)
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (DLQIError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
