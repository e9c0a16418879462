"""Command-line entry point.

Problem files are flat ``key = value`` documents, one entry per line, values
written as JSON literals::

    f.kind = "linear"
    f.params = [1.0]
    b0 = 1.0
    domain.kind = "ball"

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from .asymptotics import B_coefficients
from .errors import IllegalFamilyParams, NonlocalLayersError, ParseError, ValidationError
from .geometry import DomainGeometry, make_domain
from .nonlinearity import NonlocalProblem, ScalarFamily, validate_problem
from .profiles import build_profiles
from .solver import make_grid, solve_nonlocal
from .verification import CHECKS, DEFAULT_EPS, FixtureRun, generate_report, run_check, CheckSpec

COMMANDS = ("validate", "profiles", "expand", "solve", "sweep", "verify")
REQUIRED_KEYS = (
    "f.kind", "f.params", "q.kind", "q.params", "A.kind", "A.params",
    "b0", "gamma", "domain.kind", "domain.N", "domain.params",
)

@dataclass
class RunConfig:
    problem_path: Path
    command: str
    eps: float | None = None
    eps_list: tuple[float, ...] | None = None
    grid_n: int | None = None
    out_dir: Path = Path("out")
    format: str = "csv"

def read_problem_file(path) -> dict:
    entries: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        if key not in REQUIRED_KEYS:
            raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ParseError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            entries[key] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: bad value for {key!r} ({exc.msg})") from exc
    missing = [k for k in REQUIRED_KEYS if k not in entries]
    if missing:
        raise ParseError(f"{path}: missing key(s) {', '.join(missing)}")
    return entries

def parse_config(path) -> tuple[NonlocalProblem, DomainGeometry]:
    """Read and validate a problem file."""
    e = read_problem_file(path)
    fams = {}
    for name in ("f", "q", "A"):
        kind, params = e[f"{name}.kind"], e[f"{name}.params"]
        if not isinstance(kind, str) or not isinstance(params, list):
            raise ParseError(f"{path}: {name}.kind must be a string and {name}.params a list")
        try:
            fams[name] = ScalarFamily(kind, tuple(params))
        except IllegalFamilyParams as exc:
            raise ValidationError(f"{name}: {exc}") from exc
    for key in ("b0", "gamma"):
        if not isinstance(e[key], (int, float)) or isinstance(e[key], bool):
            raise ParseError(f"{path}: {key} must be a number")
    try:
        dom = make_domain(e["domain.kind"], int(e["domain.N"]), e["domain.params"])
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"domain: {exc}") from exc
    p = NonlocalProblem(fams["f"], fams["q"], fams["A"], float(e["b0"]), float(e["gamma"]))
    try:
        report = validate_problem(p)
    except IllegalFamilyParams as exc:
        raise ValidationError(f"f: {exc}") from exc
    if not report.ok:
        problems = [m for m in report.messages if "trivial" not in m]
        raise ValidationError("; ".join(problems))
    return NonlocalProblem(p.f, p.q, p.A, p.b0, p.gamma, report), dom

def _num(x: float) -> str:
    return json.dumps(float(format(float(x), ".17g")))

def format_problem(p: NonlocalProblem, dom: DomainGeometry) -> str:
    lines = []
    for name, fam in (("f", p.f), ("q", p.q), ("A", p.A)):
        lines.append(f"{name}.kind = {json.dumps(fam.kind)}")
        lines.append(f"{name}.params = [{', '.join(_num(x) for x in fam.params)}]")
    lines.append(f"b0 = {_num(p.b0)}")
    lines.append(f"gamma = {_num(p.gamma)}")
    lines.append(f"domain.kind = {json.dumps(dom.kind)}")
    lines.append(f"domain.N = {dom.N}")
    lines.append(f"domain.params = [{', '.join(_num(x) for x in dom.params)}]")
    return "\n".join(lines) + "\n"

# -- commands -------------------------------------------------------------------

def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

def _solution_json(sol) -> dict:
    d = sol.summary()
    d["r"] = sol.grid.r.tolist()
    d["u"] = sol.u.tolist()
    return d

def dispatch(config: RunConfig) -> int:
    p, dom = parse_config(config.problem_path)
    out = Path(config.out_dir)
    cmd = config.command
    if cmd == "validate":
        print(json.dumps(asdict(p.validated), indent=2))
        return 0 if p.validated.ok else 1
    out.mkdir(parents=True, exist_ok=True)
    if cmd == "profiles":
        prof = build_profiles(p)
        if config.format == "json":
            cols = {k: getattr(prof, k).tolist() for k in ("W", "Wp", "Phi", "Phip", "Psi", "Psip")}
            cols["t"] = prof.t_grid.tolist()
            _dump(cols, out / "profiles.json")
        else:
            prof.to_csv(out / "profiles.csv")
        print(f"b_star = {prof.b_star!r}  T_max = {prof.T_max!r}  points = {len(prof.t_grid)}")
        return 0
    if cmd == "expand":
        prof = build_profiles(p)
        coeffs = B_coefficients(p, prof, dom)
        (out / "coefficients.json").write_text(coeffs.to_json() + "\n")
        print(coeffs.to_json())
        return 0
    if cmd == "solve":
        if config.eps is None:
            raise ValidationError("solve needs --eps")
        sol = solve_nonlocal(p, dom, config.eps, make_grid(dom, config.eps, config.grid_n, p.A0))
        if config.format == "json":
            _dump(_solution_json(sol), out / "solution.json")
        else:
            sol.to_csv(out / "solution.csv")
        _dump(sol.summary(), out / "summary.json")
        print(sol.summary_json())
        return 0
    eps_list = config.eps_list or ((config.eps,) if config.eps else DEFAULT_EPS)
    run = FixtureRun(p, dom, Path(config.problem_path).stem, config.grid_n)
    if cmd == "sweep":
        run.solve_all(eps_list)
        names = ("leading_order", "refined_interior", "B_first_order", "B_second_order",
                 "boundary_u", "boundary_dnu", "interior_dnu")
        results = [run_check(CheckSpec(n, run.name, tuple(eps_list)), run) for n in names]
        rows = []
        for e in sorted(eps_list, reverse=True):
            sol = run.solution(e)
            if config.format == "json":
                _dump(_solution_json(sol), out / f"solution_eps{e:g}.json")
            else:
                sol.to_csv(out / f"solution_eps{e:g}.csv")
            rows.append(sol.summary())
        _dump({"solutions": rows, "checks": [r.to_dict() for r in results]}, out / "sweep.json")
        with open(out / "residuals.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps"] + [r.check for r in results])
            for i, e in enumerate(sorted(eps_list, reverse=True)):
                w.writerow([repr(e)] + [repr(r.residuals[r.check][i]) for r in results])
        print(generate_report(results)[1])
        return 0
    if cmd == "verify":
        wide = p.A0_prime != 0
        results = [
            run_check(CheckSpec(c, run.name, tuple(eps_list), wide_scan=wide and c == "map_monotone"), run)
            for c in CHECKS
        ]
        doc, table, failed = generate_report(results)
        _dump(doc, out / "report.json")
        print(table)
        return failed
    raise ValueError(f"unknown command {cmd!r}")

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-layers", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--problem", required=True, type=Path)
    g = ap.add_mutually_exclusive_group()
    g.add_argument("--eps", type=float)
    g.add_argument("--eps-list", type=lambda s: tuple(float(x) for x in s.split(",")))
    ap.add_argument("--grid-n", type=int)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap

def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(args.problem, args.command, args.eps, args.eps_list, args.grid_n, args.out, args.format)
    for e in (cfg.eps,) + tuple(cfg.eps_list or ()):
        if e is not None and not e > 0:
            print("error: eps must be positive", file=sys.stderr)
            return 2
    try:
        return dispatch(cfg)
    except NonlocalLayersError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

if __name__ == "__main__":
    sys.exit(main())
