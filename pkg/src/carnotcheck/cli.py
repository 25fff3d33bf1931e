"""Scenario runner: ``carnotcheck run scenario.toml`` and thin inline subcommands."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .group import make_group
from .poly import parse_expr
from .potentials import PotentialSpec
from .verifiers import (InvalidScenarioError, build_integrator, default_family, parse_family)
from .verifiers import examples, functionals, identities, scans
from .verifiers.reports import FAIL, INFO, PASS, ScanReport, jsonable

ENV_OUT_DIR = "CARNOTCHECK_OUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2
FORMATS = ("json", "csv", "summary-text")


class ScenarioError(ValueError):
    """Parse or validation failure, with a location (line/column or field path)."""


# ---------------------------------------------------------------------------
# scenario schema

_num = {"type": "number"}
_int = {"type": "integer"}
_bool = {"type": "boolean"}
_str = {"type": "string"}
_nums = {"type": "array", "items": _num}
_strs = {"type": "array", "items": _str}
_str_or_strs = {"anyOf": [_str, _strs]}
_family = {"type": "array", "items": _str}

INTEGRATOR_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["grid", "mc", "exact"]},
        "radius": {"anyOf": [_num, _nums]},
        "nodes": {"anyOf": [_int, {"type": "array", "items": _int}]},
        "rule": {"enum": ["trapezoid", "simpson"]},
        "tail_tol": _num,
        "chains": _int,
        "steps": _int,
        "burn_in": _int,
        "proposal_scale": _num,
        "seed": _int,
        "drift": _bool,
    },
}

# per-verifier parameters (besides "type", "label" and "integrator")
VERIFIER_PARAMS: dict[str, dict[str, Any]] = {
    "identities": {"quick": _bool},
    "harmonic_library": {},
    "dual_biorthogonality": {"max_order": _int},
    "bracket_fields": {"count": _int, "max_degree": _int},
    "ad_expansion": {"orders": {"type": "array", "items": _int}, "count": _int, "max_degree": _int},
    "jet_oracle": {"n_points": _int, "n_range": _nums, "h": _num, "tol_first": _num,
                   "tol_second": _num},
    "adams_scan": {"path": {"enum": ["z_axis", "radial", "box"]}, "eps": _num, "shells": _nums,
                   "box": {"type": "object"}},
    "adams_dual_scan": {"path": {"enum": ["hyperplane", "box"]}, "eps": _num, "decades": _nums,
                        "box": {"type": "object"}},
    "hardy_weight_scan": {"shells": _nums, "form": {"enum": ["Q-1", "2n+1"]}, "slope_tol": _num},
    "ubound_defect": {"f": _str_or_strs, "tolerance": _num},
    "poincare_estimate": {"family": _family},
    "statpoly": {"f": _str, "m": _int},
    "higher_poincare": {"f": _str_or_strs, "m": _int, "C": _num, "family": _family,
                        "mode": {"enum": ["words", "multi"]}},
    "lsi_defect": {"f": _str_or_strs, "beta": _num, "m": _int, "p": _num},
    "lsi_fit": {"family": _family, "beta": _num, "m": _int, "p": _num, "lambda": _num},
    "step2_identity": {"f": _str_or_strs, "tolerance": _num, "ibp_family": _family},
    "inductive_bound": {"n": _int, "eps": _num, "R": _num, "family": _family,
                        "weight": {"enum": ["bracket", "shifted"]}, "decades": _num, "cap": _num},
    "hardy_check": {"family": _family, "C": _num, "lambda": _num, "form": {"enum": ["Q-1", "2n+1"]}},
    "eg2_adams_failure": {"shells": {"type": "array", "items": _int}, "grad_tol": _num,
                          "samples_per_shell": _int},
    "eg3_star_bound": {"family": _family, "A": _num, "C": _num, "n_tilde": _num, "D": _num},
    "rockland_terms": {"family": _family, "n": _int, "lambda": _num},
}

REQUIRED_PARAMS = {
    "statpoly": ["f", "m"],
    "higher_poincare": ["f", "m"],
    "lsi_defect": ["f", "beta", "m", "p"],
    "lsi_fit": ["beta", "m", "p"],
    "ubound_defect": ["f"],
    "step2_identity": ["f"],
    "inductive_bound": ["n", "eps", "R"],
    "eg3_star_bound": ["A", "C", "n_tilde"],
    "rockland_terms": ["n"],
}


def scenario_schema() -> dict:
    branches = []
    for name, params in VERIFIER_PARAMS.items():
        props = {"type": {"const": name}, "label": _str, "integrator": INTEGRATOR_SCHEMA, **params}
        branches.append({
            "if": {"properties": {"type": {"const": name}}, "required": ["type"]},
            "then": {"properties": props, "additionalProperties": False,
                     "required": ["type"] + REQUIRED_PARAMS.get(name, [])},
        })
    verifier = {"type": "object", "required": ["type"],
                "properties": {"type": {"enum": sorted(VERIFIER_PARAMS)}},
                "allOf": branches}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "additionalProperties": False,
        "required": ["verifiers"],
        "properties": {
            "name": _str,
            "seed": _int,
            "group": {
                "type": "object", "additionalProperties": False, "required": ["kind", "n"],
                "properties": {"kind": {"enum": ["heisenberg", "euclidean"]}, "n": _int,
                               "convention": {"enum": ["standard", "alt"]}},
            },
            "potential": {
                "type": "object", "required": ["family"],
                "properties": {
                    "family": {"enum": ["kaplan_power", "radial_cosine", "polar_log", "quadric_power",
                                        "dual_monomial", "polynomial"]},
                    "kappa": _num, "alpha": {"anyOf": [_num, {"type": "array", "items": _int}]},
                    "eps": _num, "omega": _num, "norm": {"enum": ["euclidean", "kaplan"]},
                    "n": _int, "outer": {"enum": ["power", "exp_power"]}, "p": _num, "c": _num,
                    "U": _str,
                },
                "additionalProperties": False,
            },
            "integrator": INTEGRATOR_SCHEMA,
            "output": {"type": "object", "additionalProperties": False,
                       "properties": {"dir": _str, "stem": _str}},
            "verifiers": {"type": "array", "minItems": 1, "items": verifier},
        },
    }


def load_report_schema() -> dict:
    text = resources.files("carnotcheck").joinpath("schema/report.schema.json").read_text()
    return json.loads(text)


def _field_path(err: jsonschema.ValidationError) -> str:
    parts = ["$"]
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def validate_scenario(data: dict) -> None:
    v = jsonschema.Draft202012Validator(scenario_schema())
    errors = sorted(v.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        lines = [f"{_field_path(e)}: {e.message}" for e in errors]
        raise ScenarioError("invalid scenario\n  " + "\n  ".join(lines))


def parse_scenario_text(text: str) -> dict:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"parse error: {exc}") from exc
    validate_scenario(data)
    return data


def load_scenario(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return parse_scenario_text(text)


# ---------------------------------------------------------------------------
# execution

@dataclass
class RunReport:
    scenario: dict
    seed: int
    blocks: list[dict] = field(default_factory=list)
    version: str = __version__
    results: list = field(default_factory=list, repr=False)

    @property
    def status(self) -> str:
        states = [b["status"] for b in self.blocks]
        if FAIL in states:
            return FAIL
        return PASS if PASS in states else INFO

    @property
    def exit_code(self) -> int:
        return EXIT_VIOLATION if self.status == FAIL else EXIT_OK

    def to_dict(self) -> dict:
        return {"toolkit": "carnotcheck", "version": self.version, "seed": self.seed,
                "status": self.status, "scenario": self.scenario, "blocks": self.blocks}


class _Context:
    def __init__(self, data: dict, seed: int, tol_scale: float):
        self.data, self.seed, self.tol_scale = data, seed, tol_scale
        g = data.get("group", {"kind": "heisenberg", "n": 1})
        self.G = make_group(g["kind"], g["n"], g.get("convention", "standard"))
        self.pot = _build_potential(self.G, data.get("potential")) if "potential" in data else None
        self._integrators: dict[str, Any] = {}

    def need_pot(self) -> PotentialSpec:
        if self.pot is None:
            raise InvalidScenarioError("this verifier needs a [potential] table")
        return self.pot

    def integrator(self, override: dict | None):
        cfg = override or self.data.get("integrator") or {"kind": "grid"}
        key = json.dumps(cfg, sort_keys=True)
        if key not in self._integrators:
            pot = self.need_pot()
            pot.validate_measure(self.G)
            self._integrators[key] = build_integrator(self.G, pot, cfg, seed=self.seed)
        return self._integrators[key]

    def family(self, texts, fallback=True):
        if texts is None:
            return default_family(self.G) if fallback else []
        return parse_family(self.G, texts)

    def poly(self, text: str):
        return parse_expr(text, self.G.names)


def _build_potential(G, cfg: dict) -> PotentialSpec:
    cfg = dict(cfg)
    if cfg["family"] == "polynomial":
        if "U" not in cfg:
            raise InvalidScenarioError("polynomial potential needs U")
        return PotentialSpec.polynomial(parse_expr(cfg["U"], G.names))
    try:
        pot = PotentialSpec.from_dict(cfg)
    except KeyError as exc:
        raise InvalidScenarioError(f"potential is missing parameter {exc.args[0]!r}") from exc
    pot.check_group(G)
    return pot


def _as_list(v) -> list:
    return [v] if isinstance(v, str) else list(v)


def _multi(results: list, name: str) -> Any:
    """Bundle several single-f reports into one block."""
    if len(results) == 1:
        return results[0]
    return _Bundle(name, results)


@dataclass
class _Bundle:
    name: str
    items: list

    @property
    def status(self) -> str:
        states = [r.status for r in self.items]
        return FAIL if FAIL in states else PASS if PASS in states else INFO

    def to_dict(self) -> dict:
        return {"kind": "bundle", "name": self.name, "status": self.status, "items": self.items}


def _run_verifier(ctx: _Context, spec: dict):
    t = spec["type"]
    G = ctx.G
    ts = ctx.tol_scale
    integ = lambda: ctx.integrator(spec.get("integrator"))  # noqa: E731
    if t == "identities":
        return _Bundle("identities", identities.identity_suite(ctx.seed, spec.get("quick", False)))
    if t == "harmonic_library":
        return identities.harmonic_check(G)
    if t == "dual_biorthogonality":
        return identities.biorthogonality_check(G, spec.get("max_order", 3))
    if t == "bracket_fields":
        return identities.bracket_check(G, spec.get("count", 20), ctx.seed, spec.get("max_degree", 4))
    if t == "ad_expansion":
        return identities.ad_check(G, tuple(spec.get("orders", (1, 2, 3))), spec.get("count", 10),
                                   ctx.seed, spec.get("max_degree", 4))
    if t == "jet_oracle":
        return scans.jet_oracle(G, ctx.need_pot(), spec.get("n_points", 100),
                                tuple(spec.get("n_range", (0.5, 10.0))), spec.get("h", 1e-4), ctx.seed,
                                spec.get("tol_first", 1e-6) * ts, spec.get("tol_second", 1e-4) * ts)
    if t == "adams_scan":
        kw = {k: spec[k] for k in ("path", "eps", "shells", "box") if k in spec}
        return scans.adams_scan(G, ctx.need_pot(), **kw)
    if t == "adams_dual_scan":
        kw = {k: spec[k] for k in ("path", "eps", "decades", "box") if k in spec}
        return scans.adams_dual_scan(G, ctx.need_pot(), **kw)
    if t == "hardy_weight_scan":
        kw = {k: spec[k] for k in ("shells", "form") if k in spec}
        return scans.hardy_weight_scan(G, ctx.need_pot(), slope_tol=spec.get("slope_tol", 0.05) * ts, **kw)
    if t == "eg2_adams_failure":
        kw = {k: spec[k] for k in ("shells", "grad_tol", "samples_per_shell") if k in spec}
        return examples.example_theorems(G, ctx.need_pot(), "eg2_adams_failure", **kw)
    pot = ctx.need_pot()
    if t == "ubound_defect":
        tol = spec.get("tolerance", 1e-3) * ts
        return _multi([functionals.ubound_defect(G, pot, ctx.poly(f), integ(), tol)
                       for f in _as_list(spec["f"])], t)
    if t == "poincare_estimate":
        return functionals.poincare_estimate(G, pot, ctx.family(spec.get("family")), integ())
    if t == "statpoly":
        res = functionals.statpoly_build(G, pot, ctx.poly(spec["f"]), spec["m"], integ())
        return _StatpolyBlock(res)
    if t == "higher_poincare":
        fam = ctx.family(spec.get("family"))
        return _multi([functionals.higher_poincare_check(G, pot, ctx.poly(f), spec["m"], integ(),
                                                         spec.get("C"), fam, spec.get("mode", "words"))
                       for f in _as_list(spec["f"])], t)
    if t == "lsi_defect":
        return _multi([functionals.lsi_defect(G, pot, ctx.poly(f), spec["beta"], spec["m"], spec["p"], integ())
                       for f in _as_list(spec["f"])], t)
    if t == "lsi_fit":
        return functionals.lsi_fit(G, pot, ctx.family(spec.get("family")), spec["beta"], spec["m"],
                                   spec["p"], integ(), spec.get("lambda", 1e-2))
    if t == "step2_identity":
        tol = spec.get("tolerance", 1e-3) * ts
        ibp = ctx.family(spec.get("ibp_family"), fallback=False)
        return _multi([functionals.step2_identity_check(G, pot, ctx.poly(f), integ(), tol, ibp)
                       for f in _as_list(spec["f"])], t)
    if t == "inductive_bound":
        return functionals.inductive_bound_pipeline(
            G, pot, spec["n"], spec["eps"], spec["R"], ctx.family(spec.get("family")), integ(),
            spec.get("weight", "bracket"), spec.get("decades", 3.0), cap=spec.get("cap", 1e12),
            seed=ctx.seed)
    if t == "hardy_check":
        return functionals.hardy_check(G, pot, ctx.family(spec.get("family")), integ(),
                                       spec.get("C", 1.0), spec.get("lambda", 1e-2), spec.get("form", "Q-1"))
    if t == "eg3_star_bound":
        return examples.example_theorems(G, pot, "eg3_star_bound", family=ctx.family(spec.get("family")),
                                         integrator=integ(), A=spec["A"], C=spec["C"],
                                         n_tilde=spec["n_tilde"], D=spec.get("D"))
    if t == "rockland_terms":
        return examples.example_theorems(G, pot, "rockland_terms", family=ctx.family(spec.get("family")),
                                         integrator=integ(), n=spec["n"], lam=spec.get("lambda", 1e-2))
    raise InvalidScenarioError(f"unknown verifier {t!r}")


@dataclass
class _StatpolyBlock:
    result: Any

    status = INFO

    def to_dict(self) -> dict:
        return {"kind": "statpoly", "name": "statpoly", "status": self.status, **self.result.to_dict()}


def run_scenario_data(data: dict, seed: int | None = None, tol_scale: float = 1.0) -> RunReport:
    """Validate and execute a parsed scenario; verifier errors propagate with context."""
    validate_scenario(data)
    seed = data.get("seed", 0) if seed is None else seed
    ctx = _Context(data, seed, tol_scale)
    report = RunReport(scenario=data, seed=seed)
    for i, spec in enumerate(data["verifiers"]):
        label = spec.get("label", spec["type"])
        try:
            res = _run_verifier(ctx, spec)
        except Exception as exc:
            raise RuntimeError(f"verifier {i} ({label}): {type(exc).__name__}: {exc}") from exc
        report.results.append(res)
        report.blocks.append({"index": i, "type": spec["type"], "label": label, "status": res.status,
                              "result": jsonable(res)})
    return report


def run_scenario(path: str | Path, seed: int | None = None, tol_scale: float = 1.0) -> RunReport:
    return run_scenario_data(load_scenario(path), seed, tol_scale)


# ---------------------------------------------------------------------------
# output

def render_json(report: RunReport) -> str:
    return json.dumps(jsonable(report.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_summary(report: RunReport) -> str:
    lines = [f"carnotcheck {report.version}  seed={report.seed}  status={report.status}"]
    for b in report.blocks:
        lines.append(f"{b['index']:>3}  {b['status']:<4}  {b['label']}")
    return "\n".join(lines) + "\n"


def _scan_tables(report: RunReport):
    for b, res in zip(report.blocks, report.results):
        items = res.items if isinstance(res, _Bundle) else [res]
        for j, r in enumerate(items):
            if isinstance(r, ScanReport):
                suffix = f"_{j}" if len(items) > 1 else ""
                yield f"{b['index']:02d}_{b['label']}{suffix}", r


def emit_report(report: RunReport, out_dir: str | Path, stem: str, formats=("json", "csv"),
                wall_time: float | None = None) -> list[Path]:
    """Write the requested formats; the wall time goes to a sidecar so reports stay reproducible."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        p = out / f"{stem}.json"
        p.write_text(render_json(report))
        written.append(p)
    if "csv" in formats:
        for name, scan in _scan_tables(report):
            p = out / f"{stem}_{name}.csv"
            scan.to_csv(p)
            written.append(p)
    if "summary-text" in formats:
        p = out / f"{stem}.txt"
        p.write_text(render_summary(report))
        written.append(p)
    if wall_time is not None:
        p = out / f"{stem}.timing.json"
        p.write_text(json.dumps({"wall_time_s": wall_time}) + "\n")
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# command line

def _inline_table(text: str, what: str) -> dict:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"cannot parse {what} {text!r}: {exc}") from exc


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${ENV_OUT_DIR} or ./carnotcheck-out)")
    p.add_argument("--format", action="append", choices=FORMATS, default=None,
                   help="output formats; repeatable (default: json and csv)")
    p.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every contract tolerance")


def _add_setting(p: argparse.ArgumentParser, potential: str | None, integrator: bool = True) -> None:
    p.add_argument("--group", default="heisenberg", choices=["heisenberg", "euclidean"])
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--convention", default="standard", choices=["standard", "alt"])
    p.add_argument("--potential", default=potential, required=potential is None,
                   help='inline table, e.g. \'{family = "kaplan_power", kappa = 4}\'')
    if integrator:
        p.add_argument("--integrator", default='{kind = "grid"}', help="inline integrator table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carnotcheck", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("config")
    _add_common(p)

    p = sub.add_parser("identities", help="built-in exact identity suite")
    p.add_argument("--quick", action="store_true")
    _add_common(p)

    p = sub.add_parser("scan-adams", help="Adams ratio along shells")
    _add_setting(p, '{family = "kaplan_power", kappa = 4}', integrator=False)
    p.add_argument("--path", default="z_axis", choices=["z_axis", "radial"])
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--shells", type=float, nargs="+", default=[10.0, 100.0, 1000.0, 10000.0])
    _add_common(p)

    p = sub.add_parser("fit-constants", help="fit inequality constants over a polynomial family")
    _add_setting(p, None)
    p.add_argument("--kind", required=True, choices=["poincare", "lsi", "hardy", "rockland"])
    p.add_argument("--family", nargs="+", default=None, help="test polynomials, e.g. x y 'x*y'")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--order", type=int, default=1, help="Rockland order parameter n")
    _add_common(p)

    p = sub.add_parser("statpoly", help="statistical polynomial and higher-order Poincare check")
    _add_setting(p, None)
    p.add_argument("--f", required=True)
    p.add_argument("--m", type=int, required=True)
    _add_common(p)
    return parser


def _scenario_from_args(args) -> tuple[dict, str]:
    if args.command == "run":
        return load_scenario(args.config), Path(args.config).stem
    if args.command == "identities":
        return {"name": "identities", "verifiers": [{"type": "identities", "quick": args.quick}]}, "identities"
    data = {"group": {"kind": args.group, "n": args.n, "convention": args.convention},
            "potential": _inline_table(args.potential, "potential")}
    if args.command == "scan-adams":
        data["verifiers"] = [{"type": "adams_scan", "path": args.path, "eps": args.eps, "shells": args.shells}]
        return data, "scan-adams"
    data["integrator"] = _inline_table(args.integrator, "integrator")
    if args.command == "fit-constants":
        v: dict = {"poincare": {"type": "poincare_estimate"},
                   "lsi": {"type": "lsi_fit", "beta": args.beta, "m": args.m, "p": args.p},
                   "hardy": {"type": "hardy_check"},
                   "rockland": {"type": "rockland_terms", "n": args.order}}[args.kind]
        if args.family:
            v["family"] = args.family
        data["verifiers"] = [v]
        return data, f"fit-{args.kind}"
    data["verifiers"] = [{"type": "statpoly", "f": args.f, "m": args.m},
                         {"type": "higher_poincare", "f": args.f, "m": args.m}]
    return data, "statpoly"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        data, stem = _scenario_from_args(args)
        report = run_scenario_data(data, args.seed, args.tolerance_scale)
    except Exception as exc:  # parse, validation and verifier errors all map to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out_dir = args.out_dir or (data.get("output") or {}).get("dir") or os.environ.get(ENV_OUT_DIR) \
        or "carnotcheck-out"
    stem = (data.get("output") or {}).get("stem", stem)
    try:
        emit_report(report, out_dir, stem, tuple(args.format or ("json", "csv")),
                    wall_time=time.perf_counter() - start)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(render_summary(report))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
