"""Command-line front end: one binary, one subcommand per run, one JSON report per run.

Exit codes: 0 success, 1 input error, 2 invariant or convergence failure.
Reports go to --out, else $SPENCERKIT_OUTDIR/<command>.json, else ./<command>.json.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConstructionError, InputError, InvariantViolation

OUTDIR_ENV = "SPENCERKIT_OUTDIR"

COMMANDS = ("algebra check", "cohomology", "spectral", "torsion", "lattice solve", "lattice check",
            "lattice evolve", "selftest")


@dataclass
class RunConfig:
    command: str
    algebra: str = "su2"
    base: str = "torus:2:3"
    kmax: int = 2
    k: int | None = None
    mode: str = "ce"                 # cohomology: ce | spencer
    vertical: str = "ce"             # spectral: ce | spencer
    pairing: str | None = None       # raw | killing_dual (default: by algebra)
    curvature: str = "formal"        # torsion: formal | ring
    representatives: bool = True
    n: int = 2
    N: int = 8
    omega: str = "random:seed=7:amp=0.05"
    lam: str = "random:seed=9:amp=1.0"
    anchor: str | None = None
    xi: str = "zero"
    X: str = "zero"
    alpha: float = 0.1
    tol: float = 1e-10
    maxiter: int = 2000
    dt: float = 1e-3
    steps: int = 10
    method: str = "rk4"
    seed: int = 0
    trials: int = 1000
    replay: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InputError(f"unknown configuration keys: {', '.join(unknown)}")
        if "command" not in data:
            raise InputError("configuration is missing 'command'")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise InputError(f"command must be one of {COMMANDS}, got {self.command!r}")
        checks = [
            ("kmax", 1 <= self.kmax <= 8, "must be in 1..8"),
            ("k", self.k is None or 0 <= self.k <= 12, "must be in 0..12"),
            ("mode", self.mode in ("ce", "spencer"), "must be 'ce' or 'spencer'"),
            ("vertical", self.vertical in ("ce", "spencer"), "must be 'ce' or 'spencer'"),
            ("pairing", self.pairing in (None, "raw", "killing_dual"), "must be 'raw' or 'killing_dual'"),
            ("curvature", self.curvature in ("formal", "ring"), "must be 'formal' or 'ring'"),
            ("n", 1 <= self.n <= 4, "must be in 1..4"),
            ("N", 4 <= self.N <= 256, "must be in 4..256"),
            ("alpha", self.alpha >= 0, "must be nonnegative"),
            ("tol", self.tol > 0, "must be positive"),
            ("maxiter", self.maxiter >= 1, "must be at least 1"),
            ("dt", self.dt > 0, "must be positive"),
            ("steps", 0 <= self.steps <= 1_000_000, "must be in 0..1000000"),
            ("method", self.method in ("euler", "rk4"), "must be 'euler' or 'rk4'"),
            ("trials", self.trials >= 1, "must be at least 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise InputError(f"parameter {name}={getattr(self, name)!r} {msg}")

    def to_dict(self) -> dict:
        return asdict(self)


# -- report plumbing -----------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def make_report(cfg: RunConfig, result: dict, exit_code: int) -> dict:
    return {"spencerkit_version": __version__, "command": cfg.command, "config": cfg.to_dict(),
            "seed": cfg.seed, "exit_code": exit_code, "result": _jsonable(result)}


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def default_report_path(cfg: RunConfig) -> Path:
    outdir = Path(os.environ.get(OUTDIR_ENV, "."))
    return outdir / (cfg.command.replace(" ", "-") + ".json")


# -- commands ------------------------------------------------------------------------

def cmd_algebra_check(cfg: RunConfig):
    from .liealg import check_structure, killing_form, resolve_algebra
    alg = resolve_algebra(cfg.algebra)
    rep = check_structure(alg)
    kf = killing_form(alg)
    result = {"algebra": alg.name, "dim": alg.dim,
              "antisymmetry_violations": [list(t) for t in rep.antisymmetry],
              "jacobi_violations": [list(t) for t in rep.jacobi],
              "killing_rank": kf.rank, "killing_degenerate": kf.degenerate, "ok": rep.ok}
    table = [("algebra", alg.name), ("dim", alg.dim), ("antisymmetry violations", len(rep.antisymmetry)),
             ("jacobi violations", len(rep.jacobi)), ("killing rank", kf.rank)]
    return result, table, 0 if rep.ok else 2


def cmd_cohomology(cfg: RunConfig):
    from .liealg import resolve_algebra
    from .spencer_complex import (CochainComplexData, ce_complex, cohomology, cohomology_report,
                                  default_pairing, nilpotency_check, spencer_chain,
                                  spencer_nilpotency_finding, sym_dim)
    alg = resolve_algebra(cfg.algebra)
    ks = [cfg.k] if cfg.k is not None else list(range(cfg.kmax + 1))
    if cfg.mode == "ce":
        rows = [cohomology_report("ce", k, ce_complex(alg, k)) for k in ks]
        result = {"algebra": alg.name, "mode": "ce", "slices": rows}
        return result, [(f"H^*(g, Sym^{r['k']})", r["H"]) for r in rows], 0
    pairing = cfg.pairing or default_pairing(alg)
    top = max(max(ks), 1)
    finding = spencer_nilpotency_finding(alg, max(top, 2), pairing)
    maps = spencer_chain(alg, top, pairing)
    nil = nilpotency_check(maps)
    result = {"algebra": alg.name, "mode": "spencer", "pairing": pairing, "nilpotency": finding.as_dict(),
              "chain_failing_degrees": nil.failing_degrees}
    table = [("pairing", pairing), ("nilpotency verdict", finding.verdict)]
    if not nil.ok:
        result["cohomology"] = None
        table.append(("cohomology", "undefined: delta^2 != 0"))
        return result, table, 2
    cx = CochainComplexData.build([sym_dim(alg.dim, j) for j in range(top + 1)], maps)
    H = [g.dim for g in cohomology(cx)]
    result["cohomology"] = {"kmax": top, "H": H}
    table.append(("H^k of Sym^0..Sym^kmax", H))
    return result, table, 0


def _spectral_runs(cfg: RunConfig, base, alg):
    """One (label, K) per independent run: CE slices separately, Spencer as one complex."""
    from .specseq import build_spencer_double
    if cfg.vertical == "spencer":
        return [("spencer", build_spencer_double(base, alg, cfg.kmax, "spencer", pairing_mode=cfg.pairing))]
    ks = [cfg.k] if cfg.k is not None else list(range(cfg.kmax + 1))
    return [(f"ce:k={k}", build_spencer_double(base, alg, max(cfg.kmax, k), "ce", k=k)) for k in ks]


def cmd_spectral(cfg: RunConfig):
    from .derham import resolve_base
    from .liealg import resolve_algebra
    from .specseq import compute_pages, page_report, total_cohomology
    base, alg = resolve_base(cfg.base), resolve_algebra(cfg.algebra)
    runs, table, ok = [], [], True
    for label, K in _spectral_runs(cfg, base, alg):
        pages = compute_pages(K, representatives=cfg.representatives)
        total = total_cohomology(K)
        rep = page_report(K, pages, base.n, total)
        rep["label"] = label
        runs.append(rep)
        good = rep["oracle_ok"] and rep["bounds"]["N_le_n_plus_1"] and (rep["bounds"]["E2_degenerate"] or base.n > 4)
        ok &= good
        table.append((label, f"N={rep['N']} E2_degenerate={rep['bounds']['E2_degenerate']} "
                             f"oracle={rep['oracle_ok']} H_total={total}"))
    result = {"base": base.name, "n": base.n, "betti": list(base.betti), "algebra": alg.name,
              "vertical": cfg.vertical, "runs": runs, "ok": ok}
    return result, table, 0 if ok else 2


def cmd_torsion(cfg: RunConfig):
    from .derham import resolve_base
    from .liealg import resolve_algebra
    from .torsion import torsion_case1
    if cfg.k is None:
        raise InputError("parameter k is required for torsion")
    base, alg = resolve_base(cfg.base), resolve_algebra(cfg.algebra)
    rep = torsion_case1(base, alg, cfg.k, cfg.curvature)
    result = {"base": base.name, "algebra": alg.name, **rep.as_dict()}
    table = [("k", cfg.k), ("mode", cfg.curvature), ("total_dim", rep.total_dim),
             ("proof-form total", rep.proof_form_total), ("discrepancy", rep.discrepancy),
             ("classical_dim", rep.classical_dim)]
    return result, table, 0


def _lattice_setup(cfg: RunConfig):
    from .lattice import LatticeSpec
    from .liealg import resolve_algebra
    return LatticeSpec(cfg.n, cfg.N, resolve_algebra(cfg.algebra))


def _floats(arr) -> list:
    return [float(x) for x in np.asarray(arr).ravel()]


def cmd_lattice_solve(cfg: RunConfig):
    from .lattice import (comoment_from_spec, connection_from_spec, integrability_obstruction, solve_lambda)
    spec = _lattice_setup(cfg)
    omega = connection_from_spec(spec, cfg.omega)
    lam0 = comoment_from_spec(spec, cfg.lam)
    anchor = comoment_from_spec(spec, cfg.anchor) if cfg.anchor else lam0
    res = solve_lambda(spec, omega, lam0, anchor, cfg.alpha, cfg.tol, cfg.maxiter)
    obs = integrability_obstruction(spec, omega, res.lam)
    result = {"solve": res.summary(), "history": res.history, "obstruction": obs.summary(),
              "anchor_distance_max": float(np.abs(res.lam - anchor).max())}
    table = [("converged", res.converged), ("iterations", res.iterations), ("functional", res.functional),
             ("cartan residual max", res.cartan_residual_max), ("obstruction max", obs.max)]
    return result, table, 0 if res.converged else 2


def cmd_lattice_check(cfg: RunConfig):
    from .lattice import (cartan_residual, comoment_from_spec, connection_from_spec, constraint_distribution,
                          integrability_obstruction, step4_identity_sample, symplectic_check, transport_defect,
                          transport_defect_from_residual)
    spec = _lattice_setup(cfg)
    omega = connection_from_spec(spec, cfg.omega)
    lam = comoment_from_spec(spec, cfg.lam)
    R = cartan_residual(spec, omega, lam)
    obs = integrability_obstruction(spec, omega, lam)
    sym = symplectic_check(spec, omega, lam)
    pairing_err = step4_identity_sample(spec.alg, cfg.trials, cfg.seed)
    ident = float(np.abs(transport_defect(spec, omega, lam) - transport_defect_from_residual(spec, omega, lam)).max()) \
        if spec.n >= 2 else 0.0
    try:
        dist = constraint_distribution(spec, omega, lam, (0,) * spec.n).as_dict()
    except InputError as exc:
        dist = {"error": str(exc)}
    result = {"cartan_residual_max": float(np.abs(R).max()), "obstruction": obs.summary(),
              "symplectic": sym.summary(), "pairing_identity_max_error": pairing_err, "transport_identity_error": ident,
              "constraint_distribution_origin": dist}
    table = [("cartan residual max", result["cartan_residual_max"]), ("obstruction max", obs.max),
             ("symplectic max error", sym.max_error), ("coadjoint pairing identity max error", pairing_err)]
    return result, table, 0


def cmd_lattice_evolve(cfg: RunConfig):
    from .lattice import comoment_from_spec, connection_from_spec, evolve_connection, vector_field_from_spec
    spec = _lattice_setup(cfg)
    omega = connection_from_spec(spec, cfg.omega)
    xi = comoment_from_spec(spec, cfg.xi)       # same layout as a co-moment: (*grid, dim)
    X = vector_field_from_spec(spec, cfg.X)
    res = evolve_connection(spec, omega, xi, X, cfg.dt, cfg.steps, cfg.method)
    final = res.trajectory[-1]
    result = {**res.summary(), "final_norm": float(np.linalg.norm(final)),
              "max_change": float(np.abs(final - omega).max())}
    table = [("steps", len(res.trajectory) - 1), ("blowup step", res.blowup_step),
             ("final curvature norm", res.curvature_norms[-1])]
    return result, table, 0 if res.ok else 2


def cmd_selftest(cfg: RunConfig):
    if cfg.replay:
        return replay(cfg.replay)
    from .selftest import run_suite
    result = run_suite(seed=cfg.seed)
    table = [(c["name"], "pass" if c["ok"] else "FAIL") for c in result["checks"]]
    return result, table, 0 if result["ok"] else 2


HANDLERS = {"algebra check": cmd_algebra_check, "cohomology": cmd_cohomology, "spectral": cmd_spectral,
            "torsion": cmd_torsion, "lattice solve": cmd_lattice_solve, "lattice check": cmd_lattice_check,
            "lattice evolve": cmd_lattice_evolve, "selftest": cmd_selftest}


def execute(cfg: RunConfig) -> tuple[dict, list, int]:
    """Run one command; returns (report, summary table, exit code)."""
    cfg.validate()
    result, table, code = HANDLERS[cfg.command](cfg)
    return make_report(cfg, result, code), table, code


def load_schema(name: str) -> dict:
    from importlib import resources
    return json.loads(resources.files("spencerkit.schemas").joinpath(name).read_text())


def validate_report(report: dict) -> None:
    import jsonschema
    try:
        jsonschema.validate(report, load_schema("report.schema.json"))
        if report.get("command") == "spectral":
            for run in report["result"]["runs"]:
                jsonschema.validate(run, load_schema("page_report.schema.json"))
    except jsonschema.ValidationError as exc:
        raise InputError(f"report does not match its schema: {exc.message}") from exc


def replay(path: str):
    try:
        report = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {path}: {exc}") from exc
    validate_report(report)
    if report["spencerkit_version"] != __version__:
        raise InputError(f"report was written by version {report['spencerkit_version']}, this is {__version__}")
    original = RunConfig.from_dict(report["config"])
    if original.command == "selftest" and original.replay:
        raise InputError("cannot replay a replay report")
    fresh, _, _ = execute(original)
    identical = dumps(fresh) == dumps(report)
    diff_keys = sorted(k for k in set(fresh["result"]) | set(report["result"])
                       if fresh["result"].get(k) != report["result"].get(k))
    result = {"replayed": str(path), "replayed_command": original.command, "identical": identical,
              "differing_result_keys": diff_keys}
    return result, [("replayed", original.command), ("identical", identical)], 0 if identical else 2


# -- argument parsing ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spencerkit", description="Spencer cohomology and compatible-pair laboratory.")
    p.add_argument("--version", action="version", version=f"spencerkit {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help=f"report path (default: ${OUTDIR_ENV}/<command>.json or ./<command>.json)")
        sp.add_argument("--quiet", action="store_true", help="do not print the summary table")

    alg = sub.add_parser("algebra", help="Lie algebra utilities")
    alg_sub = alg.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    ac = alg_sub.add_parser("check", help="verify antisymmetry and Jacobi exactly")
    ac.add_argument("--preset", "--algebra", dest="algebra", required=True,
                    help="preset (su2, so3, sl2, sl3, heisenberg3, abelian(d)) or JSON file")
    common(ac)

    co = sub.add_parser("cohomology", help="Chevalley-Eilenberg or Spencer cohomology per Sym-degree")
    co.add_argument("--algebra", default="su2")
    co.add_argument("--mode", choices=("ce", "spencer"), default="ce")
    co.add_argument("--k", type=int)
    co.add_argument("--kmax", type=int, default=2)
    co.add_argument("--pairing", choices=("raw", "killing_dual"))
    common(co)

    spc = sub.add_parser("spectral", help="spectral sequence of the Spencer double complex")
    spc.add_argument("--base", default="torus:2:3")
    spc.add_argument("--algebra", default="su2")
    spc.add_argument("--kmax", type=int, default=2)
    spc.add_argument("--k", type=int, help="single CE slice (default: all slices 0..kmax)")
    spc.add_argument("--vertical", choices=("ce", "spencer"), default="ce")
    spc.add_argument("--pairing", choices=("raw", "killing_dual"))
    spc.add_argument("--no-representatives", dest="representatives", action="store_false",
                     help="dimensions and ranks only (faster on large complexes)")
    common(spc)

    to = sub.add_parser("torsion", help="closed-form torsion decomposition")
    to.add_argument("--base", default="torus:2:3")
    to.add_argument("--algebra", default="su2")
    to.add_argument("--k", type=int, required=True)
    to.add_argument("--curvature", choices=("formal", "ring"), default="formal")
    common(to)

    lat = sub.add_parser("lattice", help="compatible-pair lattice laboratory")
    lat_sub = lat.add_subparsers(dest="sub", required=True, parser_class=_Parser)

    def lattice_common(sp):
        sp.add_argument("--algebra", default="su2")
        sp.add_argument("--n", type=int, default=2)
        sp.add_argument("--N", type=int, default=8)
        sp.add_argument("--omega", default="random:seed=7:amp=0.05",
                        help="zero | random:seed=S:amp=A | smooth:seed=S:amp=A | constant-curvature:a | file")
        common(sp)

    ls = lat_sub.add_parser("solve", help="variational inverse construction of the co-moment")
    lattice_common(ls)
    ls.add_argument("--lam0", dest="lam", default="random:seed=9:amp=1.0",
                    help="initial co-moment: zero | random:... | smooth:... | const:c1,... | file")
    ls.add_argument("--anchor", help="anchor co-moment (default: the initial one)")
    ls.add_argument("--alpha", type=float, default=0.1)
    ls.add_argument("--tol", type=float, default=1e-10)
    ls.add_argument("--maxiter", type=int, default=2000)

    lc = lat_sub.add_parser("check", help="residuals, obstruction, symplectic and identity checks")
    lattice_common(lc)
    lc.add_argument("--lam", default="random:seed=9:amp=1.0")
    lc.add_argument("--trials", type=int, default=1000)
    lc.add_argument("--seed", type=int, default=0)

    le = lat_sub.add_parser("evolve", help="integrate the connection evolution law")
    lattice_common(le)
    le.add_argument("--xi", default="zero", help="generator field: zero | const:... | random:... | file")
    le.add_argument("--X", default="zero", help="base vector field: zero | const:... | random:... | file")
    le.add_argument("--dt", type=float, default=1e-3)
    le.add_argument("--steps", type=int, default=10)
    le.add_argument("--method", choices=("euler", "rk4"), default="rk4")

    st = sub.add_parser("selftest", help="run the full invariant suite")
    st.add_argument("--replay", help="re-run the configuration stored in a report and compare byte-for-byte")
    st.add_argument("--seed", type=int, default=0)
    common(st)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    command = args.cmd if getattr(args, "sub", None) is None else f"{args.cmd} {args.sub}"
    values = {k: v for k, v in vars(args).items() if k not in ("cmd", "sub", "out", "quiet")}
    cfg = RunConfig(command=command)
    for key, val in values.items():
        if val is not None or key in ("k", "pairing", "anchor", "replay"):
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


def _print_table(command: str, table: list, code: int, path: Path) -> None:
    width = max([len(str(k)) for k, _ in table] + [8])
    print(f"spencerkit {command}")
    for key, val in table:
        print(f"  {str(key):<{width}}  {val}")
    print(f"  {'report':<{width}}  {path}")
    print(f"  {'exit':<{width}}  {code}")


def run(cfg: RunConfig, out: str | Path | None = None, quiet: bool = False) -> int:
    """Execute one configuration, write its report and return the exit code."""
    try:
        report, table, code = execute(cfg)
    except InputError as exc:
        print(f"spencerkit: input error: {exc}", file=sys.stderr)
        return 1
    except (InvariantViolation, ConstructionError) as exc:
        print(f"spencerkit: invariant failure: {exc}", file=sys.stderr)
        return 2
    path = Path(out) if out else default_report_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report))
    if not quiet:
        _print_table(cfg.command, table, code, path)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
    except InputError as exc:
        print(f"spencerkit: input error: {exc}", file=sys.stderr)
        return 1
    return run(cfg, args.out, args.quiet)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
