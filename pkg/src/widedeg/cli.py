"""Command-line front end.

Subcommands: ``verify-lemmas``, ``solve``, ``compare``, ``diagnose``,
``sobolev-check`` and ``report``.  Exit codes:

    0  success
    2  usage or configuration error (also a missing manifest for ``report``)
    3  inequality violation
    4  solver iteration budget exhausted
    5  comparison violation beyond tolerance
    6  numerical failure (NaN in an iteration)
    7  outer iteration did not converge
    8  precondition violated (exponents, ranges, boundary ordering)
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .config import load_config
from .errors import (
    ConfigError,
    DivergenceError,
    InvalidInputError,
    NumericalFailureError,
    PartialResultError,
    PreconditionError,
)
from .inequality_lab import LEMMAS, SampleCampaign, run_campaign
from .mesh import TriMesh, gradient, write_tables
from .problems import build_boundary, build_rhs, exact_solution, smooth_perturbation
from .records import RunWriter, read_records
from .solver import SolveConfig, minimize

__all__ = ["main", "EXIT_CODES"]

log = logging.getLogger("widedeg")

EXIT_CODES = {
    "ok": 0,
    "usage": 2,
    "violation": 3,
    "budget": 4,
    "comparison": 5,
    "numerical": 6,
    "divergence": 7,
    "precondition": 8,
}

COMMANDS = ("verify-lemmas", "solve", "compare", "diagnose", "sobolev-check", "report")


class _Failure(Exception):
    def __init__(self, code, message, records=(), summary=""):
        super().__init__(message)
        self.code = code
        self.records = list(records)
        self.summary = summary


# --- helpers -----------------------------------------------------------------


def _solver_config(cfg):
    s = cfg["solver"]
    try:
        return SolveConfig(
            tolerance=float(s["tolerance"]),
            max_inner=int(s["max_inner"]),
            max_outer=int(s["max_outer"]),
            eps_schedule=tuple(s["eps_schedule"]),
            damping=float(s["damping"]),
            outer_tolerance=s["outer_tolerance"],
        )
    except InvalidInputError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _mesh(problem, n):
    try:
        return TriMesh(problem["bounds"], n, n, problem["diagonal"])
    except InvalidInputError as exc:
        raise ConfigError(f"problem: {exc}") from exc


def _solve_record(n, mesh, p, rhs, rep, error=None):
    rec = {"kind": "solve", "n": n, "h": mesh.cell_size, "p": p, "rhs": rhs.name}
    rec.update(rep.to_record())
    if error is not None:
        rec["error"] = error
    return rec


def _solve_level(cfg, n, records):
    prob = cfg["problem"]
    p = float(prob["p"])
    mesh = _mesh(prob, n)
    rhs = build_rhs(prob["rhs"], p)
    g = build_boundary(mesh, prob["boundary"])
    try:
        u, rep = minimize(g, rhs, p, _solver_config(cfg))
    except PartialResultError as exc:
        records.append(_solve_record(n, mesh, p, rhs, exc.report))
        raise _Failure(EXIT_CODES["budget"], f"n={n}: {exc}", records) from exc
    except DivergenceError as exc:
        records.append({"kind": "divergence", "n": n, "trace": exc.trace})
        raise _Failure(EXIT_CODES["divergence"], f"n={n}: {exc}", records) from exc
    return mesh, g, rhs, u, rep


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# --- subcommands -----------------------------------------------------------


def cmd_verify_lemmas(cfg, writer):
    c = cfg["campaign"]
    try:
        camp = SampleCampaign(
            seed=cfg["seed"],
            count=c["count"],
            p_values=tuple(float(p) for p in c["p_values"]),
            dimensions=tuple(int(n) for n in c["dimensions"]),
            lemmas=tuple(c["lemmas"] or LEMMAS),
            magnitude_range=tuple(float(v) for v in c["magnitude_range"]),
            near_pair_fraction=float(c["near_pair_fraction"]),
            chunk_size=c["chunk_size"],
            threads=cfg["threads"],
            c_star_scale=float(c["c_star_scale"]),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"campaign: {exc}") from exc
    reports = run_campaign(camp)
    records = [r.to_record() for r in reports]
    writer.table(
        "lemmas.csv",
        ["lemma", "p", "n", "samples", "violations", "tight", "worst_relative_margin",
         "empirical_constant", "reference_constant"],
        [[r.lemma, r.p, r.n, r.samples, r.violations, r.tight, r.worst_relative_margin,
          r.empirical_constant, r.reference_constant] for r in reports],
    )
    lines = []
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{status} {r.lemma:<18} p={r.p:<4g} n={r.n} samples={r.samples} "
            f"violations={r.violations} tight={r.tight} worst_rel={_fmt(r.worst_relative_margin)}"
            + (f" c_emp={_fmt(r.empirical_constant)}" if r.empirical_constant is not None else "")
        )
    failed = [r for r in reports if not r.passed]
    summary = "\n".join(lines)
    if failed:
        worst = "\n".join(
            f"worst sample {r.lemma} p={r.p:g} n={r.n}: {r.worst_sample}" for r in failed
        )
        raise _Failure(EXIT_CODES["violation"], f"{len(failed)} campaign(s) with violations\n{worst}",
                       records, summary + "\n" + worst)
    return records, summary


def cmd_solve(cfg, writer):
    prob = cfg["problem"]
    exact = exact_solution(prob)
    records, rows, lines = [], [], []
    errors, sizes = [], []
    for n in prob["n"]:
        mesh, g, rhs, u, rep = _solve_level(cfg, n, records)
        err = dg.max_norm_error(u, exact) if exact is not None else None
        records.append(_solve_record(n, mesh, float(prob["p"]), rhs, rep, err))
        write_tables(mesh, writer.out / f"n{n}", {"u": u})
        if err is not None:
            errors.append(err)
            sizes.append(mesh.cell_size)
        lines.append(
            f"n={n} h={mesh.cell_size:.6g} iterations={rep.inner_iterations} "
            f"weak_residual={rep.weak_residual:.3e} lipschitz={rep.lipschitz:.6g}"
            + (f" error={err:.6e}" if err is not None else "")
        )
        rows.append([n, mesh.cell_size, rep.energy, rep.inner_iterations, rep.weak_residual, err])
    orders = [None] + dg.observed_order(errors, sizes) if len(errors) == len(rows) else [None] * len(rows)
    writer.table("rates.csv", ["n", "h", "energy", "iterations", "weak_residual", "error", "order"],
                 [r + [o] for r, o in zip(rows, orders)])
    if any(o is not None for o in orders):
        lines.append("orders: " + " ".join(_fmt(o) for o in orders[1:]))
    return records, "\n".join(lines)


def _pair_seeds(seed, k):
    a, b = np.random.SeedSequence([int(seed), int(k)]).generate_state(2)
    return int(a), int(b)


def cmd_compare(cfg, writer):
    cp, prob = cfg["compare"], cfg["problem"]
    p = float(prob["p"])
    scfg = _solver_config(cfg)
    rhs = build_rhs(prob["rhs"], p)
    records, lines, rows = [], [], []
    code = EXIT_CODES["ok"]
    for n in prob["n"]:
        mesh = _mesh(prob, n)
        base = build_boundary(mesh, prob["boundary"])
        for k in range(cp["pairs"]):
            s1, s2 = _pair_seeds(cfg["seed"], k)
            g1 = base + smooth_perturbation(mesh, s1, cp["amplitude"])
            g2 = g1 + cp["shift"] + smooth_perturbation(mesh, s2, cp["gap"], nonnegative=True)
            try:
                verdict = dg.compare(g1, g2, rhs, p, scfg, c_cmp=cp["c_cmp"],
                                     region=cfg["diagnostics"]["region"])
            except PartialResultError as exc:
                raise _Failure(EXIT_CODES["budget"], f"n={n} pair {k}: {exc}", records) from exc
            except DivergenceError as exc:
                raise _Failure(EXIT_CODES["divergence"], f"n={n} pair {k}: {exc}", records) from exc
            rec = {"pair": k, "n": n, "p": p, "rhs": rhs.name, "shift": cp["shift"],
                   **verdict.to_record()}
            if cp["gap"] == 0 and cp["amplitude"] >= 0:
                u, v = verdict.solutions
                rec["translation_error"] = float(np.max(np.abs(v.values - u.values - cp["shift"])))
            records.append(rec)
            rows.append([n, k, verdict.h, verdict.min_diff, verdict.max_diff, verdict.tol_cmp,
                         verdict.violating.size])
            lines.append(
                f"{'PASS' if verdict.passed else 'FAIL'} n={n} pair={k} min(v-u)={verdict.min_diff:.6e} "
                f"tol={verdict.tol_cmp:.3e} violations={verdict.violating.size}"
            )
            if not verdict.passed:
                code = EXIT_CODES["comparison"]
    writer.table("compare.csv", ["n", "pair", "h", "min_diff", "max_diff", "tol_cmp", "violations"], rows)
    summary = "\n".join(lines)
    if code:
        raise _Failure(code, "comparison violated beyond tolerance", records, summary)
    return records, summary


def cmd_diagnose(cfg, writer):
    prob, dc = cfg["problem"], cfg["diagnostics"]
    p = float(prob["p"])
    records, rows, lines = [], [], []
    for n in prob["n"]:
        mesh, g, rhs, u, rep = _solve_level(cfg, n, records)
        region = dc["region"]
        rr = dg.regularity_report(
            u, p, region=region, beta=float(dc["beta"]),
            t_values=None if dc["t_values"] is None else tuple(float(t) for t in dc["t_values"]),
            eps_floors=tuple(float(e) for e in dc["eps_floors"]), lattice=dc["lattice"],
        )
        if dc["thresholds"] is not None:
            rr.degeneracy = dg.degeneracy_measure(u, dc["thresholds"], region)
        x0, x1, y0, y1 = rr.region
        centre = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
        alpha = float(dc["riesz_alpha"])
        rec = {"n": n, **rr.to_record()}
        rec["riesz_centre"] = dg.riesz_potential(mesh, 1.0, alpha, centre)
        if dc["riesz_constant"]:
            rec["riesz_constant"] = dg.riesz_lm_constant(mesh, 1.0, alpha, float(dc["riesz_s"]),
                                                         float(dc["riesz_m"]))
        rec["weak_residual"] = rep.weak_residual
        records.append(rec)
        rows.append([n, rr.h, *[a for _, a in rr.degeneracy], rr.I1, rr.I2, rr.s1, rr.s2,
                     rec["riesz_centre"], rec.get("riesz_constant")])
        lines.append(
            f"n={n} h={rr.h:.6g} degeneracy=" + ",".join(f"{t:.4g}:{a:.6g}" for t, a in rr.degeneracy)
            + f" I1={rr.I1:.6g} I2={rr.I2:.6g} s1={rr.s1:.6g} s2={rr.s2:.6g}"
        )
    header = ["n", "h"] + [f"measure_{i}" for i in range(len(records[0]["degeneracy"]))] + [
        "I1", "I2", "s1", "s2", "riesz_centre", "riesz_constant"]
    writer.table("trends.csv", header, rows)
    s1 = [r["s1"] for r in records]
    I2 = [r["I2"] for r in records]
    if len(records) > 1:
        lines.append("s1 ratios: " + " ".join(_fmt(v) for v in dg.trend_ratios(s1)))
        lines.append("I2 ratios: " + " ".join(_fmt(v) for v in dg.trend_ratios(I2)))
    return records, "\n".join(lines)


def cmd_sobolev(cfg, writer):
    sc, prob = cfg["sobolev"], cfg["problem"]
    params = dg.SobolevParams(t=float(sc["t"]), gamma=float(sc["gamma"]), q=float(sc["q"]))
    if sc["weight"] not in ("one", "degeneracy"):
        raise ConfigError("sobolev.weight must be 'one' or 'degeneracy'")
    p = float(prob["p"])
    records, rows, lines = [], [], []
    c_n = None
    for n in prob["n"]:
        mesh = _mesh(prob, n)
        tests = dg.sobolev_test_functions(mesh)
        if c_n is None:
            c_n = dg.fit_sobolev_constant(mesh, params, tests, lattice=sc["lattice"])
        if sc["weight"] == "one":
            rho = np.ones(mesh.n_triangles)
        else:
            mesh, _, _, u, _ = _solve_level(cfg, n, records)
            tests = dg.sobolev_test_functions(mesh)
            rho = (np.maximum(gradient(u).norms - 1.0, 0.0) + float(sc["offset"])) ** (p - 1.0)
        rep = dg.sobolev_check(tests, rho, params, c_n=c_n, lattice=sc["lattice"], sub=sc["subsample"])
        records.append({"n": n, "p": p, "weight": sc["weight"], **rep.to_record()})
        rows.append([n, rep.h, rep.K, rep.max_ratio, rep.budget])
        lines.append(f"n={n} h={rep.h:.6g} q*={params.q_star:.6g} K={rep.K:.6g} "
                     f"max_ratio={rep.max_ratio:.6g} budget={rep.budget:.6g}")
    writer.table("sobolev.csv", ["n", "h", "K", "max_ratio", "budget"], rows)
    if len(records) > 1:
        lines.append("max_ratio ratios: " + " ".join(
            _fmt(v) for v in dg.trend_ratios([r["max_ratio"] for r in records])))
    return records, "\n".join(lines)


# --- report ----------------------------------------------------------------

TREND_FIELDS = ("error", "weak_residual", "I1", "I2", "s1", "s2", "max_ratio", "K", "riesz_centre",
                "riesz_constant")


def discover_runs(run_dir):
    """Run directories below ``run_dir``; each must hold a manifest."""
    root = Path(run_dir)
    if not root.is_dir():
        raise ConfigError(f"run directory not found: {root}")
    dirs = sorted({p.parent for p in root.rglob("records.jsonl")} | {p.parent for p in root.rglob("manifest.json")})
    if not dirs:
        raise ConfigError(f"missing manifest: {root / 'manifest.json'}")
    missing = [d / "manifest.json" for d in dirs if not (d / "manifest.json").is_file()]
    if missing:
        raise ConfigError("missing manifest: " + ", ".join(str(m) for m in missing))
    return dirs


def trend_table(runs):
    """Rows ``(run, kind, p, h, field, value, ratio)`` grouped by ``(kind, p, field)``."""
    series = {}
    for name, recs in runs:
        for r in recs:
            if "h" not in r or not isinstance(r.get("h"), (int, float)):
                continue
            for f in TREND_FIELDS:
                v = r.get(f)
                if isinstance(v, (int, float)) and not isinstance(v, bool):
                    series.setdefault((r.get("kind", "?"), r.get("p"), f), []).append((r["h"], name, v))
    rows = []
    for (kind, p, f) in sorted(series, key=lambda k: (str(k[0]), str(k[1]), k[2])):
        pts = sorted(series[(kind, p, f)], key=lambda t: (-t[0], t[1]))
        prev = None
        for h, name, v in pts:
            ratio = v / prev if prev not in (None, 0) else None
            rows.append([name, kind, p, h, f, v, ratio])
            prev = v
    return rows


def cmd_report(run_dir, out):
    dirs = discover_runs(run_dir)
    root = Path(run_dir)
    runs, texts = [], []
    for d in dirs:
        name = str(d.relative_to(root)) if d != root else "."
        recs = read_records(d / "records.jsonl") if (d / "records.jsonl").is_file() else []
        runs.append((name, recs))
        summ = d / "summary.txt"
        texts.append((name, summ.read_text() if summ.is_file() else ""))
    rows = trend_table(runs)
    if len(runs) == 1:
        text = texts[0][1]
    else:
        parts = [f"== {name} ==\n{t.rstrip()}" for name, t in texts]
        multi = [r for r in rows if r[6] is not None]
        if multi:
            parts.append("== trends ==\n" + "\n".join(
                f"{r[1]} p={_fmt(r[2])} {r[4]} h={_fmt(r[3])} value={_fmt(r[5])} ratio={_fmt(r[6])}"
                for r in multi))
        text = "\n\n".join(parts) + "\n"
    writer = RunWriter(out or run_dir)
    (writer.out / "report.txt").write_text(text)
    writer.table("report.csv", ["run", "kind", "p", "h", "field", "value", "ratio"], rows)
    return text


# --- entry point -----------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="widedeg", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS[:-1]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("-v", "--verbose", action="count", default=0)
    rp = sub.add_parser("report")
    rp.add_argument("run_dir")
    rp.add_argument("--out")
    rp.add_argument("-v", "--verbose", action="count", default=0)
    return ap


_HANDLERS = {
    "verify-lemmas": cmd_verify_lemmas,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "diagnose": cmd_diagnose,
    "sobolev-check": cmd_sobolev,
}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CODES["usage"] if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(message)s")

    if args.command == "report":
        try:
            print(cmd_report(args.run_dir, args.out), end="")
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CODES["usage"]
        return 0

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg["threads"] = args.threads
        if args.out is not None:
            cfg["out"] = args.out
        if cfg["out"] is None:
            cfg["out"] = str(Path("runs") / args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES["usage"]

    writer = RunWriter(cfg["out"])
    started = _now()
    code, records, summary, message = 0, [], "", None
    try:
        records, summary = _HANDLERS[args.command](cfg, writer)
    except _Failure as exc:
        code, records, summary, message = exc.code, exc.records, exc.summary, str(exc)
    except ConfigError as exc:
        code, message = EXIT_CODES["usage"], str(exc)
    except PreconditionError as exc:
        code, message = EXIT_CODES["precondition"], str(exc)
    except NumericalFailureError as exc:
        code, message = EXIT_CODES["numerical"], str(exc)
    except InvalidInputError as exc:
        code, message = EXIT_CODES["usage"], str(exc)
    writer.records(records)
    if summary:
        print(summary)
    if message:
        summary = (summary + "\n" if summary else "") + f"error: {message}"
    writer.summary(f"command={args.command} exit={code}\n{summary}")
    writer.manifest(args.command, cfg, code, started, _now(), argv)
    if message:
        print(f"error: {message}", file=sys.stderr)
    return code
