"""Command-line interface.

Subcommands: analyze, sample, correlate, critical, validate, diagnose.
Outputs are deterministic: identical flags and seed give byte-identical CSV
and JSON files.  Exit codes: 0 success, 2 validation failure, 3 undecided or
refused computation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from .blocks import Block, Geometry, ancestors, block, format_block, parse_block
from .activities import (ActivityModel, EffectiveDesign, Explicit, Homogeneous,
                         Parametric, TailRule, load_model)
from .analytics import (TruncatedSystem, UncertifiedComputation,
                        check_condition_ii, critical_mu, decay_profile,
                        exact_marginal, existence_report, log_tail_ratio,
                        pair_covariance, pressure_profile, scale_profile)
from .oracle import (enumerate_system, gibbs_ratio_function,
                     condensation_table, fragmentation_table,
                     mandelbrot_gnz_report, verify_gnz,
                     verify_hierarchical_formula, verify_topdown)
from .render import render_svg
from .sampler import Configuration, estimate_chunked, sample_gibbs, \
    sample_gibbs_infinite, sample_mandelbrot

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNDECIDED = 3


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _formats(args) -> set[str]:
    return set(args.format.split(","))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    model = load_model(args.model)
    out = _out_dir(args)
    report = existence_report(model)
    _write_json(out / "existence.json", report.to_json_obj())
    if model.is_homogeneous:
        try:
            prof = pressure_profile(model, tol=args.tol, j_max=args.jmax)
            _write_json(out / "pressure.json", prof.to_json_obj())
            sp = scale_profile(model, args.jmax)
            rows = [{"j": j,
                     "log_z": sp.log_z[j],
                     "log_zhat": sp.log_zhat[j],
                     "rho": math.exp(sp.log_zhat[j] - _l1p(sp.log_zhat[j]))
                     if sp.log_zhat[j] > -math.inf else 0.0,
                     "p_partial": sp.pressure_partial[j]}
                    for j in range(sp.j_lo, sp.j_hi + 1)]
            _write_csv(out / "scales.csv", rows)
        except UncertifiedComputation as exc:
            _write_json(out / "pressure.json", {"error": str(exc)})
    if report.verdict == "undecided":
        return EXIT_UNDECIDED
    return EXIT_OK


def _l1p(lzh: float) -> float:
    from .logreal import log1p_exp
    return log1p_exp(lzh)


def cmd_sample(args) -> int:
    model = load_model(args.model)
    geo = model.geometry
    window = parse_block(args.window)
    out = _out_dir(args)
    fmts = _formats(args)
    configs = []
    try:
        for i in range(args.samples):
            if args.infinite:
                cfg = sample_gibbs_infinite(model, window, args.depth,
                                            seed=args.seed, index=i)
            else:
                cfg = sample_gibbs(model, window, args.depth,
                                   seed=args.seed, index=i)
            configs.append(cfg)
    except UncertifiedComputation as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    with (out / "configs.jsonl").open("w") as fh:
        for cfg in configs:
            fh.write(json.dumps(cfg.to_json_obj(), sort_keys=True) + "\n")
    if "csv" in fmts:
        rows = [{"sample": i, "blocks": " ".join(format_block(b) for b in cfg.blocks),
                 "covered_by_ancestor": cfg.covered_by_ancestor
                 if cfg.covered_by_ancestor is not None else ""}
                for i, cfg in enumerate(configs)]
        _write_csv(out / "configs.csv", rows)
    if "svg" in fmts and geo.d in (1, 2):
        (out / "sample_0.svg").write_text(render_svg(configs[0], geo) + "\n")
    return EXIT_OK


def _distance_pairs(geo: Geometry, window: Block, depth: int) -> list[tuple[int, Block, Block]]:
    """Pairs of bottom-scale blocks at every hierarchical distance inside
    the window: (lcs scale, b1, b2)."""
    bottom = -depth
    b1 = Block(bottom, tuple(m * geo.M ** (window.scale - bottom)
                             for m in window.index))
    pairs = []
    for s in range(1, window.scale - bottom + 1):
        l = bottom + s
        anc = ancestors(b1, l, geo)[-1]
        idx = list(anc.index)
        idx2 = [m * geo.M for m in idx]
        idx2[0] += 1          # the sibling subtree at scale l
        bot = tuple(m * geo.M ** (s - 1) for m in idx2)
        pairs.append((l, b1, Block(bottom, bot)))
    return pairs


def cmd_correlate(args) -> int:
    model = load_model(args.model)
    geo = model.geometry
    window = parse_block(args.window)
    out = _out_dir(args)
    sys_ = TruncatedSystem(model, window, args.depth)
    rows = []
    for l, b1, b2 in _distance_pairs(geo, window, args.depth):
        cv = pair_covariance(model, b1, b2, window, args.depth)
        batch = estimate_chunked(model, window, args.depth, args.samples,
                                 {"pair": [b1, b2], "b1": [b1], "b2": [b2]},
                                 seed=args.seed)
        p12, err = batch.estimate("pair")
        mc_cov = p12 - batch.estimate("b1")[0] * batch.estimate("b2")[0]
        rows.append({"lcs_scale": l,
                     "distance": float(geo.M) ** (geo.d * l),
                     "cov_exact": cv["cov"],
                     "cov_factored": cv["factored_cov"],
                     "cov_mc": mc_cov,
                     "stderr": err})
    _write_csv(out / "correlate.csv", rows)
    if model.is_homogeneous:
        try:
            table = decay_profile(model, args.jmax)
            _write_csv(out / "decay.csv", [
                {"j": r["j"], "log_R": r["log_R"],
                 "scaled_log_R": r["scaled_log_R"],
                 "residual": r["residual"] if r["residual"] is not None else ""}
                for r in table])
        except UncertifiedComputation as exc:
            print(f"decay table refused: {exc}", file=sys.stderr)
            return EXIT_UNDECIDED
    return EXIT_OK


def cmd_critical(args) -> int:
    geo = Geometry(args.d, args.M)
    res = critical_mu(args.J, args.alpha, args.tol, geometry=geo)
    out = _out_dir(args)
    obj = {"J": args.J, "alpha": args.alpha, "tol": args.tol,
           "mu_c": "+inf" if res["mu_c"] == math.inf else res["mu_c"],
           "gibbs_at_mu_c": res["gibbs_at_mu_c"],
           "trace": res["trace"], "note": res["note"]}
    _write_json(out / "critical.json", obj)
    if res["gibbs_at_mu_c"] == "undecided":
        return EXIT_UNDECIDED
    return EXIT_OK


def _validation_matrix():
    g1, g2 = Geometry(1), Geometry(2)
    w1, w2 = block(0, 0), block(0, 0, 0)
    systems = [
        ("d1-const1-depth1", Homogeneous.constant(g1, 1.0, range(-1, 1)), w1, 1),
        ("d1-const1-depth2", Homogeneous.constant(g1, 1.0, range(-2, 1)), w1, 2),
        ("d1-const1-depth3", Homogeneous.constant(g1, 1.0, range(-3, 1)), w1, 3),
        ("d1-const05-depth2", Homogeneous.constant(g1, 0.5, range(-2, 1)), w1, 2),
        ("d1-graded-depth3", Homogeneous.from_values(
            g1, {0: 0.5, -1: 1.0, -2: 2.0, -3: 0.25}), w1, 3),
        ("d1-explicit-depth2", Explicit.from_values(
            g1, {block(0, 0): 0.3, block(-1, 0): 1.5, block(-1, 1): 0.2,
                 block(-2, 0): 0.8, block(-2, 3): 2.0}), w1, 2),
        ("d1-design-depth2", EffectiveDesign.from_values(
            g1, {0: 1.0, -1: 0.5, -2: 0.25}), w1, 2),
        ("d1-shifted-window", Homogeneous.constant(g1, 1.0, range(-3, 0)),
         block(-1, 1), 2),
        ("d2-const1-depth1", Homogeneous.constant(g2, 1.0, range(-1, 1)), w2, 1),
        ("d2-const07-depth1", Homogeneous.constant(g2, 0.7, range(-1, 1)), w2, 1),
        ("d1-graded-depth2", Homogeneous.from_values(
            g1, {0: 1.0, -1: 0.5, -2: 0.1}), w1, 2),
        ("d2-explicit-depth1", Explicit.from_values(
            g2, {block(0, 0, 0): 0.4, block(-1, 0, 0): 1.2,
                 block(-1, 1, 1): 0.6}), w2, 1),
    ]
    return systems


def run_validation_suite(tol: float = 1e-12) -> dict:
    results = []
    ok = True
    for name, model, window, depth in _validation_matrix():
        dist = enumerate_system(model, window, depth)
        ratios = gibbs_ratio_function(model, window, depth)
        checks = [verify_gnz(dist, model), verify_topdown(dist, ratios)]
        if len(dist.support) <= 5000:
            checks.append(verify_hierarchical_formula(dist, ratios))
        worst = max(c["max_residual"] for c in checks)
        passed = worst < tol
        ok = ok and passed
        results.append({"system": name, "max_residual": worst,
                        "passed": passed,
                        "checks": [{k: c[k] for k in
                                    ("check", "max_residual", "worst_case_block",
                                     "worst_case_event")} for c in checks]})
    # sensitivity: a perturbed ratio function must be detected
    g1, w1 = Geometry(1), block(0, 0)
    m = Homogeneous.constant(g1, 1.0, range(-2, 1))
    dist = enumerate_system(m, w1, 2)
    base = gibbs_ratio_function(m, w1, 2)
    perturbed = lambda b: min(base(b) + (0.1 if b.scale == -1 and b.index == (0,) else 0.0), 1.0)
    sens = verify_topdown(dist, perturbed)
    sens_ok = sens["max_residual"] > 0.01
    ok = ok and sens_ok
    results.append({"system": "sensitivity-perturbed-ratio",
                    "max_residual": sens["max_residual"],
                    "passed": sens_ok, "expected": "residual > 0.01"})
    # the fractal-percolation violation: expected failure of the balance
    mrep = mandelbrot_gnz_report(0.5, g1, w1, 2)
    viol_ok = mrep["top_block_residual"] >= 0.1
    ok = ok and viol_ok
    results.append({"system": "mandelbrot-p05-depth2",
                    "max_residual": mrep["max_residual"],
                    "top_block_residual": mrep["top_block_residual"],
                    "passed": viol_ok,
                    "expected": "violation detected (EXPECTED pass)"})
    return {"passed": ok, "tolerance": tol, "systems": results}


def cmd_validate(args) -> int:
    out = _out_dir(args)
    report = run_validation_suite(tol=args.tol)
    _write_json(out / "validate.json", report)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def cmd_diagnose(args) -> int:
    out = _out_dir(args)
    if args.model:
        models = [("model", load_model(args.model))]
    else:
        g1 = Geometry(1)
        models = [
            ("fragmentation-unit", Homogeneous.from_values(
                g1, {0: 1.0}, tail_down=TailRule("geometric", 1.0))),
            ("condensation-design", EffectiveDesign.from_values(
                g1, {0: 1.0}, zhat_tail_up=TailRule("geometric", 1.0))),
        ]
    code = EXIT_OK
    for name, model in models:
        geo = model.geometry
        report = existence_report(model)
        _write_json(out / f"{name}.existence.json", report.to_json_obj())
        origin = Block(0, (0,) * geo.d)
        if report.verdict == "fragmentation":
            rows = fragmentation_table(model, origin, list(range(0, args.depth + 1)))
            _write_csv(out / f"{name}.fragmentation.csv", rows)
        elif report.verdict == "condensation":
            windows = [Block(j, (0,) * geo.d) for j in range(0, 13)]
            rows = condensation_table(model, origin, windows)
            _write_csv(out / f"{name}.condensation.csv", rows)
        elif report.verdict == "undecided":
            code = EXIT_UNDECIDED
    return code


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiercubes",
        description="Hierarchical-cubes hard-core gas: analytics, sampling, "
                    "enumeration, rendering.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, seed=False):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", default="csv,json",
                       help="comma list of csv,json,svg")
        p.add_argument("--tol", type=float, default=1e-12)
        if seed:
            p.add_argument("--seed", type=int, required=True,
                           help="root seed (mandatory for sampling)")

    p = sub.add_parser("analyze", help="existence report, pressure, scale tables")
    common(p)
    p.add_argument("--jmax", type=int, default=64)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("sample", help="draw configurations, optional SVG")
    common(p, seed=True)
    p.add_argument("--window", required=True, help="window block 'j:(m,...)'")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--infinite", action="store_true",
                   help="sample the infinite-volume measure through the window")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("correlate", help="covariance and decay tables")
    common(p, seed=True)
    p.add_argument("--window", required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--jmax", type=int, default=20)
    p.set_defaults(fn=cmd_correlate)

    p = sub.add_parser("critical", help="critical chemical potential bisection")
    common(p, model=False)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--M", type=int, default=2)
    p.set_defaults(fn=cmd_critical)

    p = sub.add_parser("validate", help="verifier suite over built-in systems")
    common(p, model=False)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("diagnose", help="fragmentation/condensation tables")
    common(p, model=False)
    p.add_argument("--model", help="model JSON file (defaults to built-ins)")
    p.add_argument("--depth", type=int, default=8)
    p.set_defaults(fn=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.tol <= 0:
        print("tol must be > 0", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
