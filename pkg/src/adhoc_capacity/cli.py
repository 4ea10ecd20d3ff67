"""Command-line entry point: ``adhoc-capacity {run,analyze,verify,report}``.

Exit codes: 0 success, 1 validation failure (bad config or a violated property),
2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

from . import analysis
from .config import ConfigError, ExperimentConfig
from .scheduling import exclusion_radius, max_degree_bound, required_sinr

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _n_grid(text: str) -> tuple:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "^" in tok:
            base, exp = tok.split("^")
            out.append(int(base) ** int(exp))
        else:
            out.append(int(float(tok)))
    return tuple(out)


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _link_override(text: str) -> dict:
    """'kind' or 'kind:value', the value being beta, kappa or p_fixed for the respective kind."""
    kind, _, value = text.partition(":")
    d = {"kind": kind}
    if value:
        d[{"threshold": "beta", "continuous": "kappa", "fixed": "p_fixed"}.get(kind, "kind")] = float(value)
    return d


def default_config_path() -> Path:
    return Path(str(resources.files("adhoc_capacity") / "configs" / "default.yaml"))


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_yaml(args.config or default_config_path())
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "n_grid", None):
        over["n_grid"] = _n_grid(args.n_grid)
    if getattr(args, "policy", None):
        over["policy"] = args.policy
    if getattr(args, "alpha", None):
        over["alpha"] = _float_list(args.alpha)[0]
    if getattr(args, "link_model", None):
        over["link"] = _link_override(args.link_model)
    if getattr(args, "epsilon", None):
        over["epsilon"] = _float_list(args.epsilon)[0]
    return cfg.with_overrides(**over) if over else cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -------------------------------------------------------------- subcommands

def cmd_run(args) -> int:
    from .sim import run_experiment
    cfg = load_config(args)
    rep = run_experiment(cfg, jobs=args.jobs)
    out = Path(args.out)
    _write(out / "report.json", rep.to_json())
    _write(out / "results.csv", rep.to_csv())
    _write(out / "manifest.json", json.dumps({**rep.manifest, "config": cfg.to_dict(),
                                              "files": ["report.json", "results.csv"]}, indent=1, sort_keys=True))
    errors = [r for r in rep.rows if r["status"] != "ok"]
    for r in errors:
        print(f"n={r['n']} rep={r['rep']}: {r['status']}", file=sys.stderr)
    slope = rep.slope["slope"] if rep.slope else math.nan
    print(f"{len(rep.rows)} units, {len(errors)} errors, goodput slope {slope:.4f}, config {rep.config_hash}")
    return EXIT_OK


ANALYZE_COLUMNS = ("n", "alpha", "epsilon", "rho_n", "beta_n", "R_n", "V_n", "K_n", "max_injection_rate",
                   "per_link_budget", "t0", "M0", "beta0", "beta1", "log_phi_beta0", "E_delta_L",
                   "upper_pi1", "lower_pi2", "pi2_envelope")


def analyze_rows(cfg: ExperimentConfig, alphas, epsilons, c1: float) -> list[dict]:
    rows = []
    for n in cfg.n_grid:
        rho = cfg.rho_n(n)
        for a in alphas:
            for eps in epsilons:
                c = analysis.AnalysisConstants.build(a, c1, rho, kappa=cfg.link["kappa"], epsilon=eps)
                lam = 1.0 / (50 * math.log(n))
                V = max_degree_bound(n, a)
                rows.append({
                    "n": n, "alpha": a, "epsilon": eps, "rho_n": rho, "beta_n": required_sinr(n),
                    "R_n": exclusion_radius(n, a, rho), "V_n": V, "K_n": V + 1, "max_injection_rate": lam,
                    "per_link_budget": analysis.per_link_loss_budget(eps, n, rho), "t0": c.t0, "M0": c.M0,
                    "beta0": c.beta0, "beta1": c.beta1, "log_phi_beta0": c.log_phi_beta0,
                    "E_delta_L": analysis.expected_delta_L(c.delta, n),
                    "upper_pi1": analysis.throughput_upper_pi1_log(lam, n, rho, c.log_phi_beta0),
                    "lower_pi2": analysis.throughput_lower_pi2(n, a, eps, cfg.bandwidth_w, cfg.c5),
                    "pi2_envelope": analysis.pi2_envelope(n, a),
                })
    return rows


def cmd_analyze(args) -> int:
    cfg = load_config(argparse.Namespace(**{**vars(args), "alpha": None, "epsilon": None}))
    alphas = _float_list(args.alpha) if args.alpha else [cfg.alpha]
    epsilons = _float_list(args.epsilon) if args.epsilon else [cfg.epsilon]
    rows = analyze_rows(cfg, alphas, epsilons, args.c1)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=("config_hash",) + ANALYZE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({"config_hash": cfg.config_hash(), **{k: repr(v) if isinstance(v, float) else v
                                                        for k, v in r.items()}})
    _write(Path(args.out) / "analysis.csv", buf.getvalue())
    print(f"{len(rows)} rows written to {Path(args.out) / 'analysis.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suites, suites_to_dict
    cfg = load_config(args)
    results = run_suites(cfg)
    doc = {"config_hash": cfg.config_hash(), **suites_to_dict(results)}
    _write(Path(args.out) / "verify.json", json.dumps(doc, indent=1, sort_keys=True, default=str))
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} ({r.checks} checks)")
        for f in r.failures[:10]:
            print(f"  {r.name}: {json.dumps(f, default=str)}", file=sys.stderr)
    return EXIT_OK if doc["passed"] else EXIT_INVALID


def merge_reports(reports: list) -> tuple[list[str], list[list], list[str]]:
    """Comparison table over the union of grid points; returns (header, rows, warnings)."""
    warnings = []
    alphas = {r.config["alpha"] for r in reports}
    if len(alphas) > 1:
        warnings.append(f"reports mix alpha values {sorted(alphas)}; columns are labelled by alpha")
    labels = [f"{r.config['policy']}_a{r.config['alpha']:g}_{r.config_hash[:8]}" for r in reports]
    ns = sorted({p["n"] for r in reports for p in r.per_n})
    header = ["n"] + [f"goodput_{lab}" for lab in labels]
    if len(reports) == 2:
        header.append(f"ratio_{labels[1]}_over_{labels[0]}")
    header += [f"lower_pi2_a{a:g}" for a in sorted(alphas)]
    rows = []
    for n in ns:
        vals = []
        for r in reports:
            p = next((p for p in r.per_n if p["n"] == n), None)
            vals.append(p["goodput"] if p else math.nan)
        row = [n] + vals
        if len(reports) == 2:
            row.append(vals[1] / vals[0] if vals[0] else math.nan)
        eps = reports[0].config["epsilon"]
        row += [analysis.throughput_lower_pi2(n, a, eps) for a in sorted(alphas)]
        rows.append(row)
    slope_row = ["slope"] + [r.slope["slope"] if r.slope else math.nan for r in reports]
    if len(reports) == 2:
        slope_row.append("")
    rows.append(slope_row + [""] * len(alphas))
    return header, rows, warnings


def cmd_report(args) -> int:
    from .sim import SimReport
    reports = []
    for p in args.reports:
        try:
            reports.append(SimReport.from_dict(json.loads(Path(p).read_text())))
        except ValueError as e:
            raise ConfigError(f"{p}: {e}") from None
    header, rows, warnings = merge_reports(reports)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config_hashes"] + [";".join(r.config_hash for r in reports)])
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    _write(Path(args.out) / "comparison.csv", buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


# -------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adhoc-capacity", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=True):
        sp.add_argument("--config", help="YAML experiment configuration")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int)
        if grid:
            sp.add_argument("--n-grid", help="comma list, e.g. 1024,2048 or 2^10,2^11")
            sp.add_argument("--policy", choices=("pi1", "pi2"))
            sp.add_argument("--alpha")
            sp.add_argument("--link-model", help="threshold[:beta] | continuous[:kappa] | fixed[:p]")
            sp.add_argument("--epsilon")

    r = sub.add_parser("run", help="run a Monte-Carlo experiment")
    common(r)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="tabulate closed-form quantities over (n, alpha, epsilon)")
    common(a)
    a.add_argument("--c1", type=float, default=4.0, help="pi1 colour constant used for beta0")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="run the property suites")
    common(v)
    v.set_defaults(func=cmd_verify)

    rp = sub.add_parser("report", help="merge simulation reports into a comparison table")
    rp.add_argument("reports", nargs="+")
    rp.add_argument("--out", default="out")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
