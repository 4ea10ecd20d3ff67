"""Flow-level Monte-Carlo of end-to-end success and goodput, and scaling-slope fits.

Each (n, replication) unit builds its own tessellation, deployment, routes and schedule from
RNG streams derived from (seed, n, replication, stream), so policies share geometry and
serial and parallel runs agree bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy
from scipy import stats

from . import __version__, analysis, kernels
from .config import ExperimentConfig
from .deployment import NodeSet, assign_destinations, deploy, max_injection_rate
from .phy import LinkModel, PhyParams, hop_log_success
from .routing import (RouteBatch, Route, interior_hop_mask, random_valid_routes, straight_line_routes,
                      validate_route)
from .scheduling import (Schedule, ScheduleParams, build_pi1, build_pi2, exclusion_radius, max_degree_bound,
                         verify_schedule, worst_case_interference_bound)
from .sphere import SphereParams
from .tessellation import CellGeometry, Tessellation, build_tessellation

REPORT_SCHEMA_VERSION = 1
STREAMS = {"tess": 0, "deploy": 1, "dest": 2, "routes": 3, "sample": 4, "sim": 5}
Z95 = 1.959963984540054

CSV_COLUMNS = (
    "config_hash", "policy", "alpha", "n", "rep", "status", "n_cells", "rho_n", "num_colors", "fallback",
    "lambda_n", "max_cell_load", "c5_measured", "connections", "dropped", "mean_hops", "mean_success",
    "success_ci", "delivered_rate", "wilson_lo", "wilson_hi", "goodput", "goodput_ci", "frac_loss_gt_eps",
    "occupancy_ok", "route_violations", "lemma1_checked", "lemma1_excluded", "lemma1_violations",
    "lemma2_violations", "lemma3_violations", "schedule_violations", "k_above_vn", "sinr_hops",
    "sinr_below_ln_n", "interference_above_bound", "upper_pi1", "lower_pi2",
)


def stream(seed: int, n: int, rep: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(n), int(rep), STREAMS[name])))


def wilson_interval(k: float, m: int, z: float = Z95) -> tuple[float, float]:
    if m == 0:
        return 0.0, 1.0
    p = k / m
    den = 1 + z * z / m
    mid = (p + z * z / (2 * m)) / den
    half = z * math.sqrt(p * (1 - p) / m + z * z / (4 * m * m)) / den
    # the interval touches 0 (1) exactly when k = 0 (k = m); pin it against rounding
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == m else min(1.0, mid + half)
    return lo, hi


# -------------------------------------------------------------- per-connection simulation

@dataclass
class HopOutcome:
    """Per-hop results of one simulated slot for every hop of a route batch."""
    sinr: np.ndarray
    log_success: np.ndarray
    interference: np.ndarray     # unit-power interference sum
    nearest: np.ndarray          # nearest same-slot transmitter distance


@dataclass
class ConnectionOutcome:
    success_prob: float          # product over hops of the per-hop success probability
    delivered: bool              # sampled end-to-end Bernoulli outcome
    sinr: np.ndarray


def simulate_hops(batch: RouteBatch, sched: Schedule, lm: LinkModel, pp: PhyParams, ns: NodeSet,
                  t: Tessellation, rng: np.random.Generator) -> HopOutcome:
    """SINR of every hop with all other same-colour cells transmitting from a uniform node."""
    col = np.ascontiguousarray(sched.color_of[batch.hop_tx_cell])
    color_ptr, color_cells = sched.color_classes()
    u = rng.random(int(np.diff(color_ptr)[col].sum()))
    total, nearest = kernels.hop_interference(
        ns.positions, ns.cell_ptr, ns.cell_nodes, color_ptr, color_cells, col,
        np.ascontiguousarray(batch.hop_tx_cell), np.ascontiguousarray(batch.hop_rx_node), u,
        t.sp.radius, pp.alpha)
    d = batch.hop_length
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = pp.noise_n / pp.power_p + total
        sinr = np.where(denom > 0, d ** -pp.alpha / np.where(denom > 0, denom, 1.0), np.inf)
    return HopOutcome(sinr, hop_log_success(sinr, lm), total, nearest)


def connection_success(batch: RouteBatch, hops: HopOutcome, rng: np.random.Generator):
    """(product-form success probability, sampled delivery indicator) per connection."""
    owner = np.repeat(np.arange(len(batch)), batch.hops)
    logp = np.bincount(owner, weights=hops.log_success, minlength=len(batch))
    hop_ok = rng.random(hops.log_success.shape[0]) < np.exp(hops.log_success)
    failed = np.bincount(owner[~hop_ok], minlength=len(batch))
    return np.exp(logp), failed == 0


def simulate_connection(r: Route, s: Schedule, lm: LinkModel, pp: PhyParams, ns: NodeSet,
                        t: Tessellation, rng: np.random.Generator) -> ConnectionOutcome:
    batch = RouteBatch.from_routes([r], ns, r.rho_n, r.kind)
    hops = simulate_hops(batch, s, lm, pp, ns, t, rng)
    p, ok = connection_success(batch, hops, rng)
    return ConnectionOutcome(float(p[0]), bool(ok[0]), hops.sinr)


# -------------------------------------------------------------- one (n, replication) unit

def cell_loads(batch: RouteBatch, n_cells: int) -> np.ndarray:
    """Number of connections that transmit from each cell."""
    owner = np.repeat(np.arange(len(batch)), batch.hops)
    key = np.unique(owner * n_cells + batch.hop_tx_cell)
    return np.bincount(key % n_cells, minlength=n_cells)


def _build_schedule(cfg: ExperimentConfig, t: Tessellation, n: int) -> Schedule:
    if cfg.policy == "pi1":
        return build_pi1(t, ScheduleParams(cfg.pi1_range_mult))
    return build_pi2(t, n, cfg.alpha, cfg.beta_n, cfg.r_form)


def run_unit(cfg: ExperimentConfig, n: int, rep: int) -> dict:
    row = {c: "" for c in CSV_COLUMNS}
    row.update(config_hash=cfg.config_hash(), policy=cfg.policy, alpha=cfg.alpha, n=n, rep=rep)
    try:
        row.update(_run_unit(cfg, n, rep))
        row["status"] = "ok"
    except Exception as e:  # recorded per replication; the experiment carries on
        row["status"] = f"error: {type(e).__name__}: {e}"
    return row


def _run_unit(cfg: ExperimentConfig, n: int, rep: int) -> dict:
    sp = SphereParams(n)
    cg = CellGeometry(n, cfg.rho_n(n))
    rho = cg.rho_n
    t = build_tessellation(sp, cg, stream(cfg.seed, n, rep, "tess"), max_rejections=cfg.max_rejections,
                           min_cells=cfg.min_cells)
    ns = deploy(n, t, stream(cfg.seed, n, rep, "deploy"))
    tm = assign_destinations(ns, stream(cfg.seed, n, rep, "dest"), lambda_n=1.0, cap=False)
    sched = _build_schedule(cfg, t, n)
    K = sched.num_colors
    lm, pp = cfg.link_model(), cfg.phy_params()

    src_all = np.arange(n)
    rrng = stream(cfg.seed, n, rep, "routes")
    if cfg.routing == "straight":
        everything = straight_line_routes(src_all, tm.dest_of, ns, t, rrng)
    else:
        everything = random_valid_routes(src_all, tm.dest_of, ns, t, rrng, greed=cfg.greed)
    loads = cell_loads(everything, t.n_cells)
    max_load = int(loads.max())

    if cfg.lambda_mode == "lemma4-cap":
        lam = max_injection_rate(n)
    elif cfg.lambda_mode == "fixed":
        lam = cfg.lambda_fixed
    else:
        lam = cfg.bandwidth_w / max_load

    m = min(cfg.connections, len(everything))
    pick = np.sort(stream(cfg.seed, n, rep, "sample").choice(len(everything), size=m, replace=False))
    batch = _subset(everything, pick)
    srng = stream(cfg.seed, n, rep, "sim")
    hops = simulate_hops(batch, sched, lm, pp, ns, t, srng)
    p, delivered = connection_success(batch, hops, srng)

    mean_p = float(p.mean())
    se_p = float(p.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    lo, hi = wilson_interval(float(delivered.sum()), m)
    goodput = lam / K * mean_p

    # bound checks
    L = batch.straight_length
    H = batch.hops
    route_viol = sum(bool(validate_route(batch.route(k), t)) for k in range(len(batch)))
    lemma1_mask = L >= 16 * rho
    lo1, hi1 = analysis.lemma1_bounds(L, rho)
    long_hops = np.bincount(np.repeat(np.arange(len(batch)), H)[batch.hop_length >= 0.01 * rho],
                            minlength=len(batch))
    if cfg.routing == "straight":
        l1_viol = int(((H < lo1) | (H > hi1))[lemma1_mask].sum())
        l2_viol = int((long_hops < analysis.lemma2_bound(L, rho, 0.01))[lemma1_mask].sum())
    else:
        l1_viol = l2_viol = 0

    lemma3_viol = 0
    if cfg.policy == "pi1":
        M = 64.0 * (1 + sched.c1)
        inner = interior_hop_mask(batch)
        owner = np.repeat(np.arange(len(batch)), H)
        gap = inner & (hops.nearest > (M + 8) * rho)
        Ni = np.bincount(owner[gap], minlength=len(batch))
        length = L if cfg.routing == "straight" else np.bincount(owner, weights=batch.hop_length,
                                                                 minlength=len(batch))
        lemma3_viol = int((Ni > length / rho * 2 * (1 + sched.c1) / M + 1e-9).sum())

    sched_viol = k_above = sinr_below = interf_above = 0
    lower = upper = math.nan
    if cfg.policy == "pi2":
        R_true = exclusion_radius(n, cfg.alpha, rho, cfg.beta_n, "proof")
        sched_viol = len(verify_schedule(sched, t, R_true))
        k_above = int(K > max_degree_bound(n, cfg.alpha, cfg.beta_n) + 1)
        beta_n = math.log(n) if cfg.beta_n is None else cfg.beta_n
        sinr_below = int((hops.sinr < beta_n).sum())
        bound = worst_case_interference_bound(R_true, cfg.alpha, 1.0, rho)
        interf_above = int((hops.interference > bound * (1 + 1e-12)).sum())
        lower = analysis.throughput_lower_pi2(n, cfg.alpha, cfg.epsilon, cfg.bandwidth_w, cfg.c5)
    else:
        consts = analysis.AnalysisConstants.build(cfg.alpha, sched.c1, rho, kappa=lm.kappa, epsilon=cfg.epsilon)
        upper = analysis.throughput_upper_pi1_log(lam, n, rho, consts.log_phi_beta0)

    return dict(
        n_cells=t.n_cells, rho_n=rho, num_colors=K, fallback=int(sched.fallback), lambda_n=lam,
        max_cell_load=max_load, c5_measured=max_load / math.sqrt(n * math.log(n)), connections=m,
        dropped=len(everything.dropped), mean_hops=float(H.mean()), mean_success=mean_p,
        success_ci=Z95 * se_p, delivered_rate=float(delivered.mean()), wilson_lo=lo, wilson_hi=hi,
        goodput=goodput, goodput_ci=lam / K * Z95 * se_p,
        frac_loss_gt_eps=float((1 - p > cfg.epsilon).mean()), occupancy_ok=int(ns.min_occupancy_ok()),
        route_violations=route_viol, lemma1_checked=int(lemma1_mask.sum()),
        lemma1_excluded=int((~lemma1_mask).sum()), lemma1_violations=l1_viol, lemma2_violations=l2_viol,
        lemma3_violations=lemma3_viol, schedule_violations=sched_viol, k_above_vn=k_above,
        sinr_hops=int(H.sum()), sinr_below_ln_n=sinr_below, interference_above_bound=interf_above,
        upper_pi1=upper, lower_pi2=lower,
    )


def _subset(b: RouteBatch, pick: np.ndarray) -> RouteBatch:
    hops = b.hops[pick]
    hop_idx = np.concatenate([np.arange(b.hop_ptr[k], b.hop_ptr[k + 1]) for k in pick]) if pick.size else \
        np.empty(0, dtype=np.int64)
    cell_idx = np.concatenate([np.arange(b.cell_ptr[k], b.cell_ptr[k + 1]) for k in pick]) if pick.size else \
        np.empty(0, dtype=np.int64)
    hop_ptr = np.zeros(pick.size + 1, dtype=np.int64)
    np.cumsum(hops, out=hop_ptr[1:])
    cell_ptr = np.zeros(pick.size + 1, dtype=np.int64)
    np.cumsum(np.diff(b.cell_ptr)[pick], out=cell_ptr[1:])
    return RouteBatch(b.connection_ids[pick], b.src[pick], b.dst[pick], b.straight_length[pick], hop_ptr,
                      b.hop_tx_node[hop_idx], b.hop_rx_node[hop_idx], b.hop_tx_cell[hop_idx],
                      b.hop_length[hop_idx], cell_ptr, b.cells[cell_idx], b.rho_n, b.kind, dict(b.dropped))


# -------------------------------------------------------------- experiment

@dataclass
class SimReport:
    config: dict
    config_hash: str
    rows: list
    per_n: list = field(default_factory=list)
    slope: dict | None = None
    manifest: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": "adhoc_capacity.simreport", "version": REPORT_SCHEMA_VERSION,
                "config_hash": self.config_hash, "config": self.config, "per_n": self.per_n,
                "slope": self.slope, "rows": self.rows, "manifest": self.manifest}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SimReport":
        if d.get("schema") != "adhoc_capacity.simreport":
            raise ValueError("not a simulation report")
        if d.get("version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"report schema version {d.get('version')} is not {REPORT_SCHEMA_VERSION}")
        return cls(d["config"], d["config_hash"], d["rows"], d["per_n"], d["slope"], d.get("manifest", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def aggregate(rows: list, n_grid) -> list:
    out = []
    for n in n_grid:
        ok = [r for r in rows if r["n"] == n and r["status"] == "ok"]
        rec = {"n": n, "replications_ok": len(ok), "errors": sum(r["n"] == n for r in rows) - len(ok)}
        for key in ("mean_success", "goodput", "num_colors", "max_cell_load", "lambda_n", "c5_measured",
                    "frac_loss_gt_eps", "upper_pi1", "lower_pi2", "n_cells"):
            vals = np.array([float(r[key]) for r in ok]) if ok else np.array([math.nan])
            rec[key] = float(vals.mean())
            if key in ("mean_success", "goodput"):
                if len(ok) > 1:
                    rec[key + "_ci"] = float(Z95 * vals.std(ddof=1) / math.sqrt(len(ok)))
                else:
                    rec[key + "_ci"] = float(ok[0][key.replace("mean_", "") + "_ci"]) if ok else math.nan
        for key in ("lemma1_violations", "lemma2_violations", "lemma3_violations", "route_violations",
                    "schedule_violations", "k_above_vn", "sinr_hops", "sinr_below_ln_n",
                    "interference_above_bound", "dropped"):
            rec[key] = int(sum(int(r[key]) for r in ok))
        out.append(rec)
    return out


def fit_scaling_slope(report_or_points, key: str = "goodput") -> dict:
    """Least-squares slope of ln(value) against ln(n), with its standard error and 95% CI."""
    if isinstance(report_or_points, SimReport):
        pts = [(r["n"], r[key]) for r in report_or_points.per_n]
    else:
        pts = list(report_or_points)
    pts = [(float(n), float(v)) for n, v in pts if v is not None and np.isfinite(v) and v > 0]
    if len({n for n, _ in pts}) < 3:
        raise ValueError("a slope fit needs at least 3 distinct grid points with positive values")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    res = stats.linregress(x, y)
    half = stats.t.ppf(0.975, len(pts) - 2) * res.stderr if len(pts) > 2 else math.inf
    return {"slope": float(res.slope), "stderr": float(res.stderr), "ci_low": float(res.slope - half),
            "ci_high": float(res.slope + half), "intercept": float(res.intercept), "points": len(pts)}


def _unit(args):
    cfg, n, rep = args
    return run_unit(cfg, n, rep)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> SimReport:
    units = [(cfg, n, rep) for n in cfg.n_grid for rep in range(cfg.replications)]
    if jobs > 1 and len(units) > 1:
        # largest n first keeps the pool busy; results are re-sorted below
        order = sorted(range(len(units)), key=lambda i: -units[i][1])
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            done = list(ex.map(_unit, [units[i] for i in order]))
        rows = [None] * len(units)
        for i, r in zip(order, done):
            rows[i] = r
    else:
        rows = [run_unit(*u) for u in units]
    per_n = aggregate(rows, cfg.n_grid)
    try:
        slope = fit_scaling_slope([(r["n"], r["goodput"]) for r in per_n])
    except ValueError:
        slope = None
    return SimReport(cfg.to_dict(), cfg.config_hash(), rows, per_n, slope, manifest(cfg))


def manifest(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed, "package_version": __version__,
            "kernel_backend": kernels.BACKEND, "python": sys.version.split()[0], "numpy": np.__version__,
            "scipy": scipy.__version__, "platform": platform.machine()}
