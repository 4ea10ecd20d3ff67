"""Property suites run by ``adhoc-capacity verify`` at the scale of a given configuration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis
from .config import ExperimentConfig
from .deployment import assign_destinations, deploy
from .routing import long_hop_count, max_short_hop_run, random_valid_routes, straight_line_routes, validate_route
from .scheduling import (ScheduleParams, build_pi1, build_pi2, exclusion_factor, exclusion_radius,
                         max_degree_bound, verify_schedule)
from .sim import _subset, simulate_hops, stream
from .sphere import SphereParams, angles, cap_area, pair_distance_cdf, sample_uniform_units
from .tessellation import CellGeometry, build_tessellation, verify_tessellation


@dataclass
class SuiteResult:
    name: str
    passed: bool = True
    checks: int = 0
    failures: list = field(default_factory=list)

    def fail(self, **info):
        self.passed = False
        if len(self.failures) < 50:
            self.failures.append(info)


def geometry_suite(rng: np.random.Generator) -> SuiteResult:
    res = SuiteResult("sphere-geometry")
    a, b, c = (sample_uniform_units(rng, 10_000) for _ in range(3))
    ab, bc, ac = angles(a, b), angles(b, c), angles(a, c)
    res.checks += 2
    if np.any(ab != angles(b, a)):
        res.fail(check="symmetry")
    if np.any(ac > (ab + bc) * (1 + 1e-9)):
        res.fail(check="triangle inequality", count=int((ac > (ab + bc) * (1 + 1e-9)).sum()))
    for n in np.geomspace(10, 1e7, 10):
        s = SphereParams(float(n))
        for rho in np.geomspace(1e-3, s.half_circumference / 2, 100):
            res.checks += 1
            area = cap_area(rho, s)
            if not math.pi * rho ** 2 / 2 <= area <= math.pi * rho ** 2 * (1 + 1e-12):
                res.fail(check="cap area bounds", n=float(n), rho=float(rho), area=area)
            if not math.isclose(area / s.area_n, pair_distance_cdf(rho, s), rel_tol=1e-15):
                res.fail(check="cap area / n vs pair cdf", n=float(n), rho=float(rho))
    return res


def _instance(cfg: ExperimentConfig, n: int):
    sp = SphereParams(n)
    cg = CellGeometry(n, cfg.rho_n(n))
    t = build_tessellation(sp, cg, stream(cfg.seed, n, 0, "tess"), max_rejections=cfg.max_rejections,
                           min_cells=cfg.min_cells)
    ns = deploy(n, t, stream(cfg.seed, n, 0, "deploy"))
    tm = assign_destinations(ns, stream(cfg.seed, n, 0, "dest"), lambda_n=1.0, cap=False)
    return sp, cg, t, ns, tm


def run_suites(cfg: ExperimentConfig, routes_per_n: int = 2000, sinr_hops: int = 10_000) -> list[SuiteResult]:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, 0, 99)))
    out = [geometry_suite(rng)]
    tess = SuiteResult("tessellation")
    routing = SuiteResult("routing")
    sched = SuiteResult("scheduling")
    sinr = SuiteResult("pi2-sinr-guarantee")
    formulas = SuiteResult("analysis")
    pi1_k = []
    lm, pp = cfg.link_model(), cfg.phy_params()
    for n in cfg.n_grid:
        sp, cg, t, ns, tm = _instance(cfg, n)
        rho = cg.rho_n
        rep = verify_tessellation(t, cg)
        tess.checks += 1
        if not rep.ok:
            tess.fail(n=n, violations=rep.violations[:5])
        rows = np.repeat(np.arange(t.n_cells), np.diff(t.nbr_ptr))
        tess.checks += 1
        if np.any(rows == t.nbr_idx) or not all(t.are_adjacent(int(j), int(i)) for i, j in zip(rows, t.nbr_idx)):
            tess.fail(n=n, check="adjacency symmetric and irreflexive")
        tess.checks += 1
        probe = sample_uniform_units(rng, 2000)
        if np.any(t.locate_units(probe) != np.argmax(probe @ t.generators.T, axis=1)):
            tess.fail(n=n, check="locate_cell vs linear scan")

        m = min(routes_per_n, n)
        src = rng.choice(n, size=m, replace=False)
        b = straight_line_routes(src, tm.dest_of[src], ns, t, stream(cfg.seed, n, 0, "routes"))
        for k in range(len(b)):
            r = b.route(k)
            routing.checks += 1
            v = validate_route(r, t)
            if v:
                routing.fail(n=n, route=k, violations=v[:3])
            if r.straight_length < 16 * rho:
                continue
            lo, hi = analysis.lemma1_bounds(r.straight_length, rho)
            if not lo <= r.hops <= hi:
                routing.fail(n=n, check="lemma1", L=r.straight_length, H=r.hops)
            for tf in (0.01, 0.05):
                if long_hop_count(r, tf) < analysis.lemma2_bound(r.straight_length, rho, tf):
                    routing.fail(n=n, check="lemma2", t=tf, L=r.straight_length)
        arb = random_valid_routes(src[:200], tm.dest_of[src[:200]], ns, t, stream(cfg.seed, n, 1, "routes"),
                                  greed=cfg.greed)
        for k in range(len(arb)):
            r = arb.route(k)
            routing.checks += 1
            if validate_route(r, t) or max_short_hop_run(r) >= 40:
                routing.fail(n=n, check="arbitrary route", route=k)

        s1 = build_pi1(t, ScheduleParams(cfg.pi1_range_mult))
        pi1_k.append(s1.num_colors)
        s2 = build_pi2(t, n, cfg.alpha, cfg.beta_n, cfg.r_form)
        R_proof = exclusion_radius(n, cfg.alpha, rho, cfg.beta_n, "proof")
        sched.checks += 3
        if verify_schedule(s1, t, s1.exclusion_radius):
            sched.fail(n=n, check="pi1 proper")
        if s2.num_colors > max_degree_bound(n, cfg.alpha, cfg.beta_n) + 1:
            sched.fail(n=n, check="pi2 K <= V_n + 1", K=s2.num_colors)
        if verify_schedule(s2, t, s2.exclusion_radius):
            sched.fail(n=n, check="pi2 proper at its own radius")

        sinr.checks += 2
        silent = verify_schedule(s2, t, R_proof)
        if silent:
            sinr.fail(n=n, check="cells within R_n silent", same_slot_pairs=len(silent), example=silent[:3])
        pick = rng.choice(len(b), size=min(len(b), max(1, sinr_hops // max(1, int(b.hops.mean())))),
                          replace=False)
        sub = _subset(b, np.sort(pick))
        hops = simulate_hops(sub, s2, lm, pp, ns, t, stream(cfg.seed, n, 0, "sim"))
        beta_n = math.log(n) if cfg.beta_n is None else cfg.beta_n
        frac = float((hops.sinr >= beta_n).mean())
        if frac < 0.999:
            sinr.fail(n=n, check="SINR >= beta_n on 99.9% of hops", fraction=frac)

        formulas.checks += 2
        x = exclusion_factor(n, cfg.alpha)
        if max_degree_bound(n, cfg.alpha) != 8.0 * x * x:
            formulas.fail(n=n, check="V_n identity")
        e = [analysis.expected_delta_L(d, n) for d in np.linspace(0.01, 1, 50)]
        if not (all(0 < v <= 1 for v in e) and all(a <= b for a, b in zip(e, e[1:]))):
            formulas.fail(n=n, check="E[delta^L] in (0,1] and increasing")
    sched.checks += 1
    if pi1_k and max(pi1_k) - min(pi1_k) > 1 and len(pi1_k) > 1:
        sched.fail(check="pi1 K constant across the grid within 1", K=pi1_k)
    return out + [tess, routing, sched, sinr, formulas]


def suites_to_dict(results: list[SuiteResult]) -> dict:
    return {"passed": all(r.passed for r in results), "suites": [asdict(r) for r in results]}
