"""Command-line front end.

    treeips <subcommand> [--config FILE] [flags]

Subcommands: duality, phase, potential, chain, converge, selftest.  Each
writes a JSON detail report, a CSV (or JSON) table and PNG figures into
--out.  Exit status: 0 all asserted contracts hold, 1 a contract failed,
2 invalid configuration.
"""
import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

log = logging.getLogger("treeips")

SUBCOMMANDS = ("duality", "phase", "potential", "chain", "converge", "selftest")

DEFAULTS = {
    "duality": dict(d=2, radius=8, lam=[0.7], delta=0.3, horizon=4.0, reps=2000),
    "phase": dict(d=2, radius=0, lam=[0.2, 0.637, 1.0], delta=0.0, horizon=30.0, reps=2000),
    "potential": dict(d=2, radius=6, lam=[0.637], delta=0.0, horizon=10.0, reps=2000),
    "chain": dict(d=2, radius=12, lam=[], delta=0.0, horizon=8.0, reps=1000),
    "converge": dict(d=2, radius=6, lam=[1.2], delta=0.3, horizon=20.0, reps=2000),
    "selftest": dict(d=2, radius=4, lam=[0.7], delta=0.3, horizon=2.0, reps=300),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    d: int = 2
    radius: int = 6
    lam: list = field(default_factory=list)
    delta: float = 0.0
    horizon: float = 10.0
    reps: int = 1000
    seed: int = 0
    out: str = "results"
    workers: int = 1
    format: str = "csv"
    theta_s: float = 0.02
    contamination_cap: float = 0.01

    def validate(self):
        errs = []
        if self.subcommand not in SUBCOMMANDS:
            errs.append("subcommand: unknown %r" % (self.subcommand,))
        if not isinstance(self.d, int) or self.d < 2:
            errs.append("d: must be an integer >= 2 (got %r)" % (self.d,))
        if self.subcommand == "potential" and self.d != 2:
            errs.append("d: the potential function is defined for d = 2 only")
        if not isinstance(self.radius, int) or self.radius < 0:
            errs.append("radius: must be a non-negative integer (got %r)" % (self.radius,))
        elif self.subcommand not in ("phase", "chain") and self.radius < 1:
            errs.append("radius: must be >= 1 for %s" % self.subcommand)
        if any((not isinstance(x, (int, float))) or x < 0 or not math.isfinite(x)
               for x in self.lam):
            errs.append("lam: rates must be finite and >= 0 (got %r)" % (self.lam,))
        if self.delta < 0:
            errs.append("delta: must be >= 0 (got %r)" % (self.delta,))
        if not self.horizon > 0:
            errs.append("horizon: must be > 0 (got %r)" % (self.horizon,))
        if not isinstance(self.reps, int) or self.reps < 1:
            errs.append("reps: must be a positive integer (got %r)" % (self.reps,))
        if self.seed < 0:
            errs.append("seed: must be >= 0")
        if self.workers < 1:
            errs.append("workers: must be >= 1")
        if self.format not in ("json", "csv"):
            errs.append("format: must be json or csv")
        if not 0 < self.theta_s < 1:
            errs.append("theta_s: must lie in (0, 1)")
        if errs:
            raise ConfigError("; ".join(errs))
        return self


def build_parser():
    p = argparse.ArgumentParser(prog="treeips", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--d", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--lambda", dest="lam", type=float, nargs="+")
    p.add_argument("--delta", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--theta-s", dest="theta_s", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(args):
    vals = dict(DEFAULTS[args.subcommand])
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError("config: cannot read %s (%s)" % (args.config, exc))
        known = {f.name for f in fields(RunConfig)}
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        extra = set(data) - known
        if extra:
            raise ConfigError("config: unknown fields %s" % sorted(extra))
        vals.update(data)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and f.name != "subcommand":
            vals[f.name] = v
    vals["subcommand"] = args.subcommand
    vals["lam"] = list(vals.get("lam", []))
    return RunConfig(**vals).validate()


# ---------------------------------------------------------------------------
# subcommands; each returns (contracts: dict name -> bool, outputs: list)


def _table(cfg, name, rows):
    from . import report
    path = os.path.join(cfg.out, name + "." + cfg.format)
    if cfg.format == "csv":
        return report.write_csv(path, asdict(cfg), rows)
    return report.write_json(path, asdict(cfg), rows)


def _detail(cfg, name, body):
    from . import report
    return report.write_json(os.path.join(cfg.out, name + ".json"), asdict(cfg), body)


def run_duality(cfg):
    from .duality import (monotonicity_check, attractiveness_check, parity_duality_battery,
                          pathwise_coalescing_check, statistical_duality, nu_bar_estimate)
    from .dynamics import ModelSpec
    from .plotting import plot_duality
    from .tree import build_ball
    tree = build_ball(cfg.d, cfg.radius)
    lam = cfg.lam[0] if cfg.lam else 0.7
    rng = np.random.default_rng(cfg.seed)
    inner = np.flatnonzero(tree.depth <= min(3, cfg.radius))
    fails = 0
    for r in range(cfg.reps):
        A = rng.choice(inner, size=int(rng.integers(1, 5)), replace=False)
        B = rng.choice(inner, size=int(rng.integers(1, 5)), replace=False)
        fails += not pathwise_coalescing_check(tree, lam, cfg.horizon, A, B, cfg.seed, r)
    spec = ModelSpec.contact(lam)
    sd = statistical_duality(tree, spec, {0}, {0}, 0.5, max(cfg.reps, 100), cfg.seed + 1)
    s1 = tree.spine(1)
    mono = monotonicity_check(tree, lam, lam + 0.5, {0}, {0, s1}, cfg.horizon,
                              min(cfg.reps, 1000), cfg.seed + 2)
    attr = attractiveness_check(tree, spec, {0}, {0, s1},
                                cfg.horizon, min(cfg.reps, 1000), cfg.seed + 3)
    nu = nu_bar_estimate(tree, lam, [0], cfg.horizon, min(cfg.reps, 1000), cfg.seed + 4,
                         grid=[1.0, cfg.horizon])
    battery = parity_duality_battery(build_ball(cfg.d, min(cfg.radius, 4)),
                                     max(cfg.reps, 100), cfg.seed + 5)
    rows = []
    for sem, tab in battery["table"].items():
        for i, r in enumerate(tab):
            rows.append(dict(label="%s #%d" % (sem, i + 1), semantics=sem, **r))
    contracts = {
        "pathwise_coalescing": fails == 0,
        "contact_statistical": sd.consistent,
        "monotone_coupling": mono == 0,
        "attractiveness": attr == 0,
        "nu_bar_monotone": bool(nu[0][0] >= nu[0][1] - 3 * nu[1][1]),
        "unique_voter_semantics": battery["selected"] == "reset_to_parity",
    }
    outs = [_table(cfg, "duality_battery", rows),
            _detail(cfg, "duality", dict(pathwise_failures=fails, pathwise_logs=cfg.reps,
                                         contact=sd.as_dict(), monotonicity_violations=mono,
                                         attractiveness_violations=attr,
                                         nu_bar=dict(grid=[1.0, cfg.horizon], p=nu[0], se=nu[1],
                                                     contamination=nu[2]),
                                         selected_semantics=battery["selected"],
                                         contracts=contracts)),
            plot_duality(rows, os.path.join(cfg.out, "duality_battery.png"))]
    return contracts, outs


def _phase_cell(args):
    from .phase import phase_scan
    d, lam, T, reps, seed, theta_s = args
    return phase_scan(d, [lam], T=T, reps=reps, seed=seed, theta_s=theta_s)[0]


def run_phase(cfg):
    from .plotting import plot_phase
    cells = [(cfg.d, lam, cfg.horizon, cfg.reps, cfg.seed + 7919 * i, cfg.theta_s)
             for i, lam in enumerate(cfg.lam)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            reports = list(ex.map(_phase_cell, cells))
    else:
        reports = [_phase_cell(c) for c in cells]
    rows = [r.row() for r in reports]
    srt = sorted(rows, key=lambda r: r["lam"])
    mono = all(b["phi"] >= a["phi"] - 2 * math.hypot(a["phi_se"], b["phi_se"])
               for a, b in zip(srt, srt[1:]))
    contracts = {"phi_monotone": mono,
                 "contamination": all(r["contamination"] < cfg.contamination_cap for r in rows)}
    outs = [_table(cfg, "phase", rows),
            _detail(cfg, "phase_detail", dict(cells=[dict(r.row(), detail=r.detail)
                                                     for r in reports], contracts=contracts)),
            plot_phase(rows, os.path.join(cfg.out, "phase.png"))]
    return contracts, outs


def run_potential(cfg):
    from . import potential as P
    from .plotting import plot_qscan, plot_supermartingale
    from .tree import build_ball, connected_sets, random_subsets
    tree = build_ball(2, max(cfg.radius, 6))
    lam = cfg.lam[0] if cfg.lam else 0.637
    fam = P.connected_family(tree, 8)
    rows = P.q_scan(tree, fam, lam)
    sel = P.select_q(rows)
    q = sel["q"] if sel else 0.6
    # dual-oracle and evaluator agreement
    small = [A for A in connected_sets(tree, 6, within=np.flatnonzero(tree.depth <= 3))]
    oracle = max(abs(P.f_limit(tree, A, q) - P.f_limit_numeric(tree, A, q)) for A in small)
    rng = np.random.default_rng(cfg.seed)
    rand = random_subsets(tree, np.flatnonzero(tree.depth <= 3), 5, rng, 50)
    agree = max(P.drift_h_components(tree, A, lam, q).residual for A in small + list(rand))
    static = P.static_bounds(tree, P.static_family(tree, seed=cfg.seed), q)
    b2 = np.flatnonzero(tree.depth <= 2)
    big = build_ball(2, 14)
    dyn = P.supermartingale_dynamic(big, lam, q, b2, cfg.horizon, cfg.reps, cfg.seed)
    g, m, s = map(np.asarray, (dyn["grid"], dyn["mean"], dyn["se"]))
    dyn_ok = bool(np.all(np.diff(m) <= 3 * np.sqrt(s[1:] ** 2 + s[:-1] ** 2)))
    contracts = {
        "q_exists": sel is not None,
        "ratio_410": bool(sel and sel["min_ratio"] >= P.RATIO_TARGET),
        "f_dual_oracle": oracle <= 1e-6,
        "drift_identity": agree <= 1e-9,
        "increment_bounds": static["increment_ok"],
        "jump_bound": static["jump_ok"],
    }
    body = dict(selected=sel, oracle_max_diff=oracle, drift_max_diff=agree, static=static,
                dynamic=dict(dyn, nonincreasing=dyn_ok, lam=lam, q=q), contracts=contracts)
    outs = [_table(cfg, "qscan", rows), _detail(cfg, "potential", body),
            plot_qscan(rows, os.path.join(cfg.out, "qscan.png"), lam),
            plot_supermartingale(dyn, os.path.join(cfg.out, "supermartingale.png"))]
    return contracts, outs


def run_chain(cfg):
    from . import chain as C
    from .plotting import plot_chain
    from .tree import build_ball
    table = C.absorption_table(cfg.d, list(range(3, 201)))
    walk = [r["walk"] for r in table]
    ruin = max(abs(C.gambler_ruin_exact(n) - C.gambler_ruin_solve(n)) for n in range(1, 101))
    srw = [C.srw_bounds_check(n) for n in range(10, 61)]
    dom = {}
    for d in sorted({cfg.d, 2, 3}):
        R = cfg.radius if d == cfg.d else (12 if d == 2 else 8)
        dom[d] = C.domination_coupling_check(build_ball(d, R), cfg.horizon, cfg.reps,
                                              cfg.seed + d)
    paths = C.conditioned_path_time_bound(20, 20 * cfg.reps, cfg.seed)
    mc = C.absorption_mc(C.BDChainSpec.rescaled_walk(), 30, 20000, cfg.seed)
    exact30 = float(C.expected_absorption_truncated(C.BDChainSpec.rescaled_walk(), 30)[0])
    contracts = {
        "gambler_ruin": ruin <= 1e-12,
        "absorption_exceeds_bound": all(r["walk"] > r["bound"] for r in table),
        "absorption_increasing": bool(np.all(np.diff(walk) > 0)),
        "absorption_mc": abs(mc[0] - exact30) <= 3 * mc[1],
        "srw_bound_chain": all(r["holds"] for r in srw),
        "domination": all(v["violations"] == 0 for v in dom.values()),
        "conditioned_paths": paths["per_path_bound"] and paths["mean_duration"] >= paths["target"],
    }
    links = {k: all(r["links"][k] for r in srw) for k in srw[0]["links"]}
    body = dict(srw=srw, srw_links=links, domination=dom, conditioned_paths=paths,
                absorption_mc=dict(mean=mc[0], se=mc[1], exact=exact30),
                gambler_ruin_max_diff=ruin, contracts=contracts)
    outs = [_table(cfg, "absorption", table), _detail(cfg, "chain", body),
            plot_chain(table, os.path.join(cfg.out, "absorption.png"))]
    return contracts, outs


def run_converge(cfg):
    from .convergence import InitialMeasure, mixture_check, voter_parity_limit
    from .plotting import plot_traces
    from .tree import build_ball
    tree = build_ball(cfg.d, cfg.radius)
    s1 = tree.spine(1)
    T = cfg.horizon
    grid = sorted({T / 4, T / 2, T})
    half = InitialMeasure.product(0.5)
    tr = [voter_parity_limit(tree, 0.0, half, [0], grid, cfg.reps, cfg.seed),
          voter_parity_limit(tree, cfg.delta, half, [0, s1], grid, cfg.reps, cfg.seed + 1)]
    lam = cfg.lam[0] if cfg.lam else 1.2
    big = build_ball(cfg.d, max(cfg.radius, 8))
    for i, B in enumerate(([0], [0, big.spine(1)])):
        tr.append(mixture_check(big, lam, B, T, cfg.reps, cfg.seed + 10 * (i + 1)))
    docs = [t.as_dict() for t in tr]
    contracts = {"voter_symmetry": bool(tr[0].consistent),
                 "voter_parity_limit": bool(tr[1].consistent),
                 "mixture_o": bool(tr[2].consistent),
                 "mixture_o_s1": bool(tr[3].consistent)}
    rows = [dict(model=d["model"], initial=d["initial"], B=d["B"], t=d["grid"][-1],
                 estimate=d["estimate"][-1], se=d["se"][-1], predicted=d["predicted"],
                 residual=d["residual"], combined_se=d["combined_se"],
                 contamination=d["contamination"]) for d in docs]
    outs = [_table(cfg, "convergence", rows),
            _detail(cfg, "convergence", dict(traces=docs, contracts=contracts)),
            plot_traces(docs, os.path.join(cfg.out, "convergence.png"))]
    return contracts, outs


def run_selftest(cfg):
    from .selftest import run_all
    results = run_all(cfg.seed, cfg.reps)
    contracts = {r["name"]: r["ok"] for r in results}
    outs = [_table(cfg, "selftest", results),
            _detail(cfg, "selftest", dict(results=results))]
    return contracts, outs


RUNNERS = {"duality": run_duality, "phase": run_phase, "potential": run_potential,
           "chain": run_chain, "converge": run_converge, "selftest": run_selftest}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = make_config(args)
    except (ConfigError, TypeError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    os.makedirs(cfg.out, exist_ok=True)
    t0 = time.time()
    contracts, outs = RUNNERS[cfg.subcommand](cfg)
    for name, ok in contracts.items():
        print("%-28s %s" % (name, "pass" if ok else "FAIL"))
    for p in outs:
        log.info("wrote %s", p)
    print("%s finished in %.1fs; reports in %s" % (cfg.subcommand, time.time() - t0, cfg.out))
    return 0 if all(contracts.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
