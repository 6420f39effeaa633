"""Survival diagnostics for the threshold-one contact process.

Estimators run on the infinite tree through the bounded-population
simulator in ``_lazy``, so there is no truncation boundary.  The only
censoring is the population cap, whose frequency is reported as the
contamination fraction of each estimate.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _lazy as L
from .stats import mean_se, proportion, wilson
from .tree import build_ball, canonical_address

THETA_S = 0.02
EXTINCTION_CUTOFF = 0.99
SURVIVAL_LCB = 0.05


def ball_addresses(d, n):
    """Canonical addresses of B(o, n) in breadth-first order."""
    if n < 0:
        return []
    if n == 0:
        return [(0, [])]
    t = build_ball(d, n)
    return [canonical_address(t, v) for v in range(t.V)]


def _wls_slope(t, y, w):
    """Weighted least-squares slope and its standard error."""
    W = np.sum(w)
    tb = np.sum(w * t) / W
    yb = np.sum(w * y) / W
    sxx = np.sum(w * (t - tb) ** 2)
    slope = np.sum(w * (t - tb) * (y - yb)) / sxx
    resid = y - yb - slope * (t - tb)
    return float(slope), float(math.sqrt(1.0 / sxx)), resid


def phi_estimate(d, lam, T=6.0, reps=2000, seed=0, step=0.25, pop_cap=100_000):
    """Growth exponent from the late-time slope of log E|xi_t| started at {o}.

    Returns a dict with phi, se, per-grid means, fit residuals, the flag
    ``fallback`` (survival-probability fit used) and the censored fraction.
    """
    grid = np.arange(step, T + 1e-9, step)
    runs = L.run_lazy(d, lam, [(0, [])], T, seed, reps, pop_cap=pop_cap, grid=grid)
    censored = runs.count(L.CAPPED) + runs.count(L.OVERFLOW)
    ok = runs.outcome != L.CAPPED
    cen = runs.census[ok]
    means = cen.mean(axis=0)
    ses = cen.std(axis=0, ddof=1) / math.sqrt(max(cen.shape[0], 1))
    win = grid >= T / 2 - 1e-9
    fallback = False
    y_src, se_src = means, ses
    if np.count_nonzero(means[win] > 0) < 2:
        alive = (cen > 0).mean(axis=0)
        y_src = alive
        se_src = np.sqrt(alive * (1 - alive) / cen.shape[0])
        fallback = True
    use = win & (y_src > 0) & (se_src > 0)
    if np.count_nonzero(use) < 2:
        phi, se, resid = float("nan"), float("nan"), np.zeros(0)
    else:
        y = np.log(y_src[use])
        w = (y_src[use] / se_src[use]) ** 2
        slope, sse, resid = _wls_slope(grid[use], y, w)
        phi, se = math.exp(slope), math.exp(slope) * sse
    return dict(d=d, lam=float(lam), T=float(T), reps=reps, phi=phi, se=se,
                grid=grid.tolist(), mean=means.tolist(), mean_se=ses.tolist(),
                residuals=np.asarray(resid).tolist(), fallback=fallback,
                contamination=censored / reps)


def phi_crossing(rows):
    """Smallest lambda where the phi rows cross 1 (log-linear interpolation)."""
    rows = sorted(rows, key=lambda r: r["lam"])
    for a, b in zip(rows, rows[1:]):
        if a["phi"] < 1 <= b["phi"]:
            la, lb = math.log(a["phi"]), math.log(b["phi"])
            return a["lam"] + (b["lam"] - a["lam"]) * (-la) / (lb - la)
    return float("nan")


def beta_estimate(d, lam, n_max, T=10.0, reps=2000, seed=0, pop_cap=20_000):
    """Per-n estimates of P(x_n reached by T)^(1/n) with Wilson intervals."""
    runs = L.run_lazy(d, lam, [(0, [])], T, seed, reps, pop_cap=pop_cap, nspine=n_max)
    hit = np.isfinite(runs.hits)
    rows = []
    for n in range(n_max + 1):
        k = int(hit[:, n].sum())
        lo, hi = wilson(k, reps)
        p = k / reps
        if n == 0:
            rows.append(dict(n=0, p=1.0, se=0.0, beta=1.0, lo=1.0, hi=1.0, zero_hits=False))
            continue
        rows.append(dict(n=n, p=p, se=math.sqrt(p * (1 - p) / reps), beta=p ** (1.0 / n), lo=lo ** (1.0 / n),
                         hi=hi ** (1.0 / n), zero_hits=k == 0))
    tail = [r["beta"] for r in rows[-3:] if r["n"] > 0]
    censored = runs.count(L.CAPPED) / reps
    return dict(d=d, lam=float(lam), T=float(T), reps=reps, rows=rows,
                beta_hat=float(np.mean(tail)) if tail else 1.0, contamination=censored)


def supermultiplicativity(rows, z=2.0):
    """Violations of p_{m+n} >= p_m p_n beyond z standard errors."""
    ps = {r["n"]: r["p"] for r in rows}
    se = {r["n"]: r["se"] for r in rows}
    bad = []
    for m in ps:
        for n in ps:
            if m < 1 or n < 1 or m + n not in ps:
                continue
            lhs, rhs = ps[m + n], ps[m] * ps[n]
            slack = z * math.sqrt(se[m + n] ** 2 + (ps[n] * se[m]) ** 2 + (ps[m] * se[n]) ** 2)
            if lhs < rhs - slack:
                bad.append((m, n, lhs, rhs))
    return bad


def strong_survival_indicator(d, lam, t_grid, reps=2000, seed=0, pop_cap=50_000):
    """inf over the grid of P(o in xi_t) for the process restricted to T_o."""
    t_grid = np.asarray(t_grid, dtype=float)
    T = float(t_grid.max())
    runs = L.run_lazy(d, lam, [(0, [])], T, seed, reps, pop_cap=pop_cap,
                      mode=L.SUBTREE_O, grid=t_grid)
    occ = runs.root
    # grid points where more than 1% of replicates are censored by the cap are dropped
    valid = np.mean(occ < 0, axis=0) <= 0.01
    if not valid[0]:
        valid[0] = True
    t_grid = t_grid[valid]
    occ = occ[:, valid]
    T = float(t_grid.max())
    est, lo, hi, se = [], [], [], []
    for g in range(t_grid.size):
        col = occ[:, g]
        col = col[col >= 0]
        k, n = int(col.sum()), col.size
        p, s = proportion(k, n)
        a, b = wilson(k, n)
        est.append(p); se.append(s); lo.append(a); hi.append(b)
    est = np.array(est)
    j = int(np.argmin(est))
    late = t_grid >= T / 2
    slope, slope_se = float("nan"), float("nan")
    keep = late & (est > 0) & (np.array(se) > 0)
    if np.count_nonzero(keep) >= 2:
        w = (est[keep] / np.array(se)[keep]) ** 2
        slope, slope_se, _ = _wls_slope(t_grid[keep], np.log(est[keep]), w)
    return dict(d=d, lam=float(lam), grid=t_grid.tolist(), p=est.tolist(), lo=lo, hi=hi,
                indicator=float(est[j]), indicator_lo=float(lo[j]), indicator_hi=float(hi[j]),
                late_log_slope=slope, late_log_slope_se=slope_se, valid_horizon=T,
                contamination=float(np.mean(runs.root[:, valid] < 0)))


def survival_run(d, lam, init_addrs, T=30.0, reps=2000, seed=0, pop_cap=200):
    """Survival frequency by T on the infinite tree.

    A replicate that reaches the population cap is counted as surviving; its
    later extinction probability is at most the extinction probability from
    ``pop_cap`` particles, which is negligible in the regimes scanned.
    """
    runs = L.run_lazy(d, lam, init_addrs, T, seed, reps, pop_cap=pop_cap)
    ext = runs.count(L.EXTINCT)
    surv = reps - ext
    lo, hi = wilson(surv, reps)
    return dict(d=d, lam=float(lam), T=float(T), reps=reps, extinction=ext / reps,
                survival=surv / reps, survival_lo=lo, survival_hi=hi,
                capped=runs.count(L.CAPPED) / reps, alive=runs.count(L.ALIVE) / reps,
                contamination=runs.count(L.OVERFLOW) / reps,
                max_depth=int(runs.max_depth.max()) if reps else 0)


@dataclass
class PhaseReport:
    d: int
    lam: float
    phi: float
    phi_se: float
    beta: float
    indicator: float
    indicator_lo: float
    extinction: float
    survival_lo: float
    classification: str
    reps: int
    contamination: float
    detail: dict = field(default_factory=dict, repr=False)

    def row(self):
        out = asdict(self)
        out.pop("detail")
        return out


def classify(extinction, phi, survival_lo, ind, theta_s=THETA_S,
             cutoff=EXTINCTION_CUTOFF, survival_lcb=SURVIVAL_LCB):
    """Pure classification rule.

    dies_out: extinction >= cutoff and phi < 1.
    strong: survival established and the indicator's lower bound exceeds
    theta_s with no significant late decay.
    weak: survival established and the indicator is below theta_s or decays
    significantly (3 se) over the late half.
    survives: survival established, indicator undecided.
    """
    if extinction >= cutoff and phi < 1:
        return "dies_out"
    if survival_lo <= survival_lcb:
        return "inconclusive"
    slope, sse = ind["late_log_slope"], ind["late_log_slope_se"]
    decaying = np.isfinite(slope) and slope < -3 * sse
    flat = np.isfinite(slope) and slope >= -3 * sse
    if ind["indicator_hi"] < theta_s or decaying:
        return "weak"
    if ind["indicator_lo"] > theta_s and flat:
        return "strong"
    return "survives"


def phase_scan(d, lam_grid, T=30.0, reps=2000, seed=0, init_radius=2, pop_cap=200,
               phi_T=6.0, beta_n=6, beta_T=8.0, ind_T=14.0, theta_s=THETA_S):
    """Run the estimators for each lambda and classify."""
    init = ball_addresses(d, init_radius)
    out = []
    for i, lam in enumerate(lam_grid):
        s = seed + 1000 * i
        surv = survival_run(d, lam, init, T, reps, s, pop_cap)
        phi = phi_estimate(d, lam, phi_T, reps, s + 1)
        beta = beta_estimate(d, lam, beta_n, beta_T, max(reps // 2, 100), s + 2)
        ind = strong_survival_indicator(d, lam, np.arange(0.0, ind_T + 1e-9, 1.0),
                                        max(reps // 2, 100), s + 3)
        cls = classify(surv["extinction"], phi["phi"], surv["survival_lo"], ind, theta_s)
        cont = max(surv["contamination"], phi["contamination"], ind["contamination"])
        out.append(PhaseReport(d, float(lam), phi["phi"], phi["se"], beta["beta_hat"],
                               ind["indicator"], ind["indicator_lo"], surv["extinction"],
                               surv["survival_lo"], cls, reps, cont,
                               detail=dict(survival=surv, phi=phi, beta=beta, indicator=ind)))
    return out


def density_check(d, lam, n, k, t_grid, reps=1000, seed=0, pop_cap=50_000):
    """sup over the grid of P(|xi_t cap B(n)| <= k) started from B(n)."""
    t_grid = np.asarray(t_grid, dtype=float)
    runs = L.run_lazy(d, lam, ball_addresses(d, n), float(t_grid.max()), seed, reps,
                      pop_cap=pop_cap, grid=t_grid, ball_n=n)
    probs = []
    for g in range(t_grid.size):
        col = runs.ball[:, g]
        col = col[col >= 0]
        probs.append(float(np.mean(col <= k)) if col.size else float("nan"))
    probs = np.array(probs)
    j = int(np.nanargmax(probs))
    return dict(n=n, k=k, sup=float(probs[j]), se=proportion(probs[j] * reps, reps)[1],
                argsup=float(t_grid[j]), probs=probs.tolist(),
                contamination=runs.count(L.CAPPED) / reps)


def spread_set(d, n, gap=3):
    """n spine vertices at mutual distance >= gap."""
    return [(gap * i, []) for i in range(n)]


def uniform_survival_check(d, lam, n, family_size=8, reps=1000, seed=0, T=30.0,
                           pop_cap=200, radius=3):
    """Largest extinction frequency over sampled sets of size n, with the
    product bound max(p1, p2)^(n/2)."""
    rng = np.random.default_rng(seed)
    addrs = ball_addresses(d, radius)
    if n > len(addrs):
        raise ValueError("ball too small for n")
    family = [spread_set(d, n)]
    for _ in range(family_size - 1):
        pick = rng.choice(len(addrs), size=n, replace=False)
        family.append([addrs[i] for i in sorted(pick)])
    freqs = []
    for j, A in enumerate(family):
        runs = L.run_lazy(d, lam, A, T, seed + 17 * (j + 1), reps, pop_cap=pop_cap)
        freqs.append(runs.count(L.EXTINCT) / reps)
    p1 = L.run_lazy(d, lam, [(0, [])], T, seed + 5, reps, pop_cap=pop_cap,
                    mode=L.SUBTREE_X1_O).count(L.EXTINCT) / reps
    p2 = L.run_lazy(d, lam, [(0, [])], T, seed + 6, reps, pop_cap=pop_cap,
                    mode=L.SUBTREE_O).count(L.EXTINCT) / reps
    worst = max(freqs)
    return dict(n=n, max_extinction=worst, spread_extinction=freqs[0], freqs=freqs,
                p1=p1, p2=p2, bound=max(p1, p2) ** (n / 2.0), reps=reps)
