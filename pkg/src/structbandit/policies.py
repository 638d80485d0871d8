"""Bandit policies: the dual-certified exploration policy and baselines.

The main policy keeps one dual certificate per arm and decides each round
by testing whether the observed pull counts carry enough information to
rule out every empirically deceitful arm.  Passing the test means exploit;
failing routes the round through a tracking rule fed by two convex
re-optimizations, a shallow one that only refreshes the rates against the
stored certificates and a deep one that refreshes rates and certificates
together.  Baselines: KL-UCB, UCB1, and an OSSB-style tracker for
Bernoulli slope-constrained models that re-solves its rate program every
round.

All tie-breaks are lowest-index, so every policy here is deterministic
given the observation log.
"""

import math

import numpy as np

from .core import DusaObservationLog, all_means, best_arm_and_value
from .infodual import (DualVars, RateVector, _dual_pieces, _dual_test_max,
                       bernoulli_kl, dual_test)
from .lowerbound import _DualBlocks, _lipschitz_lp, lower_bound_dual
from .solver import (ConicProgram, STATUS_INFEASIBLE, STATUS_OPTIMAL,
                     solve)
from .structures import classify_arms

__all__ = [
    "PolicyDecision",
    "DusaState",
    "dusa_init",
    "dusa_step",
    "sufficient_info_test",
    "shallow_update",
    "deep_update",
    "klucb_index",
    "klucb_step",
    "ucb1_step",
    "ossb_lipschitz_step",
]

PHASES = ("init", "exploit", "explore-least", "explore-rate", "explore-optimal")


class PolicyDecision:
    """One round's outcome: the arm to pull, a phase label, diagnostics.

    diagnostics is a plain dict; the keys written by dusa_step are
    "tests" (per-arm test values), "threshold", "eta" (the rates used for
    tracking, exploration rounds only) and "solver_failure".
    """

    def __init__(self, arm, phase, diagnostics=None):
        if phase not in PHASES:
            raise ValueError("unknown phase %r" % (phase,))
        self.arm = int(arm)
        self.phase = phase
        self.diagnostics = {} if diagnostics is None else diagnostics

    def __repr__(self):
        return "PolicyDecision(arm=%d, phase=%r)" % (self.arm, self.phase)


class DusaState:
    """Mutable per-run state of the dual-certified policy.

    Carries the observation log, one certificate per arm (mu, a DualVars
    each), the reference rates eta_ref the strict shallow update projects
    from, the accuracy eps, the test-schedule constant T0, and the strict
    switch selecting exact projection solves over the relaxed ones.
    """

    def __init__(self, spec, log, mu, eta_ref, eps, T0, strict=False):
        arms = log.arm_count
        if not 0.0 < eps < 1.0 / arms:
            raise ValueError("eps must lie strictly between 0 and 1/arms")
        if not T0 > 0.0:
            raise ValueError("T0 must be positive")
        eta_ref = np.asarray(eta_ref, dtype=float)
        if eta_ref.shape != (arms,):
            raise ValueError("eta_ref must have one entry per arm")
        self.spec = spec
        self.log = log
        self.mu = dict(mu)
        self.eta_ref = eta_ref
        self.eps = float(eps)
        self.T0 = float(T0)
        self.strict = bool(strict)
        self.phase = "init"
        self.solver_failures = 0
        # warm-start bookkeeping: last passing ray scale per rival, and
        # solution caches for the two update programs
        self.test_probes = {}
        self.deep_cache = {}
        self.shallow_cache = {}


def dusa_init(spec, support, arms, eps=1e-3, T0=2000.0, strict=False):
    """Fresh policy state: zero certificates, unit reference rates.

    The first len(arms) rounds served by dusa_step pull each arm once in
    index order.
    """
    log = DusaObservationLog(support, arms)
    mu = {x: DualVars.zero(len(support), arms) for x in range(arms)}
    return DusaState(spec, log, mu, np.ones(arms), eps, T0, strict=strict)


def sufficient_info_test(state, t):
    """Test every empirically deceitful arm against the ramped threshold.

    Returns (passed, values) where values maps each deceitful arm to its
    test statistic dual_test(N_t / log t, x, P_t; mu(x)).  The threshold
    is (1 - exp(-t / T0)) (1 + eps); with no deceitful arm the test passes
    vacuously.  Requires t past the initialization rounds.
    """
    P_t = state.log.empirical()
    part = classify_arms(state.spec, P_t)
    passed, values, _ = _info_test(state, t, P_t, part)
    return passed, values


def _info_test(state, t, P_t, part):
    threshold = (1.0 - math.exp(-t / state.T0)) * (1.0 + state.eps)
    rates = state.log.counts / math.log(t)
    values = {}
    passed = True
    for xp in part.deceitful:
        # remembered maximizers short-circuit the ray search on passing
        # rounds; a value below threshold always comes from a full search
        val, rho = _dual_test_max(rates, xp, P_t, state.mu[xp],
                                  target=threshold,
                                  probe=state.test_probes.get(xp))
        if val >= threshold and math.isfinite(rho):
            state.test_probes[xp] = rho
        values[xp] = val
        if not val >= threshold:
            passed = False
    return passed, values, threshold


def _least_played_best(log, means):
    # among the exact argmax set, least pulled, then lowest index
    cand = np.flatnonzero(means == np.max(means))
    return int(cand[np.argmin(log.counts[cand])])


def dusa_step(state, t):
    """Decide round t, mutating state only on exploration rounds.

    Rounds t <= arms serve the initialization schedule.  Afterwards a
    passing information test exploits (least-pulled empirical best);
    a failing one explores: least-pulled arm under the forced-exploration
    clause, otherwise the tracking rule compares the shallow rates against
    the counts and pulls either the champion or the most starved rival.
    Every exploration round ends by refreshing (eta_ref, mu) through the
    deep update.  A failed shallow solve falls back to the least-pulled
    arm; a failed deep solve keeps the previous certificates; both flag
    the round in diagnostics and bump state.solver_failures.
    """
    log = state.log
    arms = log.arm_count
    if t <= arms:
        state.phase = "init"
        return PolicyDecision(t - 1, "init")

    P_t = log.empirical()
    part = classify_arms(state.spec, P_t)
    passed, values, threshold = _info_test(state, t, P_t, part)
    diag = {"tests": values, "threshold": threshold}
    means = all_means(P_t)
    if passed:
        state.phase = "exploit"
        return PolicyDecision(_least_played_best(log, means), "exploit", diag)

    s_pre = log.s
    log.s = s_pre + 1
    if float(log.counts.min()) <= state.eps * s_pre / (1.0 + math.log(1.0 + s_pre)):
        decision = PolicyDecision(int(np.argmin(log.counts)), "explore-least", diag)
    else:
        decision = _track(state, log, P_t, part, means, diag)

    try:
        eta_new, mu_new = deep_update(state.spec, P_t, state.eps,
                                      strict=state.strict,
                                      cache=state.deep_cache)
    except RuntimeError:
        state.solver_failures += 1
        diag["solver_failure"] = True
    else:
        state.eta_ref = eta_new.rates.copy()
        state.mu = mu_new
    state.phase = decision.phase
    return decision


def _track(state, log, P_t, part, means, diag):
    try:
        eta = shallow_update(state.spec, P_t, state.eta_ref, state.mu,
                             state.eps, strict=state.strict,
                             cache=state.shallow_cache)
    except RuntimeError:
        state.solver_failures += 1
        diag["solver_failure"] = True
        return PolicyDecision(int(np.argmin(log.counts)), "explore-least", diag)
    eta_arr = eta.rates if isinstance(eta, RateVector) else np.asarray(eta, dtype=float)
    diag["eta"] = eta_arr
    xstar = part.optimal
    cand = np.array([x for x in range(log.arm_count)
                     if x != xstar and eta_arr[x] > 0.0], dtype=int)
    if cand.size == 0:
        # no rival asks for exploration; treat like a least-pull round
        return PolicyDecision(int(np.argmin(log.counts)), "explore-least", diag)
    xbar = int(cand[np.argmin(log.counts[cand] / eta_arr[cand])])
    xstar_t = _least_played_best(log, means)
    if log.counts[xstar_t] <= log.counts[xbar]:
        return PolicyDecision(xstar_t, "explore-optimal", diag)
    return PolicyDecision(xbar, "explore-rate", diag)


def shallow_update(spec, P, eta_ref, mu, eps, strict=False, cache=None):
    """Refresh exploration rates against the stored certificates.

    Default mode minimizes the rate-weighted regret over rates meeting a
    certified-information constraint per empirically deceitful arm, each
    encoded through a nonnegative scaling of that arm's certificate; the
    encoding under-approximates the test statistic, so any returned point
    satisfies dual_test >= 1 exactly.  Strict mode then projects eta_ref
    onto that same set capped by the default optimum plus 2 eps.

    With no deceitful arm returns zero rates.  An infeasible constraint
    set (all-zero certificates, for instance) returns the sentinel: a bare
    float array of +inf, deliberately not a RateVector.  Any other solver
    outcome raises RuntimeError.

    cache, when given, is a mutable dict reused across calls to warm-start
    the solves from the previous nearby solution.
    """
    part = classify_arms(spec, P)
    arms = P.arm_count
    if not part.deceitful:
        return RateVector(np.zeros(arms))
    cache = {} if cache is None else cache
    value, rates, status = _shallow_solve(P, part, mu, objective="gap",
                                          warm=cache.setdefault("gap", {}))
    if status == STATUS_INFEASIBLE:
        return np.full(arms, math.inf)
    if status != STATUS_OPTIMAL:
        raise RuntimeError("shallow update failed: %s" % status)
    if not strict:
        return RateVector(rates)
    _, rates, status = _shallow_solve(P, part, mu, objective="project",
                                      eta_ref=eta_ref,
                                      budget=value + 2.0 * eps,
                                      warm=cache.setdefault("project", {}))
    if status != STATUS_OPTIMAL:
        raise RuntimeError("shallow projection failed: %s" % status)
    return RateVector(rates)


def _shallow_solve(P, part, mu, objective, eta_ref=None, budget=None,
                   warm=None):
    """Conic encoding of the certificate-scaled information constraints.

    Per deceitful rival: a scale rho >= 0 and, per positive-probability
    (level, rival) entry, a pair (u, v) with v = eta - rho c and
    eta log(v / eta) >= u, summed into the rival's scalar row
    sum P u + rho K >= 1.  Zero-probability entries keep only the sign
    constraint eta - rho c >= 0.  objective "gap" minimizes the
    rate-weighted regret; "project" minimizes the distance to eta_ref
    subject to the extra budget row.
    """
    xstar, best = best_arm_and_value(P)
    arms = P.arm_count
    levels = np.asarray(P.support.values, dtype=float)
    nR = len(levels)
    sub = [x for x in range(arms) if x != xstar]
    nS = len(sub)
    live = [(r, j) for j in range(nS) for r in range(nR)
            if P.probs[r, sub[j]] > 0.0]
    dead = [(r, j) for j in range(nS) for r in range(nR)
            if P.probs[r, sub[j]] == 0.0]
    blk = 1 + 2 * len(live)
    n = nS + len(part.deceitful) * blk
    means = levels @ P.probs
    delta = best - means[sub]

    eq_rows, eq_rhs, in_rows, in_rhs = [], [], [], []
    triples, groups = [], []
    pieces = []
    for k, xp in enumerate(part.deceitful):
        o = nS + k * blk
        _, cmat, K0 = _dual_pieces(None, xp, P, mu[xp])
        pieces.append((cmat, K0))
        row = np.zeros(n)
        row[o] = 1.0
        in_rows.append(row)
        in_rhs.append(0.0)
        scalar = np.zeros(n)
        scalar[o] = K0
        for i, (r, j) in enumerate(live):
            u, v = o + 1 + 2 * i, o + 2 + 2 * i
            row = np.zeros(n)
            row[v] = 1.0
            row[j] -= 1.0
            row[o] += cmat[r, j]
            eq_rows.append(row)
            eq_rhs.append(0.0)
            triples.append((u, v, j))
            scalar[u] = P.probs[r, sub[j]]
        for r, j in dead:
            row = np.zeros(n)
            row[j] = 1.0
            row[o] = -cmat[r, j]
            in_rows.append(row)
            in_rhs.append(0.0)
        in_rows.append(scalar)
        in_rhs.append(1.0)
        groups.append(range(o, o + blk))

    c = np.zeros(n)
    q = None
    if objective == "gap":
        c[:nS] = delta
    else:
        q = np.zeros(n)
        q[:nS] = 2.0
        c[:nS] = -2.0 * np.asarray(eta_ref, dtype=float)[sub]
        row = np.zeros(n)
        row[:nS] = -delta
        in_rows.append(row)
        in_rhs.append(-float(budget))
    prog = ConicProgram(n, c=c, q=q,
                        A_eq=np.array(eq_rows), b_eq=np.array(eq_rhs),
                        A_in=np.array(in_rows), b_in=np.array(in_rhs),
                        triples=triples, groups=groups)
    key = (tuple(part.deceitful), xstar, n, prog.A_eq.shape[0],
           prog.A_in.shape[0], len(triples))
    x0 = t_start = None
    if warm is not None and warm.get("key") == key:
        x0 = _warm_shallow_point(warm["x0"], nS, blk, live, dead, pieces,
                                 P, sub, delta, budget)
        if x0 is not None:
            t_start = warm.get("t")
    sol = solve(prog, tol=1e-6, x0=x0, t_start=t_start)
    if x0 is not None and sol.status != STATUS_OPTIMAL:
        sol = solve(prog, tol=1e-6)
    if warm is not None:
        warm.clear()
        if sol.status == STATUS_OPTIMAL and sol.gap > 0:
            nu = prog.A_in.shape[0] + 3 * len(triples)
            warm["key"] = key
            warm["x0"] = sol.point.copy()
            warm["t"] = nu / sol.gap
    rates = np.zeros(arms)
    if sol.point is None:
        return 0.0, rates, sol.status
    for j, x in enumerate(sub):
        rates[x] = max(float(sol.point[j]), 0.0)
    return float(delta @ sol.point[:nS]), rates, sol.status


def _warm_shallow_point(prev, nS, blk, live, dead, pieces, P, sub, delta,
                        budget, lift=0.02):
    """Interior restart for the certificate-scaled program.

    Carries the rates (lifted) and per-rival scales from a nearby
    solution, shrinking a scale whenever the new certificate would drive
    an inner value or a dead-entry sign row nonpositive, recomputes the
    inner values exactly from their defining rows, and re-margins the
    log slacks by half the scalar-row surplus.  Returns None when no
    strictly feasible restart comes out; callers then solve cold.
    """
    eta = prev[:nS]
    if np.any(eta <= 0.0):
        return None
    x0 = prev.copy()
    x0[:nS] = eta * (1.0 + lift)
    if budget is not None and float(delta @ x0[:nS]) >= budget:
        return None
    for k, (cmat, K0) in enumerate(pieces):
        o = nS + k * blk
        rho = float(prev[o])
        if rho <= 0.0:
            return None
        cap_rho = math.inf
        for r, j in live:
            c = float(cmat[r, j])
            if c > 0.0:
                cap_rho = min(cap_rho, float(x0[j]) / c)
        for r, j in dead:
            c = float(cmat[r, j])
            if c > 0.0:
                cap_rho = min(cap_rho, float(x0[j]) / c)
        rho = min(rho, 0.9 * cap_rho)
        x0[o] = rho
        surplus = rho * K0 - 1.0
        caps = []
        mass = 0.0
        for i, (r, j) in enumerate(live):
            v = float(x0[j]) - rho * float(cmat[r, j])
            if v <= 0.0:
                return None
            x0[o + 2 + 2 * i] = v
            cap = float(x0[j]) * math.log(v / float(x0[j]))
            p = float(P.probs[r, sub[j]])
            caps.append((o + 1 + 2 * i, cap))
            surplus += p * cap
            mass += p
        if surplus <= 1e-12 or mass <= 0.0:
            return None
        margin = 0.5 * surplus / mass
        for ui, cap in caps:
            x0[ui] = cap - margin
    return x0


def deep_update(spec, P, eps, strict=False, cache=None):
    """Refresh rates and certificates at the empirical estimate.

    Default mode reads both off the regret-bound dual solve run to
    accuracy eps.  Strict mode returns the minimum-norm eps-suboptimal
    pair instead, with rate and inner-value floors keeping the selection
    interior.  Arms without a certificate of their own carry zero duals.
    Raises RuntimeError on solver failure; callers keep previous state.

    A deceitful arm whose mean ties the empirical best makes the program
    infeasible (no finite rate separates it), so that case raises without
    burning a solve.

    cache, when given, is a mutable dict reused across calls to warm-start
    the default-mode solve from the previous nearby solution.
    """
    arms = P.arm_count
    nlev = len(P.support)
    part = classify_arms(spec, P)
    means = all_means(P)
    if part.deceitful and np.max(means[part.deceitful]) >= means[part.optimal] - 1e-9:
        raise RuntimeError("deep update degenerate: a rival ties the empirical best")
    if strict:
        rates, duals = _deep_strict(spec, P, eps, part)
    else:
        res = lower_bound_dual(spec, P, eps, validate=False, warm=cache)
        if res.status != STATUS_OPTIMAL:
            raise RuntimeError("deep update failed: %s" % res.status)
        rates, duals = res.rates, res.duals
    mu = {x: duals[x] if x in duals else DualVars.zero(nlev, arms)
          for x in range(arms)}
    return rates, mu


def _deep_strict(spec, P, eps, part=None):
    if part is None:
        part = classify_arms(spec, P)
    arms = P.arm_count
    if not part.deceitful:
        return RateVector(np.zeros(arms)), {}
    base = lower_bound_dual(spec, P, eps, validate=False)
    if base.status != STATUS_OPTIMAL:
        raise RuntimeError("deep update failed: %s" % base.status)
    bl = _DualBlocks(spec, P, part, pin_beta=False)
    means = bl.levels @ P.probs
    delta = bl.best - means[bl.sub]
    floor = eps / (2.0 * float(np.sum(delta)))
    extra_rows, extra_rhs = [], []
    row = np.zeros(bl.n)
    row[:bl.nS] = -delta
    extra_rows.append(row)
    extra_rhs.append(-(base.value + eps))
    for j in range(bl.nS):
        row = np.zeros(bl.n)
        row[j] = 1.0
        extra_rows.append(row)
        extra_rhs.append(floor)
    for k in range(len(bl.deceitful)):
        for j in range(bl.nS):
            for r in range(bl.nR):
                row = np.zeros(bl.n)
                row[bl.v_index(k, j, r)] = 1.0
                extra_rows.append(row)
                extra_rhs.append(floor)
    q = np.zeros(bl.n)
    q[:bl.nS] = 2.0
    for k in range(len(bl.deceitful)):
        o = bl.block_offset(k)
        q[o:o + 2 + bl.nB] = 2.0
    prog = ConicProgram(bl.n, q=q, A_eq=bl.A_eq, b_eq=bl.b_eq,
                        A_in=np.vstack([bl.A_in, np.array(extra_rows)]),
                        b_in=np.concatenate([bl.b_in, np.array(extra_rhs)]),
                        triples=bl.triples, groups=bl.groups)
    sol = solve(prog, tol=1e-6)
    if sol.status != STATUS_OPTIMAL or sol.point is None:
        raise RuntimeError("deep projection failed: %s" % sol.status)
    rates = np.zeros(arms)
    for j, x in enumerate(bl.sub):
        rates[x] = max(float(sol.point[j]), floor)
    return RateVector(rates), bl.read_duals(sol.point)


def klucb_index(mean, count, budget, tol=1e-9):
    """Largest q in [mean, 1] with count * I_B(mean, q) <= budget."""
    if budget <= 0.0 or mean >= 1.0:
        return float(min(max(mean, 0.0), 1.0))
    lo, hi = float(mean), 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count * bernoulli_kl(mean, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def _klucb_indices(means, counts, budget):
    # simultaneous bisection; 48 halvings beat the 1e-9 scalar tolerance
    lo = np.clip(means, 0.0, 1.0)
    hi = np.ones_like(lo)
    base = lo.copy()
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        kl = np.zeros_like(base)
        pos = base > 0.0
        kl[pos] += base[pos] * np.log(base[pos] / mid[pos])
        below = base < 1.0
        kl[below] += (1.0 - base[below]) * np.log((1.0 - base[below])
                                                  / (1.0 - mid[below]))
        ok = counts * kl <= budget
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return np.where(base >= 1.0, 1.0, lo)


def klucb_step(log, t, f=None):
    """Pull the largest KL upper-confidence index, budget f(t) = log t.

    Means on general grids are compared through their Bernoulli
    divergence.  Ties go to the lowest index; rounds t <= arms serve the
    initialization schedule.
    """
    arms = log.arm_count
    if t <= arms:
        return t - 1
    budget = math.log(t) if f is None else float(f(t))
    means = np.asarray(log.support.values, dtype=float) @ log.probs
    idx = _klucb_indices(means, log.counts.astype(float), budget)
    return int(np.argmax(idx))


def ucb1_step(log, t):
    """Pull the largest mean + sqrt(2 log t / N) index, lowest-index ties."""
    arms = log.arm_count
    if t <= arms:
        return t - 1
    means = np.asarray(log.support.values, dtype=float) @ log.probs
    return int(np.argmax(means + np.sqrt(2.0 * math.log(t) / log.counts)))


def ossb_lipschitz_step(log, t, L, d, gamma_ossb=0.0, eps_ossb=0.01,
                        cache=None):
    """OSSB-style tracking for Bernoulli slope-constrained means.

    Re-solves the pretender-rate program every round; exploits once every
    rival's count clears (1 + gamma_ossb) times its target rate, otherwise
    pulls the least-pulled arm when min N <= eps_ossb * s (the counter s
    lives in log.s) and the largest relative shortfall otherwise.  A rival
    tying the empirical best makes the program degenerate: exploit.  A
    failed solve falls back to the least-pulled arm.  cache, a dict, keeps
    the previous solution as a warm start between rounds.
    """
    arms = log.arm_count
    if t <= arms:
        return t - 1
    P_t = log.empirical()
    xstar, best = best_arm_and_value(P_t)
    means = all_means(P_t)
    sub = np.array([x for x in range(arms) if x != xstar], dtype=int)
    if sub.size == 0 or np.any(best - means[sub] <= 1e-12):
        return int(xstar)
    x0 = None if cache is None else cache.get("x0")
    value, eta, status = _lipschitz_lp(P_t, L, d, x0=x0)
    if status != STATUS_OPTIMAL:
        log.s += 1
        return int(np.argmin(log.counts))
    if cache is not None:
        cache["x0"] = 1.05 * eta[sub] + 0.01
    if np.all(eta[sub] <= 1e-12):
        return int(xstar)
    if np.all(log.counts[sub] >= (1.0 + gamma_ossb) * eta[sub] * math.log(t)):
        return int(xstar)
    s_pre = log.s
    log.s = s_pre + 1
    if float(log.counts.min()) <= eps_ossb * s_pre:
        return int(np.argmin(log.counts))
    with np.errstate(divide="ignore"):
        ratios = log.counts[sub] / eta[sub]
    return int(sub[np.argmin(ratios)])
