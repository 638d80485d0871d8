"""Regret lower bound: conic dual program, closed forms, concentration.

The dual program minimizes the rate-weighted regret subject to, per
deceitful arm, one information constraint expressed through exponential
cones; its building blocks are the dual-cone row systems from structures.
Two cheap routes exist for special models and double as cross-checks:
a per-arm KL projection sum for unstructured per-arm sets, and a small
LP over explicit worst-case pretenders for Bernoulli slope-constrained
models.
"""

import math

import numpy as np

from .core import RewardMatrix, best_arm_and_value
from .infodual import DualVars, RateVector, info_distance
from .solver import (ConicProgram, STATUS_OPTIMAL,
                     lp_solve, solve)
from .structures import classify_arms, dual_cone, feasible_for_spec


class LowerBoundResult:
    """Value, rate vector, and per-deceitful-arm dual certificates."""

    def __init__(self, value, rates, duals, status):
        if value < 0:
            raise ValueError("lower bound value cannot be negative")
        self.value = float(value)
        self.rates = rates
        self.duals = dict(duals)
        self.status = status

    def __repr__(self):
        return "LowerBoundResult(value=%.6g, status=%s, deceitful=%s)" % (
            self.value, self.status, sorted(self.duals))


# ------------------------------------------------------------ KL projection

def _tilt_kappa(ps, rs, nu):
    """Normalizer kappa solving sum ps / (kappa - nu rs) = 1.

    The sum is strictly decreasing in kappa on (nu max(rs), inf) and spans
    (inf, 0), so plain bisection after a doubling bracket is safe.
    """
    lo = nu * float(np.max(rs))
    hi = lo + 1.0
    while float(np.sum(ps / (hi - nu * rs))) > 1.0:
        hi = lo + 2.0 * (hi - lo)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or float(np.sum(ps / (mid - nu * rs))) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


def _kinf(p, levels, m):
    """Smallest divergence to a grid distribution with mean at least m.

    Stationarity puts the minimizer in the family q = p / (kappa - nu r)
    on the support of p; any mass created off that support sits at the top
    grid level, and then kappa = nu * top collapses the family to a closed
    form with mean top - 1/nu.  Returns +inf when m cannot be reached.
    """
    p = np.asarray(p, dtype=float)
    levels = np.asarray(levels, dtype=float)
    mean = float(levels @ p)
    if mean >= m - 1e-14:
        return 0.0
    top = float(levels[-1])
    if m >= top - 1e-12:
        return math.inf
    sup = p > 0
    ps, rs = p[sup], levels[sup]

    if p[-1] == 0.0:
        # atom branch boundary: zero atom mass at nu0, mean top - 1/nu
        nu0 = float(np.sum(ps / (top - rs)))
        if top - 1.0 / nu0 <= m:
            return float(np.sum(ps * np.log((top - rs) / (top - m))))
        nu_hi = nu0
    else:
        nu_hi = 1.0
        while True:
            kappa = _tilt_kappa(ps, rs, nu_hi)
            q = ps / (kappa - nu_hi * rs)
            if float(rs @ q) >= m:
                break
            nu_hi *= 2.0

    lo = 0.0
    hi = nu_hi
    for _ in range(100):
        nu = 0.5 * (lo + hi)
        kappa = _tilt_kappa(ps, rs, nu)
        q = ps / (kappa - nu * rs)
        if float(rs @ q) < m:
            lo = nu
        else:
            hi = nu
    kappa = _tilt_kappa(ps, rs, hi)
    q = ps / (kappa - hi * rs)
    return float(np.sum(ps * np.log(ps / q)))


def lower_bound_separable(P):
    """Rate-weighted regret floor for unstructured per-arm models.

    Each suboptimal arm contributes gap / projection distance, where the
    projection lifts that arm's mean to the champion's; arms that cannot
    pretend above the champion contribute nothing.
    """
    xstar, best = best_arm_and_value(P)
    levels = np.asarray(P.support.values, dtype=float)
    if float(levels[-1]) <= best + 1e-12:
        return 0.0
    means = levels @ P.probs
    total = 0.0
    for x in range(P.arm_count):
        if x == xstar:
            continue
        div = _kinf(P.probs[:, x], levels, best)
        if div > 0 and math.isfinite(div):
            total += (best - float(means[x])) / div
    return total


# ----------------------------------------------------- Bernoulli slope route

def _require_bernoulli(P):
    vals = np.asarray(P.support.values, dtype=float)
    if len(vals) != 2 or vals[0] != 0.0 or vals[1] != 1.0:
        raise ValueError("this route needs Bernoulli support {0, 1}")


def worst_deceitful_lipschitz(P, xprime, L, d):
    """Cheapest pretender for arm xprime under a slope constraint.

    Column x is lifted to the floor Rew* - L d(x, xprime) whenever it sits
    below it; the champion column never moves.
    """
    _require_bernoulli(P)
    d = np.asarray(d, dtype=float)
    _, best = best_arm_and_value(P)
    q1 = np.maximum(P.probs[1], best - L * d[:, xprime])
    return RewardMatrix(np.vstack([1.0 - q1, q1]), P.support)


def _lipschitz_lp(P, L, d, x0=None):
    """Pretender-rate LP; returns (value, full-length rates, status).

    A zero-value shortcut fires when no arm can pretend above the champion
    (best mean already at the top level).  x0 warm-starts the solve.
    """
    _require_bernoulli(P)
    xstar, best = best_arm_and_value(P)
    arms = P.arm_count
    rates = np.zeros(arms)
    if best >= 1.0 - 1e-12:
        return 0.0, rates, STATUS_OPTIMAL
    sub = [x for x in range(arms) if x != xstar]
    rows = []
    for xp in sub:
        Q = worst_deceitful_lipschitz(P, xp, L, d)
        rows.append([info_distance(P.probs[:, x], Q.probs[:, x])
                     for x in sub])
    n = len(sub)
    delta = best - P.probs[1, sub]
    prog = ConicProgram(
        n,
        c=delta,
        A_in=np.vstack([np.asarray(rows), np.eye(n)]),
        b_in=np.concatenate([np.ones(len(sub)), np.zeros(n)]),
    )
    sol = lp_solve(prog, tol=1e-9, x0=x0)
    if sol.status != STATUS_OPTIMAL:
        return 0.0, rates, sol.status
    rates[sub] = np.maximum(sol.point, 0.0)
    return max(float(sol.value), 0.0), rates, sol.status


def lower_bound_lipschitz_lp(P, L, d):
    """Rate LP over explicit worst-case pretenders, one row per rival."""
    value, _, status = _lipschitz_lp(P, L, d)
    if status != STATUS_OPTIMAL:
        raise RuntimeError("rate program failed: %s" % status)
    return value


# ------------------------------------------------------------- concentration

def concentration_bound(delta, t, arms, levels):
    """Tail weight of the log-likelihood martingale at threshold delta.

    Evaluated in log space so extreme thresholds underflow to zero instead
    of tripping through inf * 0.
    """
    k = arms * (levels - 1)
    if t < 1.0:
        raise ValueError("time must be at least one")
    if delta < k + 1:
        raise ValueError("delta must be at least arms*(levels-1) + 1")
    bracket = math.ceil(math.log(t) * delta + 1.0)
    log_val = 1.0 - delta + k * (math.log(delta) + math.log(bracket)
                                 + math.log(2.0) + 1.0 - math.log(k))
    return math.exp(log_val)


# -------------------------------------------------------------- dual program

class _DualBlocks:
    """Assembled rows of the dual program: shared rates + per-rival blocks.

    Block k holds alpha >= 0, beta free, a dual-cone member lam with its
    auxiliaries, and per (level, suboptimal arm) the inner value
    v = eta - lam - beta - alpha r [x = rival] with its log slack m, coupled
    by the cone relation eta log(v / eta) >= m.  One scalar row per rival
    keeps the certified information at least one.  pin_beta removes the
    per-block gauge freedom; projection programs whose quadratic cost
    already curves the gauge direction keep beta free instead.
    """

    def __init__(self, spec, P, part, pin_beta=True):
        xstar, best = best_arm_and_value(P)
        levels = np.asarray(P.support.values, dtype=float)
        arms = P.arm_count
        nR = len(levels)
        sub = [x for x in range(arms) if x != xstar]
        nS = len(sub)
        desc = dual_cone(spec)
        nB, nA = desc.base_count, desc.aux_count
        blk = 2 + nB + nA + 2 * nR * nS
        n = nS + len(part.deceitful) * blk

        eq_rows, eq_rhs, in_rows, in_rhs, triples = [], [], [], [], []
        for k, xp in enumerate(part.deceitful):
            o = nS + k * blk
            a_i, b_i = o, o + 1
            lam0 = o + 2
            v0 = lam0 + nB + nA
            m0 = v0 + nR * nS

            row = np.zeros(n)
            row[a_i] = 1.0
            in_rows.append(row)
            in_rhs.append(0.0)

            if pin_beta:
                # gauge fix: a uniform shift of lam over the suboptimal
                # columns, absorbed by the per-arm cone offsets and by beta,
                # changes nothing; pinning beta = 0 removes the flat
                # direction the Newton system cannot see
                row = np.zeros(n)
                row[b_i] = 1.0
                eq_rows.append(row)
                eq_rhs.append(0.0)

            for rw, rh in zip(desc.system.eq_coeffs, desc.system.eq_rhs):
                row = np.zeros(n)
                row[lam0:lam0 + nB + nA] = rw
                eq_rows.append(row)
                eq_rhs.append(rh)
            for rw, rh in zip(desc.system.in_coeffs, desc.system.in_rhs):
                row = np.zeros(n)
                row[lam0:lam0 + nB + nA] = rw
                in_rows.append(row)
                in_rhs.append(rh)

            scalar = np.zeros(n)
            for j, x in enumerate(sub):
                for r in range(nR):
                    vi = v0 + j * nR + r
                    mi = m0 + j * nR + r
                    row = np.zeros(n)
                    row[vi] = 1.0
                    row[j] = -1.0
                    row[lam0 + x * nR + r] = 1.0
                    row[b_i] = 1.0
                    if x == xp:
                        row[a_i] = levels[r]
                    eq_rows.append(row)
                    eq_rhs.append(0.0)
                    if P.probs[r, x] > 0.0:
                        triples.append((mi, vi, j))
                        scalar[mi] = P.probs[r, x]
                    else:
                        # a zero-probability entry carries no log term, yet
                        # the inner value must stay nonnegative; its slack
                        # variable would otherwise run away below the cap
                        row = np.zeros(n)
                        row[vi] = 1.0
                        in_rows.append(row)
                        in_rhs.append(0.0)
                        row = np.zeros(n)
                        row[mi] = 1.0
                        eq_rows.append(row)
                        eq_rhs.append(0.0)
            scalar[lam0 + xstar * nR:lam0 + xstar * nR + nR] = \
                -P.probs[:, xstar]
            scalar[a_i] += best
            scalar[b_i] += float(nS)
            in_rows.append(scalar)
            in_rhs.append(1.0)

        # an aux multiplier whose only appearance is its own sign row has no
        # counterweight: the barrier alone would push it to infinity; pin the
        # variable and retire the row, which would otherwise forbid the pin
        A_eq = np.array(eq_rows).reshape((len(eq_rows), n))
        A_in = np.array(in_rows)
        drop = set()
        for k in range(len(part.deceitful)):
            lam0 = nS + k * blk + 2
            for a in range(nA):
                col = lam0 + nB + a
                if A_eq.size and np.any(A_eq[:, col]):
                    continue
                hits = np.nonzero(A_in[:, col])[0]
                if len(hits) and all(np.count_nonzero(A_in[i]) == 1
                                     for i in hits):
                    drop.update(int(i) for i in hits)
                    row = np.zeros(n)
                    row[col] = 1.0
                    eq_rows.append(row)
                    eq_rhs.append(0.0)
        if drop:
            keep = [i for i in range(len(in_rows)) if i not in drop]
            A_in = A_in[keep]
            in_rhs = [in_rhs[i] for i in keep]

        self.n, self.nS, self.blk = n, nS, blk
        self.nR, self.nB, self.nA = nR, nB, nA
        self.sub, self.arms = sub, arms
        self.xstar, self.best, self.levels = xstar, best, levels
        self.deceitful = list(part.deceitful)
        self.A_eq = np.array(eq_rows).reshape((len(eq_rows), n))
        self.b_eq = np.array(eq_rhs)
        self.A_in = A_in
        self.b_in = np.array(in_rhs)
        self.triples = triples
        # every row and triple couples one rival's variables with the
        # shared rates only, enabling block-elimination Newton steps
        self.groups = [range(nS + k * blk, nS + (k + 1) * blk)
                       for k in range(len(part.deceitful))]

    def block_offset(self, k):
        return self.nS + k * self.blk

    def v_index(self, k, j, r):
        """Inner-value slot of (suboptimal arm j, level r) in block k."""
        return self.block_offset(k) + 2 + self.nB + self.nA + j * self.nR + r

    def read_duals(self, pt):
        duals = {}
        for k, xp in enumerate(self.deceitful):
            o = self.block_offset(k)
            lam = pt[o + 2:o + 2 + self.nB].reshape(
                (self.nR, self.arms), order="F").copy()
            aux = pt[o + 2 + self.nB:o + 2 + self.nB + self.nA].copy()
            duals[xp] = DualVars(max(float(pt[o]), 0.0), float(pt[o + 1]),
                                 lam, aux)
        return duals


def _warm_deep_point(bl, P, prev, lift=0.02):
    """Interior restart of the dual program from a nearby solution.

    Carries the structure multipliers over unchanged (their rows do not
    move between nearby programs), lifts the rates multiplicatively (the
    cone cap eta log(v / eta) with v moving one for one in eta is
    nondecreasing in eta), recomputes every inner value from its defining
    row, and re-margins the log slacks by half the scalar-row surplus.
    Returns None when the carried point cannot certify the new scalar
    rows with strictly positive margins; callers then solve cold.
    """
    nS = bl.nS
    eta = prev[:nS]
    if np.any(eta <= 0.0):
        return None
    x0 = prev.copy()
    x0[:nS] = eta * (1.0 + lift)
    for k, xp in enumerate(bl.deceitful):
        o = bl.block_offset(k)
        alpha, beta = float(x0[o]), float(x0[o + 1])
        if alpha <= 0.0:
            return None
        lam = x0[o + 2:o + 2 + bl.nB]
        v0 = o + 2 + bl.nB + bl.nA
        m0 = v0 + bl.nR * nS
        surplus = alpha * bl.best + beta * nS - float(
            P.probs[:, bl.xstar]
            @ lam[bl.xstar * bl.nR:(bl.xstar + 1) * bl.nR]) - 1.0
        caps = []
        mass = 0.0
        for j, x in enumerate(bl.sub):
            for r in range(bl.nR):
                v = float(x0[j]) - float(lam[x * bl.nR + r]) - beta
                if x == xp:
                    v -= alpha * bl.levels[r]
                if v <= 0.0:
                    return None
                x0[v0 + j * bl.nR + r] = v
                p = float(P.probs[r, x])
                if p > 0.0:
                    cap = float(x0[j]) * math.log(v / float(x0[j]))
                    caps.append((m0 + j * bl.nR + r, cap))
                    surplus += p * cap
                    mass += p
                else:
                    x0[m0 + j * bl.nR + r] = 0.0
        if surplus <= 1e-12 or mass <= 0.0:
            return None
        margin = 0.5 * surplus / mass
        for mi, cap in caps:
            x0[mi] = cap - margin
    return x0


def lower_bound_dual(spec, P, eps, validate=True, warm=None):
    """Solve the rate program through its conic dual representation.

    Returns an eps-suboptimal rate vector with its per-rival certificates.
    validate=False skips the structure-membership check of P: empirical
    matrices are fed as-is, never projected onto the structure.

    warm, when given, is a mutable dict carrying the previous solution of
    a nearby program (same rival set and dimensions); the solve restarts
    from it and the dict is refreshed in place.  A rejected or failed
    warm start falls back to a cold solve automatically.
    """
    arms = P.arm_count
    if not 0.0 < eps < 1.0 / arms:
        raise ValueError("eps must lie in (0, 1/arms)")
    if validate and not feasible_for_spec(spec, P.probs, tol=1e-7):
        raise ValueError("P violates the structure constraints")
    part = classify_arms(spec, P)
    if not part.deceitful:
        return LowerBoundResult(0.0, RateVector(np.zeros(arms)), {},
                                STATUS_OPTIMAL)

    bl = _DualBlocks(spec, P, part)
    means = bl.levels @ P.probs
    c = np.zeros(bl.n)
    c[:bl.nS] = bl.best - means[bl.sub]
    prog = ConicProgram(bl.n, c=c,
                        A_eq=bl.A_eq, b_eq=bl.b_eq,
                        A_in=bl.A_in, b_in=bl.b_in,
                        triples=bl.triples, groups=bl.groups)
    tol = min(eps, 1e-2)
    key = (tuple(bl.deceitful), bl.xstar, bl.n, prog.A_eq.shape[0],
           prog.A_in.shape[0], len(prog.triples))
    x0 = t_start = None
    if warm is not None and warm.get("key") == key:
        x0 = _warm_deep_point(bl, P, warm["x0"])
        if x0 is not None:
            t_start = warm.get("t")
    sol = solve(prog, tol=tol, x0=x0, t_start=t_start)
    if x0 is not None and sol.status != STATUS_OPTIMAL:
        sol = solve(prog, tol=tol)
    if warm is not None:
        warm.clear()
        if sol.status == STATUS_OPTIMAL and sol.gap > 0:
            nu = prog.A_in.shape[0] + 3 * len(prog.triples)
            warm["key"] = key
            warm["x0"] = sol.point.copy()
            warm["t"] = nu / sol.gap
    rates = np.zeros(arms)
    if sol.point is None:
        return LowerBoundResult(0.0, RateVector(rates), {}, sol.status)
    pt = sol.point
    for j, x in enumerate(bl.sub):
        rates[x] = max(float(pt[j]), 0.0)
    value = float((bl.best - means) @ rates)
    return LowerBoundResult(max(value, 0.0), RateVector(rates),
                            bl.read_duals(pt), sol.status)
