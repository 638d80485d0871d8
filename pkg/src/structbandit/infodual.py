"""Information distances and the dual machinery of the certified-exploration policy.

The central objects are

  info_distance   generalized KL divergence between nonnegative measures
  dual_value      the concave dual objective of the per-arm distance program
  dual_test       its maximum along the ray {rho * mu : rho >= 0}
  dist_oracle     the primal distance program, solved through the conic solver
  halfspace_distance
                  the same KL objective minimized over a single half-space,
                  which equals dual_test at dual-feasible mu

Conventions used throughout: 0 * log(0/a) = 0 and b * log(b/0) = +inf for
b > 0, so info_distance is +inf exactly when absolute continuity fails.
"""

import math

import numpy as np

from .core import best_arm_and_value
from .solver import ConicProgram, STATUS_OPTIMAL, solve
from .structures import feasible_for_spec, primal_cone, rew_max


class Measure:
    """Nonnegative finite weights over a reward grid (no normalization)."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("measure weights must be nonnegative and finite")
        self.weights = w


class RateVector:
    """Per-arm nonnegative exploration rates (proxy for N(x)/log t)."""

    def __init__(self, rates):
        r = np.asarray(rates, dtype=float)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("rates must be nonnegative and finite")
        self.rates = r


class DualVars:
    """Dual vector (alpha, beta, lambda) plus auxiliary cone multipliers.

    alpha >= 0 and beta free are scalars; lam is an |R| x |X| matrix that
    must live in the dual cone of the structure; aux carries whatever
    multipliers certify that membership (structure-specific).
    """

    def __init__(self, alpha, beta, lam, aux=None):
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.lam = np.asarray(lam, dtype=float)
        self.aux = aux

    @classmethod
    def zero(cls, levels, arms):
        return cls(0.0, 0.0, np.zeros((levels, arms)))

    def scaled(self, rho):
        return DualVars(rho * self.alpha, rho * self.beta, rho * self.lam,
                        self.aux)


def _weights(m):
    return m.weights if isinstance(m, Measure) else np.asarray(m, dtype=float)


def info_distance(Mp, M):
    """Generalized KL divergence sum_r Mp log(Mp/M) - Mp + M.

    Returns +inf exactly when Mp puts weight where M has none.
    """
    a = _weights(Mp)
    b = _weights(M)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("measures must be nonnegative")
    pos = a > 0
    if np.any(b[pos] == 0):
        return math.inf
    out = float(b.sum() - a.sum())
    ap = a[pos]
    out += float(np.sum(ap * np.log(ap / b[pos])))
    # the divergence is nonnegative; near-identical arguments can land a
    # hair below zero through cancellation alone
    return max(out, 0.0)


def bernoulli_kl(p, q):
    """KL divergence between Bernoulli(p) and Bernoulli(q)."""
    return info_distance(np.array([1.0 - p, p]), np.array([1.0 - q, q]))


def kl_chain_decomposition(Phat, P, N):
    """Chain-rule split of N * I(Phat, P) into Bernoulli pieces.

    Conditioning level by level, the scaled divergence of two k-point
    probability measures equals a sum of k-1 Bernoulli divergences taken
    at the conditional head probabilities, each weighted by the mass that
    survives to that level.  Returns (left, right); the two agree whenever
    both are finite.
    """
    phat = _weights(Phat)
    p = _weights(P)
    left = N * info_distance(phat, p)
    right = 0.0
    tail_hat = 1.0
    tail_p = 1.0
    for r in range(len(p) - 1):
        n_r = N * tail_hat
        if n_r > 0:
            head_hat = phat[r] / tail_hat
            head_p = p[r] / tail_p if tail_p > 0 else (0.0 if phat[r] == 0 else 1.0)
            right += n_r * bernoulli_kl(min(head_hat, 1.0), min(head_p, 1.0))
        tail_hat -= phat[r]
        tail_p -= p[r]
        if tail_hat <= 0 and tail_p <= 0:
            break
    return left, right


def _dual_pieces(eta, xprime, P, mu):
    """Shared setup for dual_value / dual_test.

    Returns (sub, c, K) where sub indexes the suboptimal arms, c(r, x) is
    the inner linear form lam + beta + alpha r 1(x = x') restricted to those
    columns, and K collects the eta-independent linear terms of the dual
    objective (per unit rho).
    """
    xstar, rew_star = best_arm_and_value(P)
    arms = P.arm_count
    sub = np.array([x for x in range(arms) if x != xstar], dtype=int)
    r_vals = P.support.values
    c = mu.lam[:, sub] + mu.beta
    where = np.where(sub == xprime)[0]
    if where.size:
        c[:, where[0]] += mu.alpha * r_vals
    K = (-float(mu.lam[:, xstar] @ P.probs[:, xstar])
         + mu.alpha * rew_star + mu.beta * len(sub))
    return sub, c, K


def dual_value(eta, xprime, P, mu):
    """Concave dual objective of the distance program (can be -inf).

    eta: per-arm rates; xprime: the suboptimal arm under test; mu: dual
    vector.  The value is -inf as soon as eta(x) - lam(r,x) - beta
    - alpha r 1(x=x') goes negative on any suboptimal column; rate-zero
    arms contribute nothing beyond that domain restriction.
    """
    eta = np.asarray(eta, dtype=float)
    sub, c, K = _dual_pieces(eta, xprime, P, mu)
    inner = eta[sub][None, :] - c
    if np.any(inner < 0):
        return -math.inf
    total = K
    Psub = P.probs[:, sub]
    for j, x in enumerate(sub):
        if eta[x] == 0:
            continue
        col = inner[:, j]
        w = Psub[:, j]
        live = w > 0
        if np.any(col[live] == 0):
            return -math.inf
        total += eta[x] * float(np.log(col[live] / eta[x]) @ w[live])
    return total


def _dual_ray(eta, xprime, P, mu):
    """Evaluator f(rho) = dual_value(eta, ..., rho * mu) plus its domain cap.

    Returns (f, rho_max) where rho_max is the largest rho keeping every
    inner argument nonnegative (inf when the ray never leaves the domain).
    """
    eta = np.asarray(eta, dtype=float)
    sub, c, K = _dual_pieces(eta, xprime, P, mu)
    Psub = P.probs[:, sub]
    eta_sub = eta[sub]

    pos = c > 0
    if np.any(pos):
        rho_max = float(np.min((eta_sub[None, :] / np.where(pos, c, 1.0))[pos]))
    else:
        rho_max = math.inf

    live = (Psub > 0) & (eta_sub[None, :] > 0)
    c_live = c[live]
    w_live = (Psub * eta_sub[None, :])[live]
    eta_live = np.broadcast_to(eta_sub[None, :], c.shape)[live]

    def f(rho):
        # every live weight is strictly positive, so a zero inner argument
        # already sends the objective to -inf
        if rho > rho_max:
            return -math.inf
        col = eta_live - rho * c_live
        if np.any(col <= 0):
            return -math.inf
        return float(np.sum(w_live * np.log(col / eta_live))) + rho * K

    return f, rho_max


def _dual_test_max(eta, xprime, P, mu, step_tol=1e-9, max_iter=200,
                   target=None, probe=None):
    """Ray maximum plus its maximizer, with an optional short circuit.

    When target is given, the search returns the moment any evaluated
    point reaches it; the value is then only a certified lower bound of
    the maximum, which is all a threshold comparison needs.  probe is a
    first rho to try, typically a maximizer remembered from a nearby
    problem.
    """
    f, rho_max = _dual_ray(eta, xprime, P, mu)
    if rho_max == 0:
        return 0.0, 0.0
    if target is not None and probe is not None and probe > 0:
        rp = probe if probe <= rho_max else rho_max
        vp = f(rp)
        if vp >= target:
            return vp, rp

    hi = 1.0 if rho_max == math.inf else min(1.0, rho_max / 2)
    prev, prev_rho = 0.0, 0.0
    grew = False
    for _ in range(max_iter):
        if hi >= rho_max:
            hi = rho_max
            break
        v = f(hi)
        if target is not None and v >= target:
            return v, hi
        if v < prev:
            break
        if v > prev:
            grew = True
        prev, prev_rho = v, hi
        if 2 * hi >= rho_max:
            hi = rho_max
            break
        hi *= 2
    else:
        # still growing after the expansion cap: treat as unbounded
        if grew:
            return math.inf, hi
        return max(prev, 0.0), prev_rho if prev > 0.0 else 0.0

    invphi = (math.sqrt(5.0) - 1) / 2
    a, b = 0.0, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > step_tol and it < max_iter:
        if target is not None and max(f1, f2) >= target:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        it += 1
    mid = (a + b) / 2
    cand = [(f1, x1), (f2, x2), (f(mid), mid), (0.0, 0.0)]
    # the maximizer can sit exactly on the domain boundary
    if rho_max < math.inf and b >= rho_max - step_tol:
        cand.append((f(rho_max), rho_max))
    return max(cand, key=lambda p: p[0])


def dual_test(eta, xprime, P, mu, step_tol=1e-9, max_iter=200):
    """Best dual value along the ray rho * mu, rho >= 0.

    The objective is univariate concave on its domain, so a doubling
    bracket followed by golden-section search suffices.  rho = 0 is always
    feasible with value 0, hence the result is nonnegative.  A ray along
    which the objective keeps growing (infinite information distance)
    returns +inf.
    """
    return _dual_test_max(eta, xprime, P, mu, step_tol, max_iter)[0]


# ------------------------------------------------------------- projections

def _rate_array(eta, arms):
    r = eta.rates if isinstance(eta, RateVector) else np.asarray(eta, dtype=float)
    if r.shape != (arms,) or np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("rates must be one nonnegative finite value per arm")
    return r


def _kl_epigraph(c, eq, eqr, triples, live, q_index, offset, n):
    """Wire eta * P log(P / Q) terms through exponential-cone epigraphs.

    Each live (r, x) entry gets a pair (u, w): w is pinned to the constant
    P(r, x), the triple (u, Q(r,x), w) caps u at w log(Q/w), and the
    objective carries -eta(x) u, so the minimum value is sum eta(x) I.
    Entries with eta = 0 or P = 0 contribute nothing and must stay out:
    a u with no objective pull has no finite optimum.
    """
    for i, (r, x, p, e) in enumerate(live):
        u = offset + 2 * i
        w = u + 1
        c[u] = -e
        row = np.zeros(n)
        row[w] = 1.0
        eq.append(row)
        eqr.append(p)
        triples.append((u, q_index(r, x), w))


def dist_oracle(eta, xprime, P, spec):
    """Rate-weighted information distance to the deceitful set of xprime.

    Minimizes sum_x eta(x) I(P(x), Q(x)) over structure-feasible Q that
    agree with P on the optimal column and give arm xprime a mean at least
    the optimal value.  Arms whose deceitful set is empty return +inf.
    """
    xstar, best = best_arm_and_value(P)
    rates = _rate_array(eta, P.arm_count)
    if not feasible_for_spec(spec, P.probs, tol=1e-7):
        raise ValueError("P does not satisfy the structure constraints")
    if rew_max(spec, P, xprime) <= best + 1e-7:
        return math.inf

    levels = np.asarray(P.support.values, dtype=float)
    nR, nX = P.probs.shape
    nB = nR * nX
    live = [(r, x, float(P.probs[r, x]), float(rates[x]))
            for x in range(nX) if x != xstar and rates[x] > 0
            for r in range(nR) if P.probs[r, x] > 0]
    if not live:
        return 0.0

    desc = primal_cone(spec)
    nA = desc.aux_count
    n = nB + nA + 2 * len(live)

    pinned = {nB + desc.mass_aux: 1.0}
    for r in range(nR):
        pinned[xstar * nR + r] = float(P.probs[r, xstar])

    eq, eqr, ins, inr = [], [], [], []

    def lifted(row):
        out = np.zeros(n)
        out[:nB + nA] = row
        return out

    # structure rows; anything supported entirely on pinned entries is a
    # constant once the pins are in place (feasibility of P covers it), and
    # keeping such a row would leave no strict interior when it is tight
    for row, rhs in zip(desc.system.eq_coeffs, desc.system.eq_rhs):
        if all(int(k) in pinned for k in np.nonzero(row)[0]):
            continue
        eq.append(lifted(row))
        eqr.append(rhs)
    for row, rhs in zip(desc.system.in_coeffs, desc.system.in_rhs):
        if all(int(k) in pinned for k in np.nonzero(row)[0]):
            continue
        ins.append(lifted(row))
        inr.append(rhs)

    for k, val in pinned.items():
        row = np.zeros(n)
        row[k] = 1.0
        eq.append(row)
        eqr.append(val)

    row = np.zeros(n)
    row[xprime * nR:(xprime + 1) * nR] = levels
    ins.append(row)
    inr.append(best)

    c = np.zeros(n)
    triples = []
    _kl_epigraph(c, eq, eqr, triples, live, lambda r, x: x * nR + r,
                 nB + nA, n)

    prog = ConicProgram(n, c=c, A_eq=np.asarray(eq), b_eq=np.asarray(eqr),
                        A_in=np.asarray(ins), b_in=np.asarray(inr),
                        triples=triples)
    sol = solve(prog, tol=1e-8)
    if sol.point is None:
        return math.inf
    if sol.status != STATUS_OPTIMAL:
        raise RuntimeError(f"projection solve ended with {sol.status}")
    return max(float(sol.value), 0.0)


def halfspace_distance(eta, xprime, P, mu, spec):
    """Information distance to the halfspace relaxation cut out by mu.

    The feasible set keeps the optimal column of P and imposes the single
    linear inequality the dual vector defines; no structure constraints
    enter.  Matches dual_test when mu is dual-feasible and xprime is
    deceitful.
    """
    xstar, best = best_arm_and_value(P)
    rates = _rate_array(eta, P.arm_count)
    if not feasible_for_spec(spec, P.probs, tol=1e-7):
        raise ValueError("P does not satisfy the structure constraints")
    if mu.alpha == 0 and mu.beta == 0 and not np.any(mu.lam):
        return 0.0

    levels = np.asarray(P.support.values, dtype=float)
    nR, nX = P.probs.shape
    sub = [x for x in range(nX) if x != xstar]
    nQ = nR * len(sub)
    live = [(r, j, float(P.probs[r, sub[j]]), float(rates[sub[j]]))
            for j in range(len(sub)) if rates[sub[j]] > 0
            for r in range(nR) if P.probs[r, sub[j]] > 0]

    n = nQ + 2 * len(live)
    eq, eqr, ins, inr = [], [], [], []

    for j in range(len(sub)):
        row = np.zeros(n)
        row[j * nR:(j + 1) * nR] = 1.0
        eq.append(row)
        eqr.append(1.0)
    for k in range(nQ):
        row = np.zeros(n)
        row[k] = 1.0
        ins.append(row)
        inr.append(0.0)

    # the pinned optimal column contributes a constant, moved to the rhs
    cut = np.zeros(n)
    for j, x in enumerate(sub):
        coef = mu.lam[:, x] + mu.beta
        if x == xprime:
            coef = coef + mu.alpha * levels
        cut[j * nR:(j + 1) * nR] = coef
    rhs = (mu.beta * nX + mu.alpha * best
           - float(P.probs[:, xstar] @ (mu.lam[:, xstar] + mu.beta)))
    if np.max(np.abs(cut)) <= 1e-14:
        if rhs > 1e-12:
            return math.inf
    else:
        ins.append(cut)
        inr.append(rhs)

    c = np.zeros(n)
    triples = []
    _kl_epigraph(c, eq, eqr, triples, live, lambda r, j: j * nR + r,
                 nQ, n)

    prog = ConicProgram(n, c=c, A_eq=np.asarray(eq), b_eq=np.asarray(eqr),
                        A_in=np.asarray(ins), b_in=np.asarray(inr),
                        triples=triples)
    sol = solve(prog, tol=1e-8)
    if sol.point is None:
        return math.inf
    if sol.status != STATUS_OPTIMAL:
        raise RuntimeError(f"projection solve ended with {sol.status}")
    return max(float(sol.value), 0.0)
