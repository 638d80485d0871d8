"""Convex structural information as polyhedral cone descriptions.

The feasible reward-matrix set of a structured bandit is encoded twice: as
the cone obtained by homogenizing the column masses to a shared scale, and
as the dual of that cone, both written as explicit linear systems over the
flattened matrix entries plus auxiliary multipliers.  Entry (r, x) of a
matrix sits at flat index x * len(levels) + r (column-major).

Four structure kinds are supported: separable (per-arm linear constraints
on the reward column; generic when no constraints are given), lipschitz
(Bernoulli rewards, mean function slope-bounded by L against a symmetric
distance), linear (arm means lie in the span of shared feature vectors),
and dispersion (per-arm second-moment to mean ratio bound).

All objects here are immutable after construction and safe to share across
concurrent runs.
"""
import math
from collections import namedtuple

import numpy as np

from .core import RewardMatrix, best_arm_and_value
from .solver import ConicProgram, lp_solve, STATUS_OPTIMAL, STATUS_INFEASIBLE


class LinearSystem:
    """Rows of {v : eq_coeffs v = eq_rhs, in_coeffs v >= in_rhs}."""

    def __init__(self, variable_count, eq_coeffs, eq_rhs, in_coeffs, in_rhs):
        self.variable_count = int(variable_count)
        self.eq_coeffs = _rows(eq_coeffs, self.variable_count)
        self.eq_rhs = _rhs(eq_rhs, self.eq_coeffs.shape[0])
        self.in_coeffs = _rows(in_coeffs, self.variable_count)
        self.in_rhs = _rhs(in_rhs, self.in_coeffs.shape[0])


def _rows(rows, width):
    if rows is None:
        return np.zeros((0, width))
    arr = np.atleast_2d(np.asarray(rows, dtype=float))
    if arr.size == 0:
        return np.zeros((0, width))
    if arr.shape[1] != width:
        raise ValueError("row width does not match variable count")
    return arr

def _rhs(rhs, count):
    if rhs is None:
        arr = np.zeros(0)
    else:
        arr = np.atleast_1d(np.asarray(rhs, dtype=float))
    if arr.shape[0] != count:
        raise ValueError("rhs length does not match row count")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("rhs entries must be finite")
    return arr


class StructureSpec:
    """Parameters of one structure kind; use the factory classmethods."""

    def __init__(self, kind, support, arm_count):
        self.kind = kind
        self.support = support
        self.arm_count = int(arm_count)
        if self.arm_count < 1:
            raise ValueError("need at least one arm")

    @classmethod
    def separable(cls, support, arm_count, constraints=None):
        """constraints: per arm (G, h) meaning G @ column >= h, or None."""
        spec = cls("separable", support, arm_count)
        nR = len(support.values)
        empty = (np.zeros((0, nR)), np.zeros(0))
        norm = []
        for item in (constraints or [None] * spec.arm_count):
            if item is None or item[0] is None:
                norm.append(empty)
                continue
            G = np.atleast_2d(np.asarray(item[0], dtype=float))
            h = np.atleast_1d(np.asarray(item[1], dtype=float))
            if G.shape[1] != nR or h.shape[0] != G.shape[0]:
                raise ValueError("constraint shape mismatch")
            norm.append((G, h))
        if len(norm) != spec.arm_count:
            raise ValueError("need one constraint entry per arm")
        spec.arm_constraints = norm
        return spec

    @classmethod
    def lipschitz(cls, support, positions, L, distances=None):
        levels = np.asarray(support.values, dtype=float)
        if len(levels) != 2 or levels[0] != 0.0 or levels[1] != 1.0:
            raise ValueError("lipschitz structure needs Bernoulli support {0,1}")
        if distances is None:
            pos = np.asarray(positions, dtype=float)
            distances = np.abs(pos[:, None] - pos[None, :])
        else:
            distances = np.asarray(distances, dtype=float)
            pos = None if positions is None else np.asarray(positions, float)
        spec = cls("lipschitz", support, distances.shape[0])
        if L < 0:
            raise ValueError("L must be nonnegative")
        if distances.shape[0] != distances.shape[1]:
            raise ValueError("distance matrix must be square")
        if np.any(np.abs(np.diag(distances)) > 0):
            raise ValueError("distance diagonal must be zero")
        if np.max(np.abs(distances - distances.T)) > 1e-12:
            raise ValueError("distance matrix must be symmetric")
        if np.any(distances < 0):
            raise ValueError("distances must be nonnegative")
        spec.L = float(L)
        spec.positions = pos
        spec.distances = distances
        # metric closure: chained slope constraints tighten to shortest paths
        D = distances.copy()
        for k in range(spec.arm_count):
            D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
        spec.metric_closure = D
        return spec

    @classmethod
    def linear(cls, support, features):
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2d arm-by-dimension array")
        spec = cls("linear", support, features.shape[0])
        spec.features = features
        return spec

    @classmethod
    def dispersion(cls, support, bounds):
        bounds = np.asarray(bounds, dtype=float)
        spec = cls("dispersion", support, bounds.shape[0])
        if np.any(bounds <= 0):
            raise ValueError("dispersion bounds must be positive")
        spec.bounds = bounds
        return spec


class ConeDescription:
    """A lifted linear system whose projection on the base block is a cone.

    Base variables are the flattened matrix entries; mass_aux indexes the
    homogenization scalar inside the aux block for primal cones (None for
    dual cones, which have no such scalar).
    """

    def __init__(self, base_count, aux_labels, system, mass_aux=None):
        self.base_count = base_count
        self.aux_labels = list(aux_labels)
        self.aux_count = len(self.aux_labels)
        self.system = system
        self.mass_aux = mass_aux


def _sep_cone_rows(spec):
    """Per-arm rows (G - h 1^T) q >= 0 homogenizing G m >= h at unit mass."""
    nR = len(spec.support.values)
    out = []
    for x in range(spec.arm_count):
        G, h = spec.arm_constraints[x]
        out.append(G - np.outer(h, np.ones(nR)))
    return out


def primal_cone(spec):
    levels = np.asarray(spec.support.values, dtype=float)
    nR = len(levels)
    nX = spec.arm_count
    nB = nR * nX

    def base_row(width):
        return np.zeros(nB + width)

    if spec.kind == "separable":
        aux = ["theta"]
        eq, eqr, ineq, inr = [], [], [], []
        for x in range(nX):
            row = base_row(1)
            row[x * nR:(x + 1) * nR] = 1.0
            row[nB] = -1.0
            eq.append(row)
            eqr.append(0.0)
        for x, W in enumerate(_sep_cone_rows(spec)):
            for j in range(W.shape[0]):
                row = base_row(1)
                row[x * nR:(x + 1) * nR] = W[j]
                ineq.append(row)
                inr.append(0.0)
        for k in range(nB):
            row = base_row(1)
            row[k] = 1.0
            ineq.append(row)
            inr.append(0.0)
        return ConeDescription(nB, aux, LinearSystem(nB + 1, eq, eqr, ineq, inr),
                               mass_aux=0)

    if spec.kind == "lipschitz":
        aux = ["theta"]
        eq, eqr, ineq, inr = [], [], [], []
        for x in range(nX):
            row = base_row(1)
            row[x * nR:(x + 1) * nR] = 1.0
            row[nB] = -1.0
            eq.append(row)
            eqr.append(0.0)
        for x in range(nX):
            for y in range(nX):
                if x == y:
                    continue
                d = spec.distances[x, y]
                if d == 0.0 and x < y:
                    row = base_row(1)
                    row[x * nR + 1] = 1.0
                    row[y * nR + 1] = -1.0
                    eq.append(row)
                    eqr.append(0.0)
                elif d > 0.0:
                    row = base_row(1)
                    row[nB] = spec.L * d
                    row[x * nR + 1] = -1.0
                    row[y * nR + 1] = 1.0
                    ineq.append(row)
                    inr.append(0.0)
        for k in range(nB):
            row = base_row(1)
            row[k] = 1.0
            ineq.append(row)
            inr.append(0.0)
        return ConeDescription(nB, aux, LinearSystem(nB + 1, eq, eqr, ineq, inr),
                               mass_aux=0)

    if spec.kind == "linear":
        dim = spec.features.shape[1]
        aux = ["theta_mass"] + [f"theta[{i}]" for i in range(dim)]
        width = 1 + dim
        eq, eqr, ineq, inr = [], [], [], []
        for x in range(nX):
            row = base_row(width)
            row[x * nR:(x + 1) * nR] = 1.0
            row[nB] = -1.0
            eq.append(row)
            eqr.append(0.0)
        for x in range(nX):
            row = base_row(width)
            row[x * nR:(x + 1) * nR] = levels
            row[nB + 1:] = -spec.features[x]
            eq.append(row)
            eqr.append(0.0)
        for k in range(nB):
            row = base_row(width)
            row[k] = 1.0
            ineq.append(row)
            inr.append(0.0)
        return ConeDescription(nB, aux,
                               LinearSystem(nB + width, eq, eqr, ineq, inr),
                               mass_aux=0)

    if spec.kind == "dispersion":
        aux = ["theta"]
        eq, eqr, ineq, inr = [], [], [], []
        for x in range(nX):
            row = base_row(1)
            row[x * nR:(x + 1) * nR] = 1.0
            row[nB] = -1.0
            eq.append(row)
            eqr.append(0.0)
        for x in range(nX):
            row = base_row(1)
            row[x * nR:(x + 1) * nR] = spec.bounds[x] * levels - levels**2
            ineq.append(row)
            inr.append(0.0)
        for k in range(nB):
            row = base_row(1)
            row[k] = 1.0
            ineq.append(row)
            inr.append(0.0)
        return ConeDescription(nB, aux, LinearSystem(nB + 1, eq, eqr, ineq, inr),
                               mass_aux=0)

    raise ValueError(f"unknown structure kind {spec.kind!r}")


def dual_cone(spec):
    levels = np.asarray(spec.support.values, dtype=float)
    nR = len(levels)
    nX = spec.arm_count
    nB = nR * nX

    if spec.kind == "separable":
        blocks = _sep_cone_rows(spec)
        sizes = [W.shape[0] for W in blocks]
        aux = [f"gamma[{x}]" for x in range(nX)]
        for x, m in enumerate(sizes):
            aux += [f"z[{x}][{j}]" for j in range(m)]
        width = nB + len(aux)
        z_off = []
        off = nB + nX
        for m in sizes:
            z_off.append(off)
            off += m
        eq, eqr, ineq, inr = [], [], [], []
        for x, W in enumerate(blocks):
            for r in range(nR):
                row = np.zeros(width)
                row[x * nR + r] = 1.0
                row[nB + x] = -1.0
                row[z_off[x]:z_off[x] + sizes[x]] = -W[:, r]
                ineq.append(row)
                inr.append(0.0)
            for j in range(sizes[x]):
                row = np.zeros(width)
                row[z_off[x] + j] = 1.0
                ineq.append(row)
                inr.append(0.0)
        row = np.zeros(width)
        row[nB:nB + nX] = 1.0
        eq.append(row)
        eqr.append(0.0)
        return ConeDescription(nB, aux, LinearSystem(width, eq, eqr, ineq, inr))

    if spec.kind == "lipschitz":
        aux = [f"gamma[{x}]" for x in range(nX)]
        aux += [f"Lam[{x}][{y}]" for x in range(nX) for y in range(nX)]
        width = nB + len(aux)
        lam_off = nB + nX

        def Lix(x, y):
            return lam_off + x * nX + y

        eq, eqr, ineq, inr = [], [], [], []
        for x in range(nX):
            row = np.zeros(width)
            row[x * nR + 0] = 1.0
            row[nB + x] = -1.0
            ineq.append(row)
            inr.append(0.0)
            row = np.zeros(width)
            row[x * nR + 1] = 1.0
            row[nB + x] = -1.0
            for y in range(nX):
                if y == x:
                    continue
                row[Lix(x, y)] += 1.0
                row[Lix(y, x)] -= 1.0
            ineq.append(row)
            inr.append(0.0)
        for x in range(nX):
            for y in range(nX):
                row = np.zeros(width)
                row[Lix(x, y)] = 1.0
                ineq.append(row)
                inr.append(0.0)
        row = np.zeros(width)
        row[nB:nB + nX] = 1.0
        for x in range(nX):
            for y in range(nX):
                row[Lix(x, y)] = -spec.L * spec.distances[x, y]
        eq.append(row)
        eqr.append(0.0)
        return ConeDescription(nB, aux, LinearSystem(width, eq, eqr, ineq, inr))

    if spec.kind == "linear":
        dim = spec.features.shape[1]
        aux = [f"gamma[{x}]" for x in range(nX)]
        aux += [f"nu[{x}]" for x in range(nX)]
        width = nB + len(aux)
        eq, eqr, ineq, inr = [], [], [], []
        for x in range(nX):
            for r in range(nR):
                row = np.zeros(width)
                row[x * nR + r] = 1.0
                row[nB + x] = -1.0
                row[nB + nX + x] = -levels[r]
                ineq.append(row)
                inr.append(0.0)
        row = np.zeros(width)
        row[nB:nB + nX] = 1.0
        eq.append(row)
        eqr.append(0.0)
        for i in range(dim):
            row = np.zeros(width)
            row[nB + nX:] = spec.features[:, i]
            eq.append(row)
            eqr.append(0.0)
        return ConeDescription(nB, aux, LinearSystem(width, eq, eqr, ineq, inr))

    if spec.kind == "dispersion":
        aux = [f"mu[{x}]" for x in range(nX)]
        aux += [f"nu[{x}]" for x in range(nX)]
        width = nB + len(aux)
        eq, eqr, ineq, inr = [], [], [], []
        for x in range(nX):
            for r in range(nR):
                row = np.zeros(width)
                row[x * nR + r] = 1.0
                row[nB + x] = -1.0
                row[nB + nX + x] = levels[r]**2 - spec.bounds[x] * levels[r]
                ineq.append(row)
                inr.append(0.0)
            row = np.zeros(width)
            row[nB + nX + x] = 1.0
            ineq.append(row)
            inr.append(0.0)
        row = np.zeros(width)
        row[nB:nB + nX] = 1.0
        eq.append(row)
        eqr.append(0.0)
        return ConeDescription(nB, aux, LinearSystem(width, eq, eqr, ineq, inr))

    raise ValueError(f"unknown structure kind {spec.kind!r}")


def _column_lp(levels, objective, extra_in=None, extra_rhs=None):
    """min objective . m over the simplex with optional extra >= rows."""
    nR = len(levels)
    A_in = [np.eye(nR)]
    b_in = [np.zeros(nR)]
    if extra_in is not None and len(extra_in):
        A_in.append(np.atleast_2d(extra_in))
        b_in.append(np.atleast_1d(extra_rhs))
    prog = ConicProgram(
        nR, c=objective,
        A_eq=np.ones((1, nR)), b_eq=[1.0],
        A_in=np.vstack(A_in), b_in=np.concatenate(b_in))
    return lp_solve(prog, tol=1e-9)


def rew_max(spec, P, xprime):
    """Largest mean arm xprime can have among matrices agreeing with P on
    the optimal column."""
    levels = np.asarray(spec.support.values, dtype=float)
    xstar, best = best_arm_and_value(P)
    if xprime == xstar:
        return best

    if spec.kind == "lipschitz":
        return min(1.0, best + spec.L * spec.metric_closure[xprime, xstar])

    if spec.kind == "separable":
        G, h = spec.arm_constraints[xprime]
        if G.shape[0] == 0:
            return float(levels[-1])
        sol = _column_lp(levels, -levels, G, h)
        if sol.status != STATUS_OPTIMAL:
            raise RuntimeError(f"reward bound LP ended with {sol.status}")
        return -sol.value

    if spec.kind == "dispersion":
        r1 = float(levels[levels > 0][0]) if np.any(levels > 0) else None
        g = spec.bounds[xprime]
        if r1 is None or g < r1 - 1e-12:
            return 0.0
        if g <= r1 + 1e-12:
            return r1
        sol = _column_lp(levels, -levels,
                         (g * levels - levels**2)[None, :], [0.0])
        if sol.status != STATUS_OPTIMAL:
            raise RuntimeError(f"reward bound LP ended with {sol.status}")
        return -sol.value

    if spec.kind == "linear":
        return _rew_max_linear(spec, P, xprime, levels, xstar, best)

    raise ValueError(f"unknown structure kind {spec.kind!r}")


def _rew_max_linear(spec, P, xprime, levels, xstar, best):
    """Joint LP over the free columns and the shared parameter vector."""
    nR = len(levels)
    free = [x for x in range(spec.arm_count) if x != xstar]
    dim = spec.features.shape[1]
    n = len(free) * nR + dim
    th_off = len(free) * nR
    eq, eqr = [], []
    for i, x in enumerate(free):
        row = np.zeros(n)
        row[i * nR:(i + 1) * nR] = 1.0
        eq.append(row)
        eqr.append(1.0)
        row = np.zeros(n)
        row[i * nR:(i + 1) * nR] = levels
        row[th_off:] = -spec.features[x]
        eq.append(row)
        eqr.append(0.0)
    row = np.zeros(n)
    row[th_off:] = spec.features[xstar]
    eq.append(row)
    eqr.append(best)
    A_in = np.zeros((len(free) * nR, n))
    A_in[:, :len(free) * nR] = np.eye(len(free) * nR)
    c = np.zeros(n)
    i = free.index(xprime)
    c[i * nR:(i + 1) * nR] = -levels
    prog = ConicProgram(n, c=c, A_eq=eq, b_eq=eqr,
                        A_in=A_in, b_in=np.zeros(A_in.shape[0]))
    sol = lp_solve(prog, tol=1e-9)
    if sol.status != STATUS_OPTIMAL:
        raise RuntimeError(f"reward bound LP ended with {sol.status}")
    return -sol.value


ArmPartition = namedtuple("ArmPartition", ["optimal", "deceitful",
                                           "non_deceitful"])


def classify_arms(spec, P):
    """Split suboptimal arms by whether their reward bound beats the best
    mean; only the bound's value matters, never the maximizing matrix."""
    xstar, best = best_arm_and_value(P)
    deceitful, plain = [], []
    for x in range(P.probs.shape[1]):
        if x == xstar:
            continue
        if rew_max(spec, P, x) > best + 1e-7:
            deceitful.append(x)
        else:
            plain.append(x)
    return ArmPartition(xstar, deceitful, plain)


def feasible_for_spec(spec, probs, tol=1e-9):
    """Direct predicate check of the structure constraints at unit mass."""
    levels = np.asarray(spec.support.values, dtype=float)
    if np.any(probs < -tol):
        return False
    if np.max(np.abs(probs.sum(axis=0) - 1.0)) > tol:
        return False
    if spec.kind == "separable":
        for x in range(spec.arm_count):
            G, h = spec.arm_constraints[x]
            if G.shape[0] and np.min(G @ probs[:, x] - h) < -tol:
                return False
        return True
    if spec.kind == "lipschitz":
        m = probs[1]
        slack = spec.L * spec.distances - (m[:, None] - m[None, :])
        return bool(np.min(slack) >= -tol)
    if spec.kind == "linear":
        means = levels @ probs
        th, *_ = np.linalg.lstsq(spec.features, means, rcond=None)
        return bool(np.max(np.abs(spec.features @ th - means)) <= tol)
    if spec.kind == "dispersion":
        num = levels**2 @ probs
        den = levels @ probs
        return bool(np.min(spec.bounds * den - num) >= -tol)
    raise ValueError(f"unknown structure kind {spec.kind!r}")


def _project_column(levels, q, extra_in, extra_rhs):
    """min sum |m - q| over the simplex cut by extra rows; split variables."""
    nR = len(levels)
    n = 2 * nR
    c = np.zeros(n)
    c[nR:] = 1.0
    rows = [np.concatenate([np.eye(nR), np.zeros((nR, nR))], axis=1)]
    rhs = [np.zeros(nR)]
    if extra_in is not None and len(extra_in):
        block = np.zeros((len(extra_in), n))
        block[:, :nR] = np.atleast_2d(extra_in)
        rows.append(block)
        rhs.append(np.atleast_1d(extra_rhs))
    rows.append(np.concatenate([-np.eye(nR), np.eye(nR)], axis=1))
    rhs.append(-q)
    rows.append(np.concatenate([np.eye(nR), np.eye(nR)], axis=1))
    rhs.append(q)
    eq = np.zeros((1, n))
    eq[0, :nR] = 1.0
    prog = ConicProgram(n, c=c, A_eq=eq, b_eq=[1.0],
                        A_in=np.vstack(rows), b_in=np.concatenate(rhs))
    sol = lp_solve(prog, tol=1e-9)
    if sol.status == STATUS_INFEASIBLE:
        raise RuntimeError("structure set is empty for these parameters")
    if sol.status != STATUS_OPTIMAL:
        raise RuntimeError(f"projection LP ended with {sol.status}")
    return sol.point[:nR]


def _project_joint(spec, probs):
    """Joint projection for structures whose columns are coupled."""
    levels = np.asarray(spec.support.values, dtype=float)
    nR = len(levels)
    nX = spec.arm_count
    nB = nR * nX
    extra = spec.features.shape[1] if spec.kind == "linear" else 0
    n = nB + extra + nB
    s_off = nB + extra
    qf = probs.flatten(order="F")
    c = np.zeros(n)
    c[s_off:] = 1.0
    eq, eqr = [], []
    for x in range(nX):
        row = np.zeros(n)
        row[x * nR:(x + 1) * nR] = 1.0
        eq.append(row)
        eqr.append(1.0)
    ineq, inr = [], []
    block = np.zeros((nB, n))
    block[:, :nB] = np.eye(nB)
    ineq.append(block)
    inr.append(np.zeros(nB))
    if spec.kind == "lipschitz":
        for x in range(nX):
            for y in range(nX):
                if x == y:
                    continue
                d = spec.distances[x, y]
                if d == 0.0 and x < y:
                    row = np.zeros(n)
                    row[x * nR + 1] = 1.0
                    row[y * nR + 1] = -1.0
                    eq.append(row)
                    eqr.append(0.0)
                elif d > 0.0:
                    row = np.zeros(n)
                    row[x * nR + 1] = -1.0
                    row[y * nR + 1] = 1.0
                    ineq.append(row[None, :])
                    inr.append(np.array([-spec.L * d]))
    else:
        for x in range(nX):
            row = np.zeros(n)
            row[x * nR:(x + 1) * nR] = levels
            row[nB:nB + extra] = -spec.features[x]
            eq.append(row)
            eqr.append(0.0)
    up = np.zeros((nB, n))
    up[:, :nB] = -np.eye(nB)
    up[:, s_off:] = np.eye(nB)
    ineq.append(up)
    inr.append(-qf)
    lo = np.zeros((nB, n))
    lo[:, :nB] = np.eye(nB)
    lo[:, s_off:] = np.eye(nB)
    ineq.append(lo)
    inr.append(qf)
    prog = ConicProgram(n, c=c, A_eq=eq, b_eq=eqr,
                        A_in=np.vstack(ineq), b_in=np.concatenate(inr))
    sol = lp_solve(prog, tol=1e-9)
    if sol.status == STATUS_INFEASIBLE:
        raise RuntimeError("structure set is empty for these parameters")
    if sol.status != STATUS_OPTIMAL:
        raise RuntimeError(f"projection LP ended with {sol.status}")
    return sol.point[:nB].reshape((nR, nX), order="F")


def project_l1(spec, Q):
    """Closest feasible reward matrix to Q in entrywise l1 distance."""
    levels = np.asarray(spec.support.values, dtype=float)
    nR = len(levels)
    probs = Q.probs
    if feasible_for_spec(spec, probs, tol=1e-12):
        return RewardMatrix(probs.copy(), spec.support)

    if spec.kind == "separable":
        cols = []
        for x in range(spec.arm_count):
            G, h = spec.arm_constraints[x]
            if G.shape[0] and not np.all(G @ probs[:, x] >= h - 1e-12):
                cols.append(_project_column(levels, probs[:, x], G, h))
            else:
                cols.append(probs[:, x])
        out = np.column_stack(cols)
    elif spec.kind == "dispersion":
        pos = levels > 0
        r1 = float(levels[pos][0]) if np.any(pos) else math.inf
        r1_idx = int(np.argmax(pos)) if np.any(pos) else -1
        cols = []
        for x in range(spec.arm_count):
            q = probs[:, x]
            g = spec.bounds[x]
            if float(levels**2 @ q) <= g * float(levels @ q) + 1e-12:
                cols.append(q)
            elif g < r1 - 1e-12:
                col = np.zeros(nR)
                col[0] = 1.0
                cols.append(col)
            elif g <= r1 + 1e-12:
                col = np.zeros(nR)
                col[0] = q[0]
                col[r1_idx] = 1.0 - q[0]
                cols.append(col)
            else:
                cols.append(_project_column(
                    levels, q, (g * levels - levels**2)[None, :], [0.0]))
        out = np.column_stack(cols)
    else:
        out = _project_joint(spec, probs)

    if np.min(out) < -1e-6 or np.max(np.abs(out.sum(axis=0) - 1.0)) > 1e-6:
        raise RuntimeError("projection left the stochastic set")
    out = np.clip(out, 0.0, None)
    out /= out.sum(axis=0, keepdims=True)
    return RewardMatrix(out, spec.support)
