"""Cone descriptions, arm classification, and l1 projection.

Reference checks use the two-phase simplex in tests/simplex_oracle.py for
every LP-valued claim, and closed-form predicates for cone membership.
"""
import math

import numpy as np
import pytest

from structbandit.core import RewardSupport, RewardMatrix, best_arm_and_value, mean_reward
from structbandit.structures import (
    LinearSystem,
    StructureSpec,
    ConeDescription,
    primal_cone,
    dual_cone,
    rew_max,
    classify_arms,
    project_l1,
)
from simplex_oracle import simplex_solve


def rows_hold(system, v, tol=1e-9):
    """Direct evaluation of all rows at a full (base + aux) vector."""
    v = np.asarray(v, dtype=float)
    if system.eq_coeffs.shape[0]:
        if np.max(np.abs(system.eq_coeffs @ v - system.eq_rhs)) > tol:
            return False
    if system.in_coeffs.shape[0]:
        if np.min(system.in_coeffs @ v - system.in_rhs) < -tol:
            return False
    return True


def base_feasible(cone, base, tol=1e-9):
    """Simplex feasibility of the lifted system with the base part pinned."""
    n = cone.base_count + cone.aux_count
    pin = np.zeros((cone.base_count, n))
    pin[:, : cone.base_count] = np.eye(cone.base_count)
    A_eq = np.vstack([cone.system.eq_coeffs, pin]) if n else pin
    b_eq = np.concatenate([cone.system.eq_rhs, np.asarray(base, dtype=float)])
    st, _, _ = simplex_solve(
        np.zeros(n), A_eq=A_eq, b_eq=b_eq,
        A_in=cone.system.in_coeffs, b_in=cone.system.in_rhs)
    return st == "optimal"


# ---------------------------------------------------------------- samplers

def sample_separable_member(spec, rng):
    """Member of cone(P) by construction: feasible columns, common scale."""
    nR = len(spec.support.values)
    cols = []
    for x in range(spec.arm_count):
        G, h = spec.arm_constraints[x]
        for _ in range(4000):
            m = rng.dirichlet(np.ones(nR))
            if G.shape[0] == 0 or np.all(G @ m >= h - 1e-12):
                break
        else:
            raise RuntimeError("rejection sampler starved")
        cols.append(m)
    rho = rng.uniform(0.2, 3.0)
    return rho * np.column_stack(cols)


def sample_lipschitz_member(spec, rng):
    raw = rng.uniform(0.1, 0.9, size=spec.arm_count)
    d = spec.metric_closure
    # infimal convolution makes the mean vector Lipschitz for the metric
    means = np.array([np.min(raw + spec.L * d[x]) for x in range(spec.arm_count)])
    rho = rng.uniform(0.2, 3.0)
    return rho * np.vstack([1.0 - means, means])


def sample_linear_member(spec, rng):
    # features carry a bias column, so theta = (0.5, t) keeps means positive
    w = spec.features[:, 1]
    t = rng.uniform(-1.0, 1.0) * 0.35 / max(1.0, float(np.max(np.abs(w))))
    means = 0.5 + t * w
    levels = np.asarray(spec.support.values)
    rmax = levels[-1]
    nR = len(levels)
    Q = np.zeros((nR, spec.arm_count))
    Q[-1] = means / rmax
    Q[0] = 1.0 - Q[-1]
    rho = rng.uniform(0.2, 3.0)
    return rho * Q


def sample_dispersion_member(spec, rng):
    levels = np.asarray(spec.support.values)
    nR = len(levels)
    cols = []
    for x in range(spec.arm_count):
        for _ in range(4000):
            m = rng.dirichlet(np.ones(nR))
            num = float(levels**2 @ m)
            den = float(levels @ m)
            if num <= spec.bounds[x] * den + 1e-12:
                break
        else:
            raise RuntimeError("rejection sampler starved")
        cols.append(m)
    rho = rng.uniform(0.2, 3.0)
    return rho * np.column_stack(cols)


def sample_separable_dual(spec, rng):
    nR = len(spec.support.values)
    lam = np.zeros((nR, spec.arm_count))
    gamma = rng.normal(size=spec.arm_count)
    gamma -= gamma.mean()
    for x in range(spec.arm_count):
        G, h = spec.arm_constraints[x]
        W = G - np.outer(h, np.ones(nR))
        z = rng.uniform(0, 1, size=G.shape[0])
        lam[:, x] = gamma[x] + (W.T @ z if G.shape[0] else 0.0) \
            + rng.uniform(0, 1, size=nR)
    return lam


def sample_lipschitz_dual(spec, rng):
    nX = spec.arm_count
    Lam = rng.uniform(0, 1, size=(nX, nX))
    np.fill_diagonal(Lam, 0.0)
    gamma = rng.normal(size=nX)
    target = spec.L * float(np.sum(spec.distances * Lam))
    gamma += (target - gamma.sum()) / nX
    lam = np.zeros((2, nX))
    lam[0] = gamma + rng.uniform(0, 1, size=nX)
    lam[1] = gamma - Lam.sum(axis=1) + Lam.sum(axis=0) + rng.uniform(0, 1, size=nX)
    return lam


def sample_linear_dual(spec, rng):
    C = spec.features
    nu = rng.normal(size=spec.arm_count)
    nu -= C @ np.linalg.lstsq(C, nu, rcond=None)[0]  # now C^T nu = 0
    gamma = rng.normal(size=spec.arm_count)
    gamma -= gamma.mean()
    levels = np.asarray(spec.support.values)
    lam = gamma[None, :] + levels[:, None] * nu[None, :]
    return lam + rng.uniform(0, 1, size=lam.shape)


def sample_dispersion_dual(spec, rng):
    nu = rng.uniform(0, 1, size=spec.arm_count)
    mu = rng.normal(size=spec.arm_count)
    mu -= mu.mean()
    levels = np.asarray(spec.support.values)
    lam = np.empty((len(levels), spec.arm_count))
    for x in range(spec.arm_count):
        lam[:, x] = mu[x] - (levels**2 - spec.bounds[x] * levels) * nu[x]
    return lam + rng.uniform(0, 1, size=lam.shape)


def make_specs(rng):
    sup2 = RewardSupport([0.0, 1.0])
    sup3 = RewardSupport([0.0, 0.5, 1.0])
    G_a = np.array([[0.0, -1.0]])
    h_a = np.array([-0.6])
    sep = StructureSpec.separable(sup2, 2, [(G_a, h_a), (None, None)])
    pos = np.sort(rng.uniform(0, 1, size=4))
    lip = StructureSpec.lipschitz(sup2, positions=pos, L=0.5)
    feats = np.column_stack([np.ones(4), rng.normal(size=4)])
    lin = StructureSpec.linear(sup3, feats)
    # bounds stay above 0.5, the ratio floor of any column with mass past 0.5
    dis = StructureSpec.dispersion(sup3, np.array([0.6, 0.7, 0.85]))
    return {"separable": sep, "lipschitz": lip, "linear": lin, "dispersion": dis}


SAMPLERS = {
    "separable": (sample_separable_member, sample_separable_dual),
    "lipschitz": (sample_lipschitz_member, sample_lipschitz_dual),
    "linear": (sample_linear_member, sample_linear_dual),
    "dispersion": (sample_dispersion_member, sample_dispersion_dual),
}


# ------------------------------------------------------------------- tests

def test_linear_system_validation():
    with pytest.raises(ValueError):
        LinearSystem(2, [[1.0, 0.0, 0.0]], [0.0], None, None)
    with pytest.raises(ValueError):
        LinearSystem(2, [[1.0, 0.0]], [math.inf], None, None)
    sys_ = LinearSystem(2, [[1.0, 0.0]], [1.0], [[0.0, 1.0]], [0.0])
    assert sys_.variable_count == 2


def test_cone_sep_two_reward_closed_form():
    """One arm with M(1) <= 3/5: cone must be {q >= 0, 3 q0 - 2 q1 >= 0}."""
    sup = RewardSupport([0.0, 1.0])
    spec = StructureSpec.separable(sup, 1, [(np.array([[0.0, -1.0]]),
                                             np.array([-0.6]))])
    cone = primal_cone(spec)
    rng = np.random.default_rng(0)
    for _ in range(120):
        q = rng.uniform(-0.5, 2.0, size=2)
        expected = q[0] >= 0 and q[1] >= 0 and 3 * q[0] - 2 * q[1] >= 0
        got = base_feasible(cone, q, tol=1e-9)
        if min(abs(q[0]), abs(q[1]), abs(3 * q[0] - 2 * q[1])) > 1e-7:
            assert got == expected, q


def test_every_feasible_matrix_in_primal_cone_at_unit_scale():
    rng = np.random.default_rng(1)
    specs = make_specs(rng)
    for kind, spec in specs.items():
        member_sampler, _ = SAMPLERS[kind]
        Q = member_sampler(spec, rng)
        Q = Q / Q.sum(axis=0, keepdims=True)  # unit columns: a member of P
        cone = primal_cone(spec)
        assert base_feasible(cone, Q.flatten(order="F"), tol=1e-9), kind


def test_lipschitz_violator_rejected():
    rng = np.random.default_rng(2)
    spec = make_specs(rng)["lipschitz"]
    x, y = 0, spec.arm_count - 1
    bound = spec.L * spec.distances[x, y]
    means = np.full(spec.arm_count, 0.3)
    means[x] = min(0.95, 0.3 + bound + 0.3)  # violates the slope constraint
    Q = np.vstack([1.0 - means, means])
    cone = primal_cone(spec)
    assert not base_feasible(cone, Q.flatten(order="F"))


def test_zero_in_dual_cone():
    rng = np.random.default_rng(3)
    for kind, spec in make_specs(rng).items():
        cone = dual_cone(spec)
        v = np.zeros(cone.base_count + cone.aux_count)
        assert rows_hold(cone.system, v), kind


def test_two_arm_generic_dual_witness():
    sup = RewardSupport([0.0, 1.0])
    spec = StructureSpec.separable(sup, 2, None)
    cone = dual_cone(spec)
    lam = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    assert base_feasible(cone, lam.flatten(order="F"), tol=1e-9)


def test_duality_pairing_sampled():
    rng = np.random.default_rng(4)
    specs = make_specs(rng)
    for kind, spec in specs.items():
        member_sampler, dual_sampler = SAMPLERS[kind]
        for _ in range(200):
            Q = member_sampler(spec, rng)
            lam = dual_sampler(spec, rng)
            assert float(np.sum(lam * Q)) >= -1e-9, kind


def test_cone_scale_invariance():
    rng = np.random.default_rng(5)
    specs = make_specs(rng)
    for kind, spec in specs.items():
        member_sampler, _ = SAMPLERS[kind]
        cone = primal_cone(spec)
        Q = member_sampler(spec, rng).flatten(order="F")
        for rho in (0.0, 0.5, 2.0, 10.0):
            assert base_feasible(cone, rho * Q, tol=1e-8), (kind, rho)
        dcone = dual_cone(spec)
        _, dual_sampler = SAMPLERS[kind]
        lam = dual_sampler(spec, rng).flatten(order="F")
        for rho in (0.0, 0.5, 2.0, 10.0):
            assert base_feasible(dcone, rho * lam, tol=1e-8), (kind, rho)


def test_unit_mass_members_satisfy_structure_predicates():
    rng = np.random.default_rng(6)
    specs = make_specs(rng)
    levels3 = np.array([0.0, 0.5, 1.0])
    for kind, spec in specs.items():
        member_sampler, _ = SAMPLERS[kind]
        Q = member_sampler(spec, rng)
        Q = Q / Q.sum(axis=0, keepdims=True)
        if kind == "separable":
            for x in range(spec.arm_count):
                G, h = spec.arm_constraints[x]
                if G.shape[0]:
                    assert np.all(G @ Q[:, x] >= h - 1e-9)
        elif kind == "lipschitz":
            for x in range(spec.arm_count):
                for y in range(spec.arm_count):
                    assert (Q[1, x] - Q[1, y]
                            <= spec.L * spec.distances[x, y] + 1e-9)
        elif kind == "linear":
            means = levels3 @ Q
            th, *_ = np.linalg.lstsq(spec.features, means, rcond=None)
            assert np.max(np.abs(spec.features @ th - means)) <= 1e-9
        else:
            for x in range(spec.arm_count):
                num = float(levels3**2 @ Q[:, x])
                den = float(levels3 @ Q[:, x])
                assert num <= spec.bounds[x] * den + 1e-9


# ----------------------------------------------------------------- rew_max

def _rew_max_simplex(spec, P, xprime):
    """Reference: the pinned-column LP on the lifted primal cone system."""
    cone = primal_cone(spec)
    nR = len(spec.support.values)
    n = cone.base_count + cone.aux_count
    xstar, _ = best_arm_and_value(P)
    rows = []
    rhs = []
    for r in range(nR):
        e = np.zeros(n)
        e[xstar * nR + r] = 1.0
        rows.append(e)
        rhs.append(P.probs[r, xstar])
    mass = np.zeros(n)
    mass[cone.base_count + cone.mass_aux] = 1.0
    rows.append(mass)
    rhs.append(1.0)
    A_eq = np.vstack([cone.system.eq_coeffs, np.array(rows)])
    b_eq = np.concatenate([cone.system.eq_rhs, np.array(rhs)])
    c = np.zeros(n)
    levels = np.asarray(spec.support.values)
    c[xprime * nR:(xprime + 1) * nR] = -levels
    st, v, _ = simplex_solve(c, A_eq=A_eq, b_eq=b_eq,
                             A_in=cone.system.in_coeffs,
                             b_in=cone.system.in_rhs)
    assert st == "optimal", st
    return -v


def test_rew_max_two_arm_example():
    sup = RewardSupport([0.0, 1.0])
    spec = StructureSpec.separable(
        sup, 2, [(np.array([[0.0, -1.0]]), np.array([-0.6])), (None, None)])
    P = RewardMatrix(np.array([[0.5, 0.2], [0.5, 0.8]]), sup)
    got = rew_max(spec, P, 0)
    assert got == pytest.approx(0.6, abs=1e-8)
    assert _rew_max_simplex(spec, P, 0) == pytest.approx(0.6, abs=1e-8)


def test_rew_max_generic_unconstrained_hits_top_reward():
    sup = RewardSupport([0.0, 0.5, 1.0])
    spec = StructureSpec.separable(sup, 3, None)
    probs = np.array([[0.5, 0.2, 0.4], [0.3, 0.3, 0.3], [0.2, 0.5, 0.3]])
    P = RewardMatrix(probs, sup)
    for x in range(3):
        if x == best_arm_and_value(P)[0]:
            continue
        assert rew_max(spec, P, x) == pytest.approx(1.0, abs=1e-9)


def test_rew_max_lipschitz_formula_vs_lp():
    rng = np.random.default_rng(7)
    sup = RewardSupport([0.0, 1.0])
    for _ in range(20):
        nX = int(rng.integers(3, 6))
        pos = np.sort(rng.uniform(0, 1, size=nX))
        L = float(rng.uniform(0.2, 1.5))
        spec = StructureSpec.lipschitz(sup, positions=pos, L=L)
        raw = rng.uniform(0.2, 0.8, size=nX)
        means = np.array([np.min(raw + L * spec.metric_closure[x])
                          for x in range(nX)])
        P = RewardMatrix(np.vstack([1.0 - means, means]), sup)
        xstar, best = best_arm_and_value(P)
        for xp in range(nX):
            if xp == xstar:
                continue
            want = min(1.0, best + L * spec.metric_closure[xp, xstar])
            got = rew_max(spec, P, xp)
            assert got == pytest.approx(want, abs=1e-9)
            assert _rew_max_simplex(spec, P, xp) == pytest.approx(want, abs=1e-7)


def test_rew_max_dispersion_and_linear_vs_lp():
    rng = np.random.default_rng(8)
    specs = make_specs(rng)
    for kind in ("dispersion", "linear"):
        spec = specs[kind]
        sampler, _ = SAMPLERS[kind]
        for _ in range(6):
            Q = sampler(spec, rng)
            Q = Q / Q.sum(axis=0, keepdims=True)
            P = RewardMatrix(Q, spec.support)
            xstar, _ = best_arm_and_value(P)
            for xp in range(spec.arm_count):
                if xp == xstar:
                    continue
                got = rew_max(spec, P, xp)
                want = _rew_max_simplex(spec, P, xp)
                assert got == pytest.approx(want, abs=1e-6), (kind, xp)


# ----------------------------------------------------------- classify_arms

def test_classify_two_arm_example_not_deceitful():
    sup = RewardSupport([0.0, 1.0])
    spec = StructureSpec.separable(
        sup, 2, [(np.array([[0.0, -1.0]]), np.array([-0.6])), (None, None)])
    P = RewardMatrix(np.array([[0.5, 0.2], [0.5, 0.8]]), sup)
    part = classify_arms(spec, P)
    assert part.optimal == 1
    assert part.deceitful == []
    assert part.non_deceitful == [0]


def test_classify_lipschitz_saturated_best():
    sup = RewardSupport([0.0, 1.0])
    pos = np.array([0.0, 0.4, 1.0])
    spec = StructureSpec.lipschitz(sup, positions=pos, L=0.5)
    means = np.array([1.0, 0.8, 0.6])  # best mean equals max reward
    P = RewardMatrix(np.vstack([1.0 - means, means]), sup)
    part = classify_arms(spec, P)
    assert part.optimal == 0
    assert part.deceitful == []
    assert part.non_deceitful == [1, 2]


def test_classify_lipschitz_interior_best_all_deceitful():
    sup = RewardSupport([0.0, 1.0])
    pos = np.array([0.0, 0.4, 1.0])
    spec = StructureSpec.lipschitz(sup, positions=pos, L=0.5)
    means = np.array([0.7, 0.55, 0.5])
    P = RewardMatrix(np.vstack([1.0 - means, means]), sup)
    part = classify_arms(spec, P)
    assert part.optimal == 0
    assert part.non_deceitful == []
    assert part.deceitful == [1, 2]


def test_classification_value_based():
    rng = np.random.default_rng(9)
    spec = make_specs(rng)["dispersion"]
    sampler, _ = SAMPLERS["dispersion"]
    Q = sampler(spec, rng)
    Q = Q / Q.sum(axis=0, keepdims=True)
    P = RewardMatrix(Q, spec.support)
    part = classify_arms(spec, P)
    xstar, best = best_arm_and_value(P)
    for x in range(spec.arm_count):
        if x == xstar:
            continue
        ref = _rew_max_simplex(spec, P, x)
        want_deceitful = ref > best + 1e-7
        assert (x in part.deceitful) == want_deceitful


# -------------------------------------------------------------- project_l1

def _project_simplex(spec, Q):
    """Independent projection LP with split absolute values, row order shuffled."""
    cone = primal_cone(spec)
    nR = len(spec.support.values)
    nB = cone.base_count
    n = nB + cone.aux_count + nB  # P entries, aux, slack S
    A_eq = np.zeros((cone.system.eq_coeffs.shape[0] + 1, n))
    A_eq[:-1, : nB + cone.aux_count] = cone.system.eq_coeffs
    b_eq = np.concatenate([cone.system.eq_rhs, [1.0]])
    A_eq[-1, nB + cone.mass_aux] = 1.0
    rows = [np.concatenate([cone.system.in_coeffs,
                            np.zeros((cone.system.in_coeffs.shape[0], nB))],
                           axis=1)]
    rhs = [cone.system.in_rhs]
    qf = Q.flatten(order="F")
    eyeb = np.eye(nB)
    upper = np.concatenate([-eyeb, np.zeros((nB, cone.aux_count)), eyeb], axis=1)
    lower = np.concatenate([eyeb, np.zeros((nB, cone.aux_count)), eyeb], axis=1)
    rows += [upper, lower]
    rhs += [-qf, qf]
    A_in = np.vstack(rows)
    b_in = np.concatenate(rhs)
    c = np.zeros(n)
    c[nB + cone.aux_count:] = 1.0
    perm = np.random.default_rng(123).permutation(A_in.shape[0])
    st, v, _ = simplex_solve(c, A_eq=A_eq, b_eq=b_eq,
                             A_in=A_in[perm], b_in=b_in[perm])
    assert st == "optimal"
    return v


def test_project_identity_on_members():
    rng = np.random.default_rng(10)
    for kind, spec in make_specs(rng).items():
        sampler, _ = SAMPLERS[kind]
        Q = sampler(spec, rng)
        Q = Q / Q.sum(axis=0, keepdims=True)
        P = project_l1(spec, RewardMatrix(Q, spec.support))
        assert np.max(np.abs(P.probs - Q)) <= 1e-6, kind


def test_project_dispersion_point_mass_hand_solution():
    sup = RewardSupport([0.0, 0.5, 1.0])
    spec = StructureSpec.dispersion(sup, np.array([0.6]))
    Q = RewardMatrix(np.array([[0.0], [0.0], [1.0]]), sup)
    P = project_l1(spec, Q)
    # max p1 s.t. 0.4 p1 <= 0.05 p05: vertex p = (0, 8/9, 1/9)
    assert P.probs[:, 0] == pytest.approx([0.0, 8.0 / 9.0, 1.0 / 9.0], abs=1e-6)


def test_project_dispersion_below_ratio_floor():
    # no column with positive mean can reach a ratio under the smallest
    # positive reward, so the only member is the point mass at zero
    sup = RewardSupport([0.0, 0.5, 1.0])
    spec = StructureSpec.dispersion(sup, np.array([0.3]))
    Q = RewardMatrix(np.array([[0.0], [0.0], [1.0]]), sup)
    P = project_l1(spec, Q)
    assert P.probs[:, 0] == pytest.approx([1.0, 0.0, 0.0], abs=1e-9)


def test_project_dispersion_at_ratio_floor():
    sup = RewardSupport([0.0, 0.5, 1.0])
    spec = StructureSpec.dispersion(sup, np.array([0.5]))
    Q = RewardMatrix(np.array([[0.2], [0.3], [0.5]]), sup)
    P = project_l1(spec, Q)
    assert P.probs[:, 0] == pytest.approx([0.2, 0.8, 0.0], abs=1e-9)


def test_project_distance_matches_independent_lp():
    rng = np.random.default_rng(11)
    for kind, spec in make_specs(rng).items():
        nR = len(spec.support.values)
        raw = rng.dirichlet(np.ones(nR), size=spec.arm_count).T
        Q = RewardMatrix(raw, spec.support)
        P = project_l1(spec, Q)
        dist = float(np.sum(np.abs(P.probs - raw)))
        ref = _project_simplex(spec, raw)
        assert dist == pytest.approx(ref, abs=2e-5), kind
        assert base_feasible(primal_cone(spec),
                             P.probs.flatten(order="F"), tol=1e-7)


def test_project_infeasible_structure_raises():
    sup = RewardSupport([0.0, 0.5, 1.0])
    # gamma below the smallest positive reward forces the zero column only,
    # which still exists; an empty P needs contradictory separable rows
    spec = StructureSpec.separable(
        sup, 1, [(np.array([[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]]),
                  np.array([2.0, -0.5])), ])
    Q = RewardMatrix(np.array([[1.0], [0.0], [0.0]]), sup)
    with pytest.raises(RuntimeError):
        project_l1(spec, Q)


def test_spec_validation():
    sup = RewardSupport([0.0, 1.0])
    with pytest.raises(ValueError):
        StructureSpec.lipschitz(sup, positions=np.array([0.1, 0.5]), L=-1.0)
    with pytest.raises(ValueError):
        StructureSpec.lipschitz(RewardSupport([0.0, 0.5, 1.0]),
                                positions=np.array([0.1, 0.5, 0.9]), L=1.0)
    bad_d = np.array([[0.0, 1.0], [0.5, 0.0]])
    with pytest.raises(ValueError):
        StructureSpec.lipschitz(sup, positions=None, L=1.0, distances=bad_d)
    with pytest.raises(ValueError):
        StructureSpec.dispersion(sup, np.array([0.5, -0.1]))
    with pytest.raises(ValueError):
        StructureSpec.linear(sup, np.array([1.0, 2.0]))
