"""Interior-point solver tests.

LP answers are checked against the textbook simplex oracle in
simplex_oracle.py; exponential-cone answers against closed forms.
"""

import math

import numpy as np
import pytest

from structbandit.solver import (
    ConicProgram,
    dump_program,
    lp_solve,
    solve,
    _barrier_grad_hess,
)
from simplex_oracle import simplex_solve


def test_min_x_above_one():
    prog = ConicProgram(1, c=[1.0], A_in=[[1.0]], b_in=[1.0])
    sol = solve(prog, tol=1e-8)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(1.0, abs=1e-7)
    assert sol.point[0] >= 1.0 - 1e-9


def test_exp_cone_e():
    # min y s.t. (1, y, 1) in K_exp: 1 * log(y/1) >= 1 so y >= e
    prog = ConicProgram(
        3, c=[0.0, 1.0, 0.0],
        A_eq=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], b_eq=[1.0, 1.0],
        triples=[(0, 1, 2)],
    )
    sol = solve(prog, tol=1e-8)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(math.e, abs=1e-7)


def test_kl_epigraph_triple():
    # min t s.t. (-t, q, p) in K_exp with q, p pinned: t* = p log(p/q)
    p, q = 0.7, 0.2
    prog = ConicProgram(
        3, c=[-1.0, 0.0, 0.0],  # u = -t, so min t = max u... run as min -u
        A_eq=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], b_eq=[q, p],
        triples=[(0, 1, 2)],
    )
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    # u* = p log(q/p), so t* = -u* = p log(p/q)
    assert -sol.point[0] == pytest.approx(p * math.log(p / q), abs=1e-7)


def test_infeasible_lp():
    prog = ConicProgram(1, c=[1.0], A_in=[[1.0], [-1.0]], b_in=[1.0, 0.0])
    sol = lp_solve(prog, tol=1e-8)
    assert sol.status == "infeasible"


def test_unbounded_lp():
    prog = ConicProgram(1, c=[-1.0], A_in=[[1.0]], b_in=[1.0])
    sol = lp_solve(prog, tol=1e-8)
    assert sol.status == "unbounded"


def test_degenerate_redundant_equalities():
    # duplicated equality rows must not break anything
    prog = ConicProgram(
        2, c=[1.0, 1.0],
        A_eq=[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]], b_eq=[2.0, 2.0, 4.0],
        A_in=[[1.0, 0.0]], b_in=[0.5],
    )
    sol = lp_solve(prog, tol=1e-8)
    assert sol.status == "optimal"
    st, v, _ = simplex_solve([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[2.0],
                             A_in=[[1.0, 0.0]], b_in=[0.5])
    assert st == "optimal"
    assert sol.value == pytest.approx(v, abs=1e-7)


def random_bounded_lp(rng, n, m):
    """Random LP with a box keeping it feasible and bounded."""
    A = rng.normal(size=(m, n))
    x_feas = rng.uniform(-1, 1, size=n)
    b = A @ x_feas - rng.uniform(0.1, 2.0, size=m)
    c = rng.normal(size=n)
    A_in = np.vstack([A, np.eye(n), -np.eye(n)])
    b_in = np.concatenate([b, -5.0 * np.ones(n), -5.0 * np.ones(n)])
    return c, A_in, b_in


def test_lp_agreement_with_simplex_100():
    rng = np.random.default_rng(2024)
    for k in range(100):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, 7))
        c, A_in, b_in = random_bounded_lp(rng, n, m)
        prog = ConicProgram(n, c=c, A_in=A_in, b_in=b_in)
        sol = lp_solve(prog, tol=1e-9)
        st, v, _ = simplex_solve(c, A_in=A_in, b_in=b_in)
        assert st == "optimal", "oracle disagrees on case %d" % k
        assert sol.status == "optimal", "solver failed case %d" % k
        assert sol.value == pytest.approx(v, abs=1e-6), "case %d" % k


def test_lp_with_equalities_agreement():
    rng = np.random.default_rng(7)
    for k in range(20):
        n = int(rng.integers(3, 7))
        c, A_in, b_in = random_bounded_lp(rng, n, int(rng.integers(1, 4)))
        A_eq = rng.normal(size=(1, n))
        x_feas = rng.uniform(-1, 1, size=n)
        b_eq = A_eq @ x_feas
        # shift the box rows so x_feas stays inside
        prog = ConicProgram(n, c=c, A_eq=A_eq, b_eq=b_eq, A_in=A_in,
                            b_in=b_in - 3.0)
        sol = lp_solve(prog, tol=1e-9)
        st, v, _ = simplex_solve(c, A_eq=A_eq, b_eq=b_eq, A_in=A_in,
                                 b_in=b_in - 3.0)
        if st != "optimal":
            continue
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(v, abs=1e-6)


def test_scale_invariance():
    rng = np.random.default_rng(3)
    c, A_in, b_in = random_bounded_lp(rng, 4, 3)
    p1 = ConicProgram(4, c=c, A_in=A_in, b_in=b_in)
    p10 = ConicProgram(4, c=10.0 * c, A_in=A_in, b_in=b_in)
    s1 = lp_solve(p1, tol=1e-9)
    s10 = lp_solve(p10, tol=1e-9)
    assert s10.value == pytest.approx(10.0 * s1.value, rel=1e-6, abs=1e-6)
    assert np.all(A_in @ s10.point - b_in >= -1e-9)


def test_feasibility_certificate():
    rng = np.random.default_rng(11)
    for _ in range(10):
        c, A_in, b_in = random_bounded_lp(rng, 3, 4)
        sol = lp_solve(ConicProgram(3, c=c, A_in=A_in, b_in=b_in), tol=1e-8)
        assert sol.status == "optimal"
        assert sol.primal_residual <= 1e-8 * (1 + abs(sol.value))


def test_quadratic_objective():
    # min (x-2)^2/2 s.t. x >= 3: interior solution at the boundary
    prog = ConicProgram(1, c=[-2.0], q=[1.0], A_in=[[1.0]], b_in=[3.0])
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    assert sol.point[0] == pytest.approx(3.0, abs=1e-6)
    # unconstrained minimum inside the feasible region
    prog2 = ConicProgram(1, c=[-2.0], q=[1.0], A_in=[[1.0]], b_in=[-10.0])
    sol2 = solve(prog2, tol=1e-9)
    assert sol2.point[0] == pytest.approx(2.0, abs=1e-6)


def test_equality_only_program():
    # min x + y s.t. x + y = 3 is constant; min x s.t. x + y = 3 is unbounded
    p1 = ConicProgram(2, c=[1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[3.0])
    s1 = solve(p1, tol=1e-8)
    assert s1.status == "optimal"
    assert s1.value == pytest.approx(3.0, abs=1e-8)
    p2 = ConicProgram(2, c=[1.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[3.0])
    assert solve(p2, tol=1e-8).status == "unbounded"


def test_inconsistent_equalities_detected():
    prog = ConicProgram(1, c=[1.0], A_eq=[[1.0], [1.0]], b_eq=[0.0, 1.0],
                        A_in=[[1.0]], b_in=[-5.0])
    assert solve(prog, tol=1e-8).status == "infeasible"


def test_exp_cone_infeasible():
    # (u, v, w) in K_exp with w = 1, v = 1 forces u <= 0; u >= 1 contradicts
    prog = ConicProgram(
        3, c=[0.0, 0.0, 0.0],
        A_eq=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], b_eq=[1.0, 1.0],
        A_in=[[1.0, 0.0, 0.0]], b_in=[1.0],
        triples=[(0, 1, 2)],
    )
    sol = solve(prog, tol=1e-8)
    assert sol.status == "infeasible"


def test_barrier_hessian_positive_definite():
    rng = np.random.default_rng(5)
    prog = ConicProgram(3, triples=[(0, 1, 2)])
    for _ in range(50):
        v, w = rng.uniform(0.05, 3.0, size=2)
        zeta = rng.uniform(0.05, 2.0)
        u = w * math.log(v / w) - zeta
        x = np.array([u, v, w])
        _, H = _barrier_grad_hess(prog, x)
        eig = np.linalg.eigvalsh(H)
        assert np.all(eig > 0)


def test_provided_initial_point_used():
    prog = ConicProgram(1, c=[1.0], A_in=[[1.0]], b_in=[1.0])
    sol = solve(prog, tol=1e-8, x0=np.array([5.0]))
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(1.0, abs=1e-7)


def test_entropy_projection_program():
    """min sum_r t_r s.t. (-t_r, q_r, p_r) triples, sum q = 1, mean(q) >= m.

    KL projection of p onto {mean >= m}; optimum checked against a fine
    one-parameter grid (exponential tilting is optimal by Lagrange).
    """
    p = np.array([0.4, 0.35, 0.25])
    r = np.array([0.0, 0.5, 1.0])
    m_target = 0.6
    n = 6  # q0 q1 q2 t0 t1 t2
    A_eq = np.zeros((4, n))
    # pin w coordinates through aux? triples need variables: add p as frozen
    # vars via equalities
    prog = ConicProgram(
        9,
        c=[0, 0, 0, 1, 1, 1, 0, 0, 0],
        A_eq=np.vstack([
            np.array([1.0, 1, 1, 0, 0, 0, 0, 0, 0]),
            np.array([0.0, 0, 0, 0, 0, 0, 1, 0, 0]),
            np.array([0.0, 0, 0, 0, 0, 0, 0, 1, 0]),
            np.array([0.0, 0, 0, 0, 0, 0, 0, 0, 1]),
        ]),
        b_eq=[1.0, p[0], p[1], p[2]],
        A_in=[[0.0, 0.5, 1.0, 0, 0, 0, 0, 0, 0]],
        b_in=[m_target],
        triples=[(3, 0, 6), (4, 1, 7), (5, 2, 8)],
    )
    # triple k is (u, v, w) = (t_k... u must be -t_k: flip sign of t in c
    # instead: minimize -(u0+u1+u2) with u = -t
    prog.c = np.array([0, 0, 0, -1.0, -1, -1, 0, 0, 0])
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"

    def kl(q):
        return float(np.sum(p * np.log(p / q)))

    best = math.inf
    for nu in np.linspace(0, 1.0 / (1.0 - m_target) - 1e-6, 200_000):
        q = p / (1.0 + nu * (m_target - r))
        q = q / q.sum()
        if r @ q >= m_target - 1e-12:
            best = min(best, kl(q))
    # value = sum of -u at the optimum, which is the projected KL itself
    assert sol.value == pytest.approx(best, abs=2e-5)


def test_dump_program_roundtrip_text():
    prog = ConicProgram(3, c=[1.0, 0, 0], A_eq=[[1, 1, 0]], b_eq=[1.0],
                        A_in=[[0, 0, 1]], b_in=[0.5], triples=[(0, 1, 2)])
    text = dump_program(prog)
    assert "vars 3" in text
    assert "expcone u=x0 v=x1 w=x2" in text
    assert text.count("\n") == 5


def test_validation_errors():
    with pytest.raises(ValueError):
        ConicProgram(2, triples=[(0, 0, 1)])
    with pytest.raises(ValueError):
        ConicProgram(2, triples=[(0, 1, 2)])
    with pytest.raises(ValueError):
        ConicProgram(1, q=[-1.0])
    with pytest.raises(ValueError):
        lp_solve(ConicProgram(3, triples=[(0, 1, 2)]))
    with pytest.raises(ValueError):
        solve(ConicProgram(1, c=[1.0], A_in=[[1.0]], b_in=[0.0]), tol=1.0)


def test_group_validation_errors():
    with pytest.raises(ValueError, match="cannot be empty"):
        ConicProgram(2, groups=[[]])
    with pytest.raises(ValueError, match="out of range"):
        ConicProgram(2, groups=[[0, 2]])
    with pytest.raises(ValueError, match="disjoint"):
        ConicProgram(3, groups=[[0, 1], [1, 2]])
    with pytest.raises(ValueError, match="couples two"):
        ConicProgram(4, A_eq=[[1.0, 0.0, 0.0, 1.0]], b_eq=[1.0],
                     groups=[[0], [3]])
    with pytest.raises(ValueError, match="couples two"):
        ConicProgram(4, A_in=[[0.0, 1.0, 1.0, 0.0]], b_in=[0.0],
                     groups=[[1], [2]])
    with pytest.raises(ValueError, match="triple couples two"):
        ConicProgram(4, triples=[(0, 1, 2)], groups=[[0], [1, 3]])


def random_block_lp(rng, n_shared, n_groups, loc):
    """Block-arrow LP: every row touches at most one group plus shared."""
    n = n_shared + n_groups * loc
    groups = [range(n_shared + k * loc, n_shared + (k + 1) * loc)
              for k in range(n_groups)]
    x_feas = rng.uniform(-1, 1, size=n)
    A_eq, b_eq, rows, cuts = [], [], [], []
    for g in groups:
        row = np.zeros(n)
        row[list(g)] = rng.normal(size=loc)
        row[:n_shared] = rng.normal(size=n_shared)
        A_eq.append(row)
        b_eq.append(float(row @ x_feas))
        for _ in range(2):
            row = np.zeros(n)
            row[list(g)] = rng.normal(size=loc)
            row[:n_shared] = rng.normal(size=n_shared)
            rows.append(row)
            cuts.append(float(row @ x_feas) - rng.uniform(0.1, 1.0))
    A_in = np.vstack(rows + [np.eye(n), -np.eye(n)])
    b_in = np.concatenate([cuts, -4.0 * np.ones(2 * n)])
    return rng.normal(size=n), A_eq, b_eq, A_in, b_in, groups


def test_grouped_solve_matches_dense():
    rng = np.random.default_rng(17)
    for k in range(10):
        c, A_eq, b_eq, A_in, b_in, groups = random_block_lp(rng, 2, 3, 2)
        kw = dict(c=c, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in)
        dense = solve(ConicProgram(8, **kw), tol=1e-9)
        blocked = solve(ConicProgram(8, groups=groups, **kw), tol=1e-9)
        assert dense.status == "optimal", "case %d" % k
        assert blocked.status == "optimal", "case %d" % k
        assert blocked.value == pytest.approx(dense.value, abs=1e-6), \
            "case %d" % k


def test_grouped_exp_cone_closed_form():
    # min sum_k v_k + w/10 with (a_k, v_k, w) in K_exp, w >= 1/2: each
    # v_k = w exp(a_k / w) grows in w when a_k < 0, so w sits at 1/2
    a = np.array([-1.0, -0.6, -0.3])
    n = 7  # w, then (u_k, v_k) per block
    c = np.zeros(n)
    c[0] = 0.1
    c[2::2] = 1.0
    A_eq = np.zeros((3, n))
    for k in range(3):
        A_eq[k, 1 + 2 * k] = 1.0
    prog = ConicProgram(
        n, c=c, A_eq=A_eq, b_eq=a,
        A_in=[[1.0] + [0.0] * 6], b_in=[0.5],
        triples=[(1 + 2 * k, 2 + 2 * k, 0) for k in range(3)],
        groups=[[1 + 2 * k, 2 + 2 * k] for k in range(3)],
    )
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    expect = float(np.sum(0.5 * np.exp(a / 0.5))) + 0.05
    assert sol.value == pytest.approx(expect, abs=1e-7)


def test_grouped_rank_deficient_block_rows():
    # the equalities share one local part, so eliminating the block leaves
    # an induced row on the shared variables; the duplicate row must drop
    c = [1.0, 1.0, 1.0, 2.0]
    A_eq = [[1.0, 0.0, 1.0, 1.0],
            [0.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 1.0]]
    b_eq = [1.0, 2.0, 1.0]
    A_in = np.vstack([np.eye(4), -np.eye(4)])
    b_in = -5.0 * np.ones(8)
    kw = dict(c=c, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in)
    dense = lp_solve(ConicProgram(4, **kw), tol=1e-9)
    blocked = solve(ConicProgram(4, groups=[[2, 3]], **kw), tol=1e-9)
    assert blocked.status == "optimal"
    assert blocked.value == pytest.approx(dense.value, abs=1e-6)
    resid = np.asarray(A_eq) @ blocked.point - np.asarray(b_eq)
    assert np.max(np.abs(resid)) <= 1e-7


def test_grouped_quadratic_objective():
    # two quadratic blocks tied by a shared floor variable
    prog = ConicProgram(
        3, c=[0.1, -0.5, -2.0], q=[0.0, 1.0, 1.0],
        A_in=[[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
        b_in=[0.0, 0.0, 1.0],
        groups=[[1], [2]],
    )
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    # s = 1 binds, x0 = max(1/2, s) = 1, x1 = max(2, s) = 2
    assert sol.point == pytest.approx([1.0, 1.0, 2.0], abs=1e-6)
    assert sol.value == pytest.approx(-1.9, abs=1e-7)


def test_grouped_infeasible_detected():
    # same contradiction as the ungrouped case, via the block path
    prog = ConicProgram(
        3,
        A_eq=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], b_eq=[1.0, 1.0],
        A_in=[[1.0, 0.0, 0.0]], b_in=[1.0],
        triples=[(0, 1, 2)],
        groups=[[0]],
    )
    assert solve(prog, tol=1e-8).status == "infeasible"


def test_warm_start_from_previous_solution():
    prog = ConicProgram(
        3, c=[0.0, 1.0, 0.0],
        A_eq=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], b_eq=[1.0, 1.0],
        triples=[(0, 1, 2)],
    )
    cold = solve(prog, tol=1e-6)
    hot = solve(prog, tol=1e-9, x0=cold.point, t_start=3.0 / 1e-6)
    assert hot.status == "optimal"
    assert hot.value == pytest.approx(math.e, abs=1e-7)
    # t_start without a usable point must not derail the cold path
    again = solve(prog, tol=1e-8, t_start=1e9)
    assert again.value == pytest.approx(math.e, abs=1e-7)
