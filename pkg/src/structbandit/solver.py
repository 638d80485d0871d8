"""Small dense interior-point solver with exponential-cone support.

Handles programs of the form

    min  c'x + 0.5 * sum_i q_i x_i^2
    s.t. A_eq x = b_eq
         A_in x >= b_in
         (x[u], x[v], x[w]) in K_exp   for each triple (u, v, w)

where K_exp = cl{(u, v, w) : w > 0, w * log(v / w) >= u}.  The method is
path-following barrier Newton: log barriers on the inequality rows, the
standard 3-self-concordant barrier

    F(u, v, w) = -log(w log(v/w) - u) - log v - log w

on each triple, and equality rows kept explicitly inside the KKT system.
Strict feasibility comes from a phase-one program that shifts every
constraint by a scalar slack and minimizes it; the shift map is monotone,
so any iterate with negative slack is strictly feasible for the original
program with margin at least |slack|.

Everything is dense numpy; the programs this package builds stay in the
hundreds of variables.  Programs whose constraints decompose into
independent variable groups coupled only through a few shared variables
can declare the groups, and the Newton systems are then solved by block
elimination at per-group cost instead of one dense factorization.
"""

import math

import numpy as np

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_MAXITER = "max-iter"

_BIG = 1e14


class ConicProgram:
    """Problem data container; see module docstring for the canonical form.

    groups, when given, lists disjoint variable index sets such that every
    equality row, inequality row, and cone triple touches at most one set
    (variables outside every set are shared and may appear anywhere).
    """

    def __init__(self, n, c=None, q=None, A_eq=None, b_eq=None,
                 A_in=None, b_in=None, triples=None, groups=None):
        self.n = int(n)
        self.c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
        self.q = None if q is None else np.asarray(q, dtype=float)
        self.A_eq = (np.zeros((0, n)) if A_eq is None
                     else np.asarray(A_eq, dtype=float).reshape(-1, n))
        self.b_eq = (np.zeros(0) if b_eq is None
                     else np.atleast_1d(np.asarray(b_eq, dtype=float)))
        self.A_in = (np.zeros((0, n)) if A_in is None
                     else np.asarray(A_in, dtype=float).reshape(-1, n))
        self.b_in = (np.zeros(0) if b_in is None
                     else np.atleast_1d(np.asarray(b_in, dtype=float)))
        self.triples = [tuple(int(i) for i in t) for t in (triples or [])]
        if self.c.size != n:
            raise ValueError("objective length mismatch")
        if self.q is not None and (self.q.size != n or np.any(self.q < 0)):
            raise ValueError("quadratic diagonal must be length n, >= 0")
        for t in self.triples:
            if len(t) != 3 or len(set(t)) != 3:
                raise ValueError("triple must hold three distinct indices")
            if min(t) < 0 or max(t) >= n:
                raise ValueError("triple index out of range")
        self.groups = None
        if groups:
            seen = np.zeros(self.n, dtype=bool)
            parsed = []
            for gr in groups:
                arr = np.unique(np.asarray(list(gr), dtype=int))
                if arr.size == 0:
                    raise ValueError("variable group cannot be empty")
                if arr[0] < 0 or arr[-1] >= self.n:
                    raise ValueError("group index out of range")
                if np.any(seen[arr]):
                    raise ValueError("variable groups must be disjoint")
                seen[arr] = True
                parsed.append(arr)
            self.groups = tuple(parsed)
            gid = np.full(self.n, -1, dtype=int)
            for k, arr in enumerate(parsed):
                gid[arr] = k
            for name, mat in (("equality", self.A_eq),
                              ("inequality", self.A_in)):
                for row in mat:
                    hit = gid[row != 0.0]
                    hit = np.unique(hit[hit >= 0])
                    if hit.size > 1:
                        raise ValueError(
                            "%s row couples two variable groups" % name)
            for t in self.triples:
                hit = np.unique([gid[i] for i in t if gid[i] >= 0])
                if hit.size > 1:
                    raise ValueError("triple couples two variable groups")

    def objective(self, x):
        val = float(self.c @ x)
        if self.q is not None:
            val += 0.5 * float((self.q * x) @ x)
        return val


class Solution:
    def __init__(self, point, value, status, primal_residual, dual_residual,
                 gap):
        self.point = point
        self.value = value
        self.status = status
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual
        self.gap = gap

    def __repr__(self):
        return ("Solution(status=%s, value=%.10g, primal=%.2e, dual=%.2e, "
                "gap=%.2e)" % (self.status, self.value, self.primal_residual,
                               self.dual_residual, self.gap))


# --------------------------------------------------------------- barrier core

def _triple_vals(x, t, shift_idx):
    u, v, w = x[t[0]], x[t[1]], x[t[2]]
    if shift_idx >= 0:
        s = x[shift_idx]
        u, v, w = u - s, v + s, w + s
    return u, v, w


def _in_domain(prog, x, shift_idx=-1):
    if prog.A_in.shape[0]:
        if np.any(prog.A_in @ x - prog.b_in <= 0):
            return False
    for t in prog.triples:
        u, v, w = _triple_vals(x, t, shift_idx)
        if v <= 0 or w <= 0 or w * math.log(v / w) - u <= 0:
            return False
    return True


def _barrier_value(prog, x, shift_idx=-1):
    val = 0.0
    if prog.A_in.shape[0]:
        s = prog.A_in @ x - prog.b_in
        if np.any(s <= 0):
            return math.inf
        val -= float(np.sum(np.log(s)))
    for t in prog.triples:
        u, v, w = _triple_vals(x, t, shift_idx)
        if v <= 0 or w <= 0:
            return math.inf
        # log1p on the ratio offset: v - w is exact for nearby doubles,
        # so psi keeps relative precision when the iterate closes on v = w
        zeta = w * math.log1p((v - w) / w) - u
        if zeta <= 0:
            return math.inf
        val -= math.log(zeta) + math.log(v) + math.log(w)
    return val


_SHIFT_MAP = np.array([[1.0, 0.0, 0.0, -1.0],
                       [0.0, 1.0, 0.0, 1.0],
                       [0.0, 0.0, 1.0, 1.0]])


def _triple_index(prog, shift_idx):
    """Triple slot indices as a (T, 3) or (T, 4) int array."""
    if not prog.triples:
        return np.zeros((0, 4 if shift_idx >= 0 else 3), dtype=int)
    tidx = np.asarray(prog.triples, dtype=int)
    if shift_idx >= 0:
        tidx = np.hstack([tidx, np.full((tidx.shape[0], 1), shift_idx)])
    return tidx


def _triple_uvw(x, tidx, shift_idx):
    if shift_idx >= 0:
        s = x[tidx[:, 3]]
        return (x[tidx[:, 0]] - s, x[tidx[:, 1]] + s, x[tidx[:, 2]] + s)
    return x[tidx[:, 0]], x[tidx[:, 1]], x[tidx[:, 2]]


def _barrier_parts(prog, x, tidx, shift_idx=-1):
    """Gradient plus factored Hessian pieces at an interior point.

    Returns (g, s, inv2, HFs): inequality slacks s with their squared
    reciprocals, and the (T, k, k) stack of local triple Hessian blocks
    over the slots in tidx, so consumers can build the full matrix or any
    submatrix without touching n^2 memory.
    """
    n = x.size
    g = np.zeros(n)
    s = None
    inv2 = None
    if prog.A_in.shape[0]:
        s = prog.A_in @ x - prog.b_in
        inv = 1.0 / s
        inv2 = inv * inv
        g -= prog.A_in.T @ inv
    T = tidx.shape[0]
    if T == 0:
        return g, s, inv2, np.zeros((0, tidx.shape[1], tidx.shape[1]))
    u, v, w = _triple_uvw(x, tidx, shift_idx)
    # log1p on the ratio offset: v - w is exact for nearby doubles, so psi
    # keeps relative precision when the iterate closes on v = w
    psi = np.log1p((v - w) / w)
    zeta = w * psi - u
    dz = np.stack([-np.ones(T), w / v, psi - 1.0], axis=1)
    gF = -dz / zeta[:, None]
    gF[:, 1] -= 1.0 / v
    gF[:, 2] -= 1.0 / w
    HFs = dz[:, :, None] * dz[:, None, :] / (zeta ** 2)[:, None, None]
    HFs[:, 1, 1] += w / v ** 2 / zeta + 1.0 / v ** 2
    HFs[:, 1, 2] -= 1.0 / v / zeta
    HFs[:, 2, 1] -= 1.0 / v / zeta
    HFs[:, 2, 2] += 1.0 / w / zeta + 1.0 / w ** 2
    if shift_idx >= 0:
        gF = gF @ _SHIFT_MAP
        HFs = np.einsum("ab,tbc,cd->tad", _SHIFT_MAP.T, HFs, _SHIFT_MAP,
                        optimize=True)
    np.add.at(g, tidx.ravel(), gF.ravel())
    return g, s, inv2, HFs


def _dense_hess(prog, inv2, tidx, HFs, tq):
    H = np.zeros((prog.n, prog.n))
    if inv2 is not None:
        H += (prog.A_in * inv2[:, None]).T @ prog.A_in
    for t in range(tidx.shape[0]):
        ix = tidx[t]
        H[np.ix_(ix, ix)] += HFs[t]
    if tq is not None:
        H[np.diag_indices_from(H)] += tq
    return H


def _barrier_grad_hess(prog, x, shift_idx=-1):
    tidx = _triple_index(prog, shift_idx)
    g, _, inv2, HFs = _barrier_parts(prog, x, tidx, shift_idx)
    return g, _dense_hess(prog, inv2, tidx, HFs, None)


def _dir_curvature(dx, sdx, inv2, tidx, HFs, tq):
    """dx' H dx assembled from the factored pieces."""
    val = 0.0
    if sdx is not None:
        val += float((sdx * sdx) @ inv2)
    if tidx.shape[0]:
        d = dx[tidx]
        val += float(np.einsum("ta,tab,tb->", d, HFs, d, optimize=True))
    if tq is not None:
        val += float((tq * dx) @ dx)
    return val


def _solve_sym(M, rhs):
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        sol = None
    if sol is None or not np.all(np.isfinite(sol)):
        ridge = M + np.diag(1e-10 * (1.0 + np.abs(np.diag(M))))
        try:
            sol = np.linalg.solve(ridge, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
        if not np.all(np.isfinite(sol)):
            sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return sol


def _null_basis(A):
    """Orthonormal basis of ker A, tolerant of redundant rows."""
    if A.shape[0] == 0:
        return None
    _, sing, Vt = np.linalg.svd(A)
    rank = int(np.sum(sing > (sing[0] if sing.size else 0.0) * 1e-12))
    return Vt[rank:].T


def _kkt_solve(H, A, g, Z=None):
    """Newton direction for min 0.5 dx'H dx + g'dx s.t. A dx = 0.

    With equality rows present the solve runs in the null-space basis Z:
    near the boundary the barrier Hessian dwarfs the unit-scale A block
    and the saddle form loses the direction entirely, while the reduced
    system stays as well conditioned as the problem allows.
    """
    if A.shape[0] == 0:
        return _solve_sym(H, -g)
    if Z is None:
        Z = _null_basis(A)
    y = _solve_sym(Z.T @ H @ Z, -(Z.T @ g))
    return Z @ y


class _BlockPlan:
    """Newton directions by block elimination for grouped programs.

    Each declared group is eliminated against its own equality rows in a
    local null-space basis, leaving a Schur system on the shared
    variables; the direction agrees with the dense reduced solve up to
    round-off while the cost stays at group scale.  Built once per solve:
    only the Hessian weights change along the path, never the rows.
    """

    def __init__(self, prog):
        n = prog.n
        groups = [np.asarray(gr, dtype=int) for gr in prog.groups]
        gid = np.full(n, -1, dtype=int)
        loc = np.full(n, -1, dtype=int)
        for k, gr in enumerate(groups):
            gid[gr] = k
            loc[gr] = np.arange(gr.size)
        shared = np.flatnonzero(gid < 0)
        loc[shared] = np.arange(shared.size)
        self.groups, self.gid, self.loc, self.shared = groups, gid, loc, shared

        def row_group(row):
            for i in np.nonzero(row)[0]:
                if gid[i] >= 0:
                    return int(gid[i])
            return -1

        A = prog.A_eq
        if A.shape[0]:
            eq_of = np.array([row_group(r) for r in A], dtype=int)
        else:
            eq_of = np.zeros(0, dtype=int)
        self.Zk, self.Pk = [], []
        induced = []
        for k, gr in enumerate(groups):
            rows = np.flatnonzero(eq_of == k)
            if rows.size == 0:
                self.Zk.append(np.eye(gr.size))
                self.Pk.append(np.zeros((gr.size, shared.size)))
                continue
            Ak = A[np.ix_(rows, gr)]
            Ck = A[np.ix_(rows, shared)]
            U, sing, Vt = np.linalg.svd(Ak)
            tol = (sing[0] if sing.size else 0.0) * 1e-12
            r = int(np.sum(sing > tol))
            Zk = Vt[r:].T
            pinv = Vt[:r].T @ (U[:, :r] / sing[:r]).T
            Pk = -pinv @ Ck
            # rows outside the block range force extra conditions on the
            # shared step; fold them into the shared system
            res = Ck + Ak @ Pk
            if res.size:
                scale = 1.0 + float(np.max(np.abs(Ck))) if Ck.size else 1.0
                bad = np.flatnonzero(np.max(np.abs(res), axis=1)
                                     > 1e-9 * scale)
                if bad.size:
                    induced.append(res[bad])
            self.Zk.append(Zk)
            self.Pk.append(Pk)
        stack = []
        if A.shape[0]:
            sh = A[np.ix_(np.flatnonzero(eq_of == -1), shared)]
            if sh.size:
                stack.append(sh)
        stack.extend(m for m in induced if m.size)
        self.Zs = _null_basis(np.vstack(stack)) if stack else None

        # inequality rows: single-entry rows act on the diagonal alone,
        # the rest are sliced per group once since rows never change
        m_in = prog.A_in.shape[0]
        if m_in:
            counts = np.count_nonzero(prog.A_in, axis=1)
            self.sing_rows = np.flatnonzero(counts == 1)
            self.sing_cols = np.argmax(np.abs(prog.A_in[self.sing_rows]),
                                       axis=1).astype(int)
            self.sing_coef2 = prog.A_in[self.sing_rows, self.sing_cols] ** 2
            multi = np.flatnonzero(counts != 1)
        else:
            self.sing_rows = np.zeros(0, dtype=int)
            self.sing_cols = np.zeros(0, dtype=int)
            self.sing_coef2 = np.zeros(0)
            multi = np.zeros(0, dtype=int)
        in_of = np.array([row_group(prog.A_in[i]) for i in multi], dtype=int)
        self.in_rows_k, self.B_loc, self.B_sh = [], [], []
        for k, gr in enumerate(groups):
            rows = multi[in_of == k]
            self.in_rows_k.append(rows)
            self.B_loc.append(prog.A_in[np.ix_(rows, gr)])
            self.B_sh.append(prog.A_in[np.ix_(rows, shared)])
        rows = multi[in_of == -1]
        self.in_rows_s = rows
        self.B_ss = prog.A_in[np.ix_(rows, shared)]
        self._scatter = None

        # uniform groups (same block size, null dimension, and row counts
        # everywhere) admit a stacked-tensor Newton step with one batched
        # factorization instead of a Python loop over groups
        self.uniform = bool(groups) and (
            len({gr.size for gr in groups}) == 1
            and len({Z.shape[1] for Z in self.Zk}) == 1
            and len({r.size for r in self.in_rows_k}) == 1)
        if self.uniform:
            self.groups_mat = np.stack(groups)
            self.Zk_st = np.stack(self.Zk)
            self.Pk_st = np.stack(self.Pk)
            self.B_loc_st = np.stack(self.B_loc)
            self.B_sh_st = np.stack(self.B_sh)
            self.in_rows_mat = np.stack(self.in_rows_k)

    def _triple_scatter(self, tidx):
        """Flat gather/scatter index pairs routing triple Hessian entries.

        Entries land on the group square, the group-shared strip, or the
        shared square; the shared-group mirror is dropped since the Schur
        formulas only read one side of the symmetric block.  Built once:
        the slot layout never changes within a solve.
        """
        gid, loc = self.gid, self.loc
        nSh = self.shared.size
        K = len(self.groups)
        S = tidx.shape[1]
        kk = [([], []) for _ in range(K)]
        ks = [([], []) for _ in range(K)]
        ss = ([], [])
        for t in range(tidx.shape[0]):
            idx = tidx[t]
            for a in range(S):
                i = idx[a]
                gi, li = gid[i], loc[i]
                for b in range(S):
                    j = idx[b]
                    gj, lj = gid[j], loc[j]
                    flat = (t * S + a) * S + b
                    if gi >= 0:
                        if gj == gi:
                            kk[gi][0].append(flat)
                            kk[gi][1].append(li * self.groups[gi].size + lj)
                        elif gj < 0:
                            ks[gi][0].append(flat)
                            ks[gi][1].append(li * nSh + lj)
                    elif gj < 0:
                        ss[0].append(flat)
                        ss[1].append(li * nSh + lj)
        pack = lambda pair: (np.asarray(pair[0], dtype=int),
                             np.asarray(pair[1], dtype=int))
        self._scatter = ([pack(p) for p in kk], [pack(p) for p in ks],
                         pack(ss))
        if self.uniform:
            d = self.groups[0].size
            src_kk = np.concatenate([np.asarray(kk[k][0], dtype=int)
                                     for k in range(K)])
            dst_kk = np.concatenate([np.asarray(kk[k][1], dtype=int) + k * d * d
                                     for k in range(K)])
            src_ks = np.concatenate([np.asarray(ks[k][0], dtype=int)
                                     for k in range(K)])
            dst_ks = np.concatenate([np.asarray(ks[k][1], dtype=int) + k * d * nSh
                                     for k in range(K)])
            self._scatter_st = (src_kk, dst_kk, src_ks, dst_ks)

    def newton(self, prog, g, inv2, tidx, HFs, tq):
        if self.uniform:
            try:
                return self._newton_batched(prog, g, inv2, tidx, HFs, tq)
            except np.linalg.LinAlgError:
                pass
        return self._newton_loop(prog, g, inv2, tidx, HFs, tq)

    def _newton_batched(self, prog, g, inv2, tidx, HFs, tq):
        """The loop path below, restacked: one (K, d, d) batch per algebra
        step and a single batched factorization for all group pivots."""
        n = prog.n
        shared = self.shared
        nSh = shared.size
        diag = np.zeros(n)
        if tq is not None:
            diag += tq
        if self.sing_rows.size:
            np.add.at(diag, self.sing_cols,
                      self.sing_coef2 * inv2[self.sing_rows])
        if self._scatter is None:
            self._triple_scatter(tidx)
        scat_ss = self._scatter[2]
        src_kk, dst_kk, src_ks, dst_ks = self._scatter_st
        hflat = HFs.ravel()

        K = len(self.groups)
        d = self.groups[0].size
        HSS = np.zeros((nSh, nSh))
        np.add.at(HSS.ravel(), scat_ss[1], hflat[scat_ss[0]])
        if self.B_ss.shape[0]:
            w = inv2[self.in_rows_s]
            HSS += (self.B_ss * w[:, None]).T @ self.B_ss
        mB = self.B_loc_st.shape[1]
        if mB:
            w = inv2[self.in_rows_mat][:, :, None]
            Bw = self.B_loc_st * w
            HSS += np.tensordot(self.B_sh_st * w, self.B_sh_st,
                                axes=([0, 1], [0, 1]))
            Hkk = np.matmul(Bw.transpose(0, 2, 1), self.B_loc_st)
            HkS = np.matmul(Bw.transpose(0, 2, 1), self.B_sh_st)
        else:
            Hkk = np.zeros((K, d, d))
            HkS = np.zeros((K, d, nSh))
        HSS[np.diag_indices(nSh)] += diag[shared]
        ar = np.arange(d)
        Hkk[:, ar, ar] += diag[self.groups_mat]
        np.add.at(Hkk.ravel(), dst_kk, hflat[src_kk])
        if nSh:
            np.add.at(HkS.ravel(), dst_ks, hflat[src_ks])

        gk = g[self.groups_mat]
        Pk, Zk = self.Pk_st, self.Zk_st
        PT = Pk.transpose(0, 2, 1)
        HP = np.matmul(Hkk, Pk) + HkS
        Q = np.matmul(PT, HP) + np.matmul(HkS.transpose(0, 2, 1), Pk)
        l = np.matmul(PT, gk[:, :, None])[:, :, 0]
        m = Zk.shape[2]
        if m:
            ZT = Zk.transpose(0, 2, 1)
            Nk = np.matmul(ZT, HP)
            rk = np.matmul(ZT, gk[:, :, None])
            Mk = np.matmul(ZT, np.matmul(Hkk, Zk))
            sol = np.linalg.solve(Mk, np.concatenate([Nk, rk], axis=2))
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError("nonfinite batched pivot")
            MN, mr = sol[:, :, :nSh], sol[:, :, nSh]
            NT = Nk.transpose(0, 2, 1)
            Q = Q - np.matmul(NT, MN)
            l = l - np.matmul(NT, mr[:, :, None])[:, :, 0]
        Hbar = HSS + Q.sum(axis=0)
        gbar = g[shared] + l.sum(axis=0)

        Hbar = 0.5 * (Hbar + Hbar.T)
        if self.Zs is not None:
            du = _solve_sym(self.Zs.T @ Hbar @ self.Zs, -(self.Zs.T @ gbar))
            dw = self.Zs @ du
        elif nSh:
            dw = _solve_sym(Hbar, -gbar)
        else:
            dw = np.zeros(0)

        dx = np.zeros(n)
        dx[shared] = dw
        dz = np.matmul(Pk, dw)
        if m:
            corr = -(np.matmul(MN, dw) + mr)
            dz = dz + np.matmul(Zk, corr[:, :, None])[:, :, 0]
        dx[self.groups_mat.ravel()] = dz.ravel()
        return dx

    def _newton_loop(self, prog, g, inv2, tidx, HFs, tq):
        n = prog.n
        loc, shared = self.loc, self.shared
        nSh = shared.size
        diag = np.zeros(n)
        if tq is not None:
            diag += tq
        if self.sing_rows.size:
            np.add.at(diag, self.sing_cols,
                      self.sing_coef2 * inv2[self.sing_rows])
        if self._scatter is None:
            self._triple_scatter(tidx)
        scat_kk, scat_ks, scat_ss = self._scatter
        hflat = HFs.ravel()

        K = len(self.groups)
        HSS = np.zeros((nSh, nSh))
        np.add.at(HSS.ravel(), scat_ss[1], hflat[scat_ss[0]])
        if self.B_ss.shape[0]:
            w = inv2[self.in_rows_s]
            HSS += (self.B_ss * w[:, None]).T @ self.B_ss
        for k in range(K):
            if self.B_sh[k].shape[0]:
                w = inv2[self.in_rows_k[k]]
                HSS += (self.B_sh[k] * w[:, None]).T @ self.B_sh[k]
        HSS[np.diag_indices(nSh)] += diag[shared]

        Hbar = HSS
        gbar = g[shared].copy()
        cache = []
        for k, gr in enumerate(self.groups):
            d = gr.size
            if self.B_loc[k].shape[0]:
                w = inv2[self.in_rows_k[k]]
                Bw = self.B_loc[k] * w[:, None]
                Hkk = Bw.T @ self.B_loc[k]
                HkS = Bw.T @ self.B_sh[k]
            else:
                Hkk = np.zeros((d, d))
                HkS = np.zeros((d, nSh))
            Hkk[np.diag_indices(d)] += diag[gr]
            np.add.at(Hkk.ravel(), scat_kk[k][1], hflat[scat_kk[k][0]])
            if nSh:
                np.add.at(HkS.ravel(), scat_ks[k][1], hflat[scat_ks[k][0]])
            gk = g[gr]
            Pk, Zk = self.Pk[k], self.Zk[k]
            HP = Hkk @ Pk + HkS
            Q = Pk.T @ HP + HkS.T @ Pk
            l = Pk.T @ gk
            if Zk.shape[1]:
                Nk = Zk.T @ HP
                rk = Zk.T @ gk
                Mk = Zk.T @ Hkk @ Zk
                sol = _solve_sym(Mk, np.column_stack([Nk, rk]))
                MN, mr = sol[:, :nSh], sol[:, nSh]
                Q = Q - Nk.T @ MN
                l = l - Nk.T @ mr
            else:
                MN = np.zeros((0, nSh))
                mr = np.zeros(0)
            Hbar = Hbar + Q
            gbar = gbar + l
            cache.append((gr, Pk, Zk, MN, mr))

        Hbar = 0.5 * (Hbar + Hbar.T)
        if self.Zs is not None:
            du = _solve_sym(self.Zs.T @ Hbar @ self.Zs,
                            -(self.Zs.T @ gbar))
            dw = self.Zs @ du
        elif nSh:
            dw = _solve_sym(Hbar, -gbar)
        else:
            dw = np.zeros(0)

        dx = np.zeros(n)
        dx[shared] = dw
        for gr, Pk, Zk, MN, mr in cache:
            dz = Pk @ dw
            if Zk.shape[1]:
                dz = dz + Zk @ (-(MN @ dw + mr))
            dx[gr] = dz
        return dx


def _center(prog, x, t_path, shift_idx, obj_c, obj_q, stop_early=None,
            max_inner=100, plan=None, lam_tol=1e-7):
    """Newton with Armijo backtracking to the center of t*f0 + barrier.

    Returns (x, lam, code) with code in {"ok", "big", "stuck", "early",
    "maxinner"}; "big" flags objective blow-down (unboundedness), "early"
    a stop_early trigger, "maxinner" an exhausted iteration budget.
    lam_tol is the Newton-decrement stop: intermediate path hops only need
    rough centering, so callers pass a loose value there and polish tight
    on the final weight.
    """
    A = prog.A_eq
    m_in = prog.A_in.shape[0]
    if plan is None and prog.groups:
        plan = _BlockPlan(prog)
    Z = _null_basis(A) if plan is None else None
    tidx = _triple_index(prog, shift_idx)
    cscale = 1.0 + float(np.max(np.abs(obj_c))) if obj_c.size else 1.0
    lam = math.inf
    stall = 0
    for _ in range(max_inner):
        g, sx, inv2, HFs = _barrier_parts(prog, x, tidx, shift_idx)
        g += t_path * obj_c
        tq = None
        if obj_q is not None:
            tq = t_path * obj_q
            g += tq * x
        if plan is not None:
            dx = plan.newton(prog, g, inv2, tidx, HFs, tq)
        else:
            H = _dense_hess(prog, inv2, tidx, HFs, tq)
            dx = _kkt_solve(H, A, g, Z)
        sdx = prog.A_in @ dx if m_in else None
        lam2 = _dir_curvature(dx, sdx, inv2, tidx, HFs, tq)
        lam = math.sqrt(max(lam2, 0.0))
        if lam <= lam_tol:
            return x, lam, "ok"
        slope = float(g @ dx)  # negative for a descent direction

        def phi_at(alpha):
            # barrier + t * objective along the ray, from cached row values
            xn = x + alpha * dx
            if m_in:
                s = sx + alpha * sdx
                if np.min(s) <= 0.0:
                    return math.inf, xn
                val = -float(np.sum(np.log(s)))
            else:
                val = 0.0
            if tidx.shape[0]:
                u, v, w = _triple_uvw(xn, tidx, shift_idx)
                if not (np.min(v) > 0.0 and np.min(w) > 0.0):
                    return math.inf, xn
                with np.errstate(divide="ignore", invalid="ignore"):
                    zeta = w * np.log1p((v - w) / w) - u
                if not np.min(zeta) > 0.0:
                    return math.inf, xn
                val -= float(np.sum(np.log(zeta) + np.log(v) + np.log(w)))
            return t_path * _obj(obj_c, obj_q, xn) + val, xn

        phi0, _ = phi_at(0.0)
        # fraction-to-boundary: blind halving crawls when the Newton step
        # overshoots the barrier domain, so bisect the crossing instead
        if math.isfinite(phi_at(1.0)[0]):
            alpha = 1.0
        else:
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if math.isfinite(phi_at(mid)[0]):
                    lo = mid
                else:
                    hi = mid
            alpha = 0.99 * lo
        ok = False
        xn = x
        phin = phi0
        for _ in range(60):
            if alpha <= 0:
                break
            phin, xn = phi_at(alpha)
            if phin <= phi0 + 0.25 * alpha * slope + 1e-12 * (1 + abs(phi0)):
                ok = True
                break
            alpha *= 0.5
        if not ok:
            return x, lam, "stuck"
        xn_inf = float(np.max(np.abs(xn)))
        if (xn_inf > 1e6
                and abs(_obj(obj_c, obj_q, xn) - _obj(obj_c, obj_q, x))
                <= 1e-12 * (1.0 + xn_inf) * cscale):
            # runaway along an objective-flat feasible ray: no analytic
            # center exists, but the current point is already optimal on
            # the ray, so hold it before round-off erodes the equalities
            # (the tolerance scales with the coordinates because the dot
            # product itself carries that much cancellation noise)
            return x, lam, "ok"
        x = xn
        # at extreme path weights the KKT matrix conditions like t^2 and
        # the computed decrement is noise; once accepted steps stop moving
        # phi beyond round-off no float64 iterate can improve further
        if phi0 - phin <= 1e-11 * (1.0 + abs(phi0)):
            stall += 1
            if stall >= 3:
                return x, lam, "ok"
        else:
            stall = 0
        if stop_early is not None and stop_early(x):
            return x, lam, "early"
        if _obj(obj_c, obj_q, x) < -_BIG:
            return x, lam, "big"
    return x, lam, "maxinner"


def _obj(c, q, x):
    val = float(c @ x)
    if q is not None:
        val += 0.5 * float((q * x) @ x)
    return val


def _residuals(prog, x):
    pr = 0.0
    if prog.A_eq.shape[0]:
        pr = max(pr, float(np.max(np.abs(prog.A_eq @ x - prog.b_eq))))
    if prog.A_in.shape[0]:
        pr = max(pr, float(np.max(np.maximum(prog.b_in - prog.A_in @ x, 0.0))))
    for t in prog.triples:
        u, v, w = x[t[0]], x[t[1]], x[t[2]]
        if w > 0 and v > 0:
            pr = max(pr, max(0.0, u - w * math.log(v / w)))
        else:
            pr = max(pr, max(0.0, -v), max(0.0, -w), max(0.0, u))
    return pr


def _equality_only_solve(prog, tol):
    """No barrier terms at all: one KKT solve settles it."""
    n = prog.n
    q = prog.q if prog.q is not None else np.zeros(n)
    A, b = prog.A_eq, prog.b_eq
    M = np.zeros((n + A.shape[0], n + A.shape[0]))
    M[:n, :n] = np.diag(q)
    M[:n, n:] = A.T
    M[n:, :n] = A
    rhs = np.concatenate([-prog.c, b])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    x = sol[:n]
    kkt_res = float(np.max(np.abs(M @ sol - rhs))) if sol.size else 0.0
    pr = _residuals(prog, x)
    scale = 1.0 + float(np.max(np.abs(prog.c))) + float(np.max(np.abs(b))) if b.size else 1.0 + float(np.max(np.abs(prog.c)))
    if pr > tol * scale:
        return Solution(x, prog.objective(x), STATUS_INFEASIBLE, pr, kkt_res, 0.0)
    if kkt_res > 1e-7 * scale:
        return Solution(x, prog.objective(x), STATUS_UNBOUNDED, pr, kkt_res, 0.0)
    return Solution(x, prog.objective(x), STATUS_OPTIMAL, pr, kkt_res, 0.0)


def _phase_one(prog, tol, box=None):
    """Find a strictly feasible point, or decide infeasibility.

    Solves min s over the program with every inequality relaxed by s and
    every triple shifted to (u - s, v + s, w + s); the shift map is strictly
    monotone in s, so any iterate with s < 0 is strictly feasible for the
    original program with margin at least |s|.  A big box |x_i| <= box keeps
    the free directions from wandering (the shifted barrier alone does not
    bound them); the box is enlarged and retried once if it binds an
    infeasibility verdict.  Returns (x, status) with status "ok",
    infeasible, or max-iter.
    """
    n = prog.n
    if prog.A_eq.shape[0]:
        x0, *_ = np.linalg.lstsq(prog.A_eq, prog.b_eq, rcond=None)
        res = float(np.max(np.abs(prog.A_eq @ x0 - prog.b_eq)))
        if res > 1e-7 * (1.0 + float(np.max(np.abs(prog.b_eq)))):
            return None, STATUS_INFEASIBLE
    else:
        x0 = np.zeros(n)

    if _strict_margin(prog, x0) > 1e-6:
        return x0, "ok"

    if box is None:
        box = 1e5 * (1.0 + float(np.max(np.abs(x0))))
    m_in = prog.A_in.shape[0]
    A_rows = []
    if m_in:
        A_rows.append(np.hstack([prog.A_in, np.ones((m_in, 1))]))
    A_rows.append(np.hstack([np.eye(n), np.zeros((n, 1))]))
    A_rows.append(np.hstack([-np.eye(n), np.zeros((n, 1))]))
    b_box = np.concatenate([prog.b_in, -box * np.ones(2 * n)])
    aug = ConicProgram(
        n + 1,
        c=np.zeros(n + 1),
        A_eq=np.hstack([prog.A_eq, np.zeros((prog.A_eq.shape[0], 1))]) if prog.A_eq.shape[0] else None,
        b_eq=prog.b_eq if prog.A_eq.shape[0] else None,
        A_in=np.vstack(A_rows),
        b_in=b_box,
        triples=prog.triples,
        groups=prog.groups,
    )
    shift_idx = n
    obj_c = np.zeros(n + 1)
    obj_c[n] = 1.0
    plan = _BlockPlan(aug) if aug.groups else None

    # initial shift: margins of at least one everywhere
    s = 1.0
    if m_in:
        s = max(s, 1.0 + float(np.max(prog.b_in - prog.A_in @ x0)))
    for t in prog.triples:
        u, v, w = x0[t[0]], x0[t[1]], x0[t[2]]
        s = max(s, 1.0 - v, 1.0 - w)
    y = np.concatenate([x0, [s]])
    for _ in range(200):
        good = True
        for t in prog.triples:
            u, v, w = _triple_vals(y, t, shift_idx)
            if v <= 0 or w <= 0 or w * math.log(v / w) - u < 1.0:
                good = False
                break
        if good:
            break
        y[n] *= 2.0
    if not _in_domain(aug, y, shift_idx):
        return None, STATUS_INFEASIBLE

    nu = aug.A_in.shape[0] + 3 * len(prog.triples)
    t_path = 1.0

    def early(z):
        return z[n] < -1e-7 and _strict_margin(prog, z[:n]) > 0

    total = 0
    code = "ok"
    lam = float("inf")
    while True:
        y, lam, code = _center(aug, y, t_path, shift_idx, obj_c, None,
                               stop_early=early, plan=plan,
                               lam_tol=1e-7 if nu / t_path <= 1e-8 else 0.05)
        total += 1
        if y[n] < -1e-7 and _strict_margin(prog, y[:n]) > 0:
            return y[:n], "ok"
        if (code in ("stuck", "maxinner") and lam > 1e-3) or total > 60:
            break
        if nu / t_path <= 1e-8:
            break
        t_path *= 25.0

    # the verdict only needs min s pinned to ~1e-8, not a tight solve
    settled = (code == "ok" or lam <= 1e-3) and nu / t_path <= 1e-8
    if settled and y[n] >= -1e-7:
        if float(np.max(np.abs(y[:n]))) > 0.98 * box and box < 1e9:
            # the box binds the verdict: enlarge once and retry
            return _phase_one(prog, tol, box=box * 1e3)
        return None, STATUS_INFEASIBLE
    return None, STATUS_MAXITER


def _repair_equalities(prog, x):
    """Minimum-norm correction back onto the equality manifold.

    Newton steps only preserve A dx = 0 to solver accuracy; drift is snapped
    away here unless the correction would leave the barrier domain.
    """
    if not prog.A_eq.shape[0]:
        return x
    res = prog.b_eq - prog.A_eq @ x
    if np.max(np.abs(res)) < 1e-13:
        return x
    dx, *_ = np.linalg.lstsq(prog.A_eq, res, rcond=None)
    xn = x + dx
    return xn if _in_domain(prog, xn) else x


def _strict_margin(prog, x):
    m = math.inf
    if prog.A_in.shape[0]:
        m = min(m, float(np.min(prog.A_in @ x - prog.b_in)))
    for t in prog.triples:
        u, v, w = x[t[0]], x[t[1]], x[t[2]]
        if v <= 0 or w <= 0:
            return -math.inf
        m = min(m, v, w, w * math.log(v / w) - u)
    if m is math.inf:
        m = 1.0
    return m


def solve(prog, tol=1e-8, x0=None, t_start=None):
    """Path-following solve of a ConicProgram.

    A caller-provided strictly feasible x0 skips phase one.  t_start, used
    only when x0 is accepted, resumes the path at that weight: pass the
    previous solve's nu / gap when re-solving a slightly perturbed program
    so the path is not rewalked from scratch (fall back to a cold solve if
    the result comes back non-optimal).  The returned gap field is the
    final barrier certificate nu / t, which bounds the objective
    suboptimality at exit.
    """
    if tol <= 0 or tol > 1e-2:
        raise ValueError("tol must be in (0, 1e-2]")
    nu = prog.A_in.shape[0] + 3 * len(prog.triples)
    if nu == 0:
        return _equality_only_solve(prog, tol)

    if x0 is not None:
        x = np.asarray(x0, dtype=float).copy()
        if not _in_domain(prog, x) or (
                prog.A_eq.shape[0] and
                np.max(np.abs(prog.A_eq @ x - prog.b_eq)) > 1e-7):
            x = None
    else:
        x = None
    warm = x is not None
    if x is None:
        x, status = _phase_one(prog, tol)
        if x is None:
            return Solution(np.zeros(prog.n), math.nan, status,
                            math.inf, math.inf, math.inf)

    plan = _BlockPlan(prog) if prog.groups else None
    t_path = max(1.0, nu / (1.0 + abs(prog.objective(x))))
    if warm and t_start is not None:
        t_path = min(max(float(t_start), 1.0), 1.01 * nu / tol)
    outer = 0
    lam = math.inf
    while True:
        last = nu / t_path <= tol
        x, lam, code = _center(prog, x, t_path, -1, prog.c, prog.q, plan=plan,
                               lam_tol=1e-7 if last else 0.05)
        x = _repair_equalities(prog, x)
        outer += 1
        if code == "big":
            return Solution(x, prog.objective(x), STATUS_UNBOUNDED,
                            _residuals(prog, x), math.inf, nu / t_path)
        if code in ("stuck", "maxinner") and lam > 1e-3:
            return Solution(x, prog.objective(x), STATUS_MAXITER,
                            _residuals(prog, x), lam, nu / t_path)
        if last:
            break
        if outer > 60:
            return Solution(x, prog.objective(x), STATUS_MAXITER,
                            _residuals(prog, x), lam, nu / t_path)
        # do not overshoot the last hop: conditioning worsens with t for
        # no benefit once nu/t <= tol is reachable
        t_path = min(t_path * 25.0, 1.01 * nu / tol)

    pr = _residuals(prog, x)
    g, _, _, _ = _barrier_parts(prog, x, _triple_index(prog, -1))
    g = g / t_path + prog.c + (prog.q * x if prog.q is not None else 0.0)
    if prog.A_eq.shape[0]:
        w = np.linalg.lstsq(prog.A_eq.T, -g, rcond=None)[0]
        g = g + prog.A_eq.T @ w
    dr = float(np.max(np.abs(g)))
    status = STATUS_OPTIMAL
    scale = 1.0 + abs(prog.objective(x))
    if pr > tol * scale:
        status = STATUS_MAXITER
    return Solution(x, prog.objective(x), status, pr, dr, nu / t_path)


def lp_solve(prog, tol=1e-8, x0=None):
    """solve() restricted to programs without exponential-cone triples."""
    if prog.triples:
        raise ValueError("lp_solve cannot handle exp-cone triples")
    return solve(prog, tol=tol, x0=x0)


def dump_program(prog):
    """Plain-text rendering, one constraint per line, for external checks."""
    lines = ["vars %d" % prog.n]
    terms = " ".join("%.17g*x%d" % (ci, i) for i, ci in enumerate(prog.c) if ci)
    lines.append("min %s" % (terms or "0"))
    if prog.q is not None and np.any(prog.q):
        qs = " ".join("%.17g*x%d^2" % (0.5 * qi, i)
                      for i, qi in enumerate(prog.q) if qi)
        lines.append("quad %s" % qs)
    for row, rhs in zip(prog.A_eq, prog.b_eq):
        t = " ".join("%.17g*x%d" % (a, i) for i, a in enumerate(row) if a)
        lines.append("eq %s = %.17g" % (t or "0", rhs))
    for row, rhs in zip(prog.A_in, prog.b_in):
        t = " ".join("%.17g*x%d" % (a, i) for i, a in enumerate(row) if a)
        lines.append("ineq %s >= %.17g" % (t or "0", rhs))
    for (u, v, w) in prog.triples:
        lines.append("expcone u=x%d v=x%d w=x%d" % (u, v, w))
    return "\n".join(lines) + "\n"
