"""Lumped approximate inverses and the block lower-triangular preconditioner."""

import numpy as np
import scipy.sparse as sp

from .linalg import gauss_seidel_apply, jacobi_apply, sparse_lu

__all__ = ["LumpingError", "LumpedInverse", "lump_A", "build_lumped_schur", "BlockTriPrec"]


class LumpingError(Exception):
    pass


class LumpedInverse:
    """Sparse approximation of A^-1: diagonal on interior rows, 2x2
    component-coupled blocks on rows touching the boundary term."""

    def __init__(self, Ainv, Alump):
        self.Ainv = Ainv
        self.Alump = Alump

    def __matmul__(self, x):
        return self.Ainv @ x


def _component_split(space):
    nd = space.ndof_local
    if space.kind == "Wp":
        half = space.basis.n
    elif space.kind in ("RTp", "brokenRTp"):
        half = space.basis.nx
    else:
        raise LumpingError(f"lumping undefined for space kind {space.kind}")
    return np.arange(half), np.arange(half, nd)


def lump_A(localA, V, bdr_elems):
    """Row-sum lumping of element matrices; elements with a boundary face are
    lumped per component sub-block, pairing the k-th x and y dofs.

    Returns a LumpedInverse whose sparse inverse has at most two entries per row.
    """
    ix, iy = _component_split(V)
    ne, nd, _ = localA.shape
    diag = np.zeros(V.n_dofs)
    cross = np.zeros(V.n_dofs)
    partner = -np.ones(V.n_dofs, dtype=int)
    # fix a mutual x/y pairing before accumulating cross terms
    for e in sorted(bdr_elems):
        gx = V.dofs[e][ix]
        gy = V.dofs[e][iy]
        for a, b in zip(gx, gy):
            if partner[a] < 0 and partner[b] < 0 and a != b:
                partner[a] = b
                partner[b] = a
    sgn = V.signs
    for e in range(ne):
        Ae = localA[e] * sgn[e][:, None] * sgn[e][None, :]
        if e in bdr_elems:
            for rows in (ix, iy):
                for cols in (ix, iy):
                    rs = Ae[np.ix_(rows, cols)].sum(axis=1)
                    gr = V.dofs[e][rows]
                    gc = V.dofs[e][cols]
                    same = gr == gc
                    np.add.at(diag, gr[same], rs[same])
                    for k in np.where(~same)[0]:
                        g, h = gr[k], gc[k]
                        if partner[g] == h:
                            cross[g] += rs[k]
                        else:
                            # partner already taken elsewhere; fold into the diagonal
                            diag[g] += rs[k]
        else:
            np.add.at(diag, V.dofs[e], Ae.sum(axis=1))
    rows, cols, vals = [], [], []
    done = np.zeros(V.n_dofs, dtype=bool)
    lrows, lcols, lvals = [], [], []
    for g in range(V.n_dofs):
        if done[g]:
            continue
        h = partner[g]
        if h >= 0 and cross[g] == 0.0 and cross[h] == 0.0:
            h = -1
        if h < 0:
            if diag[g] == 0.0:
                raise LumpingError(f"zero lumped diagonal at dof {g}")
            rows.append(g), cols.append(g), vals.append(1.0 / diag[g])
            lrows.append(g), lcols.append(g), lvals.append(diag[g])
            done[g] = True
        else:
            M = np.array([[diag[g], cross[g]], [cross[h], diag[h]]])
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if det == 0.0:
                raise LumpingError(f"singular 2x2 lumped block at dofs ({g}, {h})")
            Minv = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / det
            for (a, b), v in np.ndenumerate(Minv):
                rows.append((g, h)[a]), cols.append((g, h)[b]), vals.append(v)
            for (a, b), v in np.ndenumerate(M):
                lrows.append((g, h)[a]), lcols.append((g, h)[b]), lvals.append(v)
            done[g] = done[h] = True
    n = V.n_dofs
    Ainv = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    Alump = sp.coo_matrix((lvals, (lrows, lcols)), shape=(n, n)).tocsr()
    return LumpedInverse(Ainv, Alump)


def build_lumped_schur(Ma, D, G, lumped):
    """Approximate Schur complement Ma - D Ainv G via sparse products."""
    return (Ma - D @ lumped.Ainv @ G).tocsr()


class BlockTriPrec:
    """Forward substitution on [[A, 0], [D, S~]] with approximate sub-solves."""

    def __init__(self, A, D, schur, smoother, n_smooth, schur_solver, n_schur):
        self.A = A
        self.D = D
        self.schur = schur
        self.smoother = smoother
        self.n_smooth = n_smooth
        self.schur_solver = schur_solver
        self.n_schur = n_schur
        self._alu = None
        self._slu = None
        if smoother == "exact":
            self._alu = sparse_lu(A.tocsc())
        if schur_solver in ("direct", "exact"):
            self._slu = sparse_lu(schur.tocsc())

    @classmethod
    def build(cls, system, config):
        lumped = lump_A(system.localA, system.V, system.bdr_elems)
        if config.schur == "exact":
            # dense Schur with the true A inverse; small systems only
            Ad = system.A.toarray()
            S = system.Ma.toarray() - system.D.toarray() @ np.linalg.solve(Ad, system.G.toarray())
            schur = sp.csr_matrix(S)
        else:
            schur = build_lumped_schur(system.Ma, system.D, system.G, lumped)
        return cls(system.A, system.D, schur, config.smoother, config.n_smooth, config.schur, config.n_schur)

    def apply(self, r):
        n1 = self.A.shape[0]
        r1, r2 = r[:n1], r[n1:]
        if self.smoother == "exact":
            x1 = self._alu.solve(r1)
        elif self.smoother == "gs":
            x1 = gauss_seidel_apply(self.A, r1, self.n_smooth)
        else:
            x1 = jacobi_apply(self.A, r1, self.n_smooth)
        rhs = r2 - self.D @ x1
        if self.schur_solver in ("direct", "exact"):
            x2 = self._slu.solve(rhs)
        else:
            x2 = gauss_seidel_apply(self.schur, rhs, self.n_schur)
        return np.concatenate([x1, x2])
