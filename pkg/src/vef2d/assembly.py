"""Assembly of the mixed VEF block system [[A, G], [D, Ma]] [J; phi] = [g; f].

The current space V is W_{p+1} (components continuous), RT_p, or broken RT_p.
RT terms use the contravariant Piola transform; the gradient-against-tensor
volume term is computed in reference space as (grad_ref v - Bhat) : F^T E F^-T,
where Bhat comes from the flattened mesh Hessian.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import SolveStats, bicgstab, export_matrix_market, sparse_lu
from .mesh import side_ref_points
from .spaces import GridFunction, piola_bmat

__all__ = [
    "AssemblyError",
    "SolverConfig",
    "VefBlockSystem",
    "assemble_A",
    "assemble_Ma",
    "assemble_D",
    "assemble_G",
    "assemble_rhs",
    "assemble_vef_system",
    "solve_mixed",
    "dump_blocks",
]


class AssemblyError(Exception):
    pass


def _field_at(f, x):
    if callable(f):
        return np.asarray(f(x.reshape(-1, 2)), dtype=float).reshape(x.shape[:-1])
    return np.full(x.shape[:-1], float(f))


def _vec_trace(basis, rule, side, flip):
    s = 1.0 - rule.points if flip else rule.points
    return basis.eval(side_ref_points(side, s))


class _Scatter:
    def __init__(self, nrow, ncol):
        self.r, self.c, self.v = [], [], []
        self.shape = (nrow, ncol)

    def add(self, rows, cols, vals):
        rows, cols = np.broadcast_arrays(rows, cols)
        self.r.append(rows.ravel())
        self.c.append(cols.ravel())
        self.v.append(np.broadcast_to(vals, rows.shape).ravel())

    def tocsr(self):
        if not self.r:
            return sp.csr_matrix(self.shape)
        return sp.coo_matrix(
            (np.concatenate(self.v), (np.concatenate(self.r), np.concatenate(self.c))),
            shape=self.shape,
        ).tocsr()


def _physical_vec_shapes_vol(V, layout):
    """Physical vector shape values at volume points: (Ne, nq, nd, 2)."""
    vol = layout.vol
    if V.kind == "Wp":
        shp = V.basis.eval(vol.points)
        ns = V.basis.n
        vec = np.zeros((1, vol.n_q, 2 * ns, 2))
        vec[0, :, :ns, 0] = shp
        vec[0, :, ns:, 1] = shp
        return np.broadcast_to(vec, (V.mesh.n_elems, vol.n_q, 2 * ns, 2))
    vhat = V.basis.eval(vol.points)
    return np.einsum("eqcd,qnd->eqnc", vol.F, vhat) / vol.J[..., None, None]


def _physical_vec_trace(V, ft, geo, side_arr, flip_arr):
    """Physical vector traces on faces: (Nf, nq, nd, 2)."""
    nf, nq = len(side_arr), ft.n_q
    out = np.empty((nf, nq, V.ndof_local, 2))
    for side in range(4):
        for flip in (False, True):
            mask = (side_arr == side) & (flip_arr == flip)
            if not mask.any():
                continue
            if V.kind == "Wp":
                shp = _vec_trace(V.basis, ft.rule, side, flip)
                ns = V.basis.n
                vec = np.zeros((nq, 2 * ns, 2))
                vec[:, :ns, 0] = shp
                vec[:, ns:, 1] = shp
                out[mask] = vec
            else:
                vhat = V.basis.eval(
                    side_ref_points(side, 1.0 - ft.rule.points if flip else ft.rule.points)
                )
                out[mask] = np.einsum(
                    "fqcd,qnd->fqnc", geo["F"][mask], vhat
                ) / geo["J"][mask][..., None, None]
    return out


def _scalar_trace(Y, ft, side_arr, flip_arr):
    nf, nq = len(side_arr), ft.n_q
    out = np.empty((nf, nq, Y.ndof_local))
    for side in range(4):
        for flip in (False, True):
            mask = (side_arr == side) & (flip_arr == flip)
            if mask.any():
                out[mask] = _vec_trace(Y.basis, ft.rule, side, flip)
    return out


def _scatter_local(S, space, local):
    """Scatter per-element dense blocks with orientation signs."""
    d = space.dofs
    s = space.signs
    vals = local * s[:, :, None] * s[:, None, :]
    S.add(d[:, :, None], d[:, None, :], vals)


def assemble_Ma(Y, sigma_a, layout, want_local=False):
    """DG absorption mass matrix."""
    vol = layout.vol
    shp = Y.basis.eval(vol.points)
    sa = _field_at(sigma_a, vol.x)
    local = np.einsum("eq,qi,qj->eij", vol.w * vol.J * sa, shp, shp)
    S = _Scatter(Y.n_dofs, Y.n_dofs)
    _scatter_local(S, Y, local)
    return (S.tocsr(), local) if want_local else S.tocsr()


def assemble_D(Y, V, layout, want_local=False):
    """Divergence block: entries int u div(J) dx."""
    vol = layout.vol
    shp_y = Y.basis.eval(vol.points)
    if V.kind in ("RTp", "brokenRTp"):
        # u dhat(v) has no metric factor: J from dx cancels the Piola 1/J
        d0 = np.einsum("q,qi,qn->in", vol.w, shp_y, V.basis.div(vol.points))
        local = np.broadcast_to(d0, (V.mesh.n_elems,) + d0.shape)
    else:
        g = V.basis.grad(vol.points)
        ns = V.basis.n
        div = np.empty((V.mesh.n_elems, vol.n_q, 2 * ns))
        div[:, :, :ns] = np.einsum("eqk,qnk->eqn", vol.Finv[..., 0], g)
        div[:, :, ns:] = np.einsum("eqk,qnk->eqn", vol.Finv[..., 1], g)
        local = np.einsum("eq,qi,eqn->ein", vol.w * vol.J, shp_y, div)
    S = _Scatter(Y.n_dofs, V.n_dofs)
    vals = local * V.signs[:, None, :]
    S.add(Y.dofs[:, :, None], V.dofs[:, None, :], vals)
    return (S.tocsr(), local) if want_local else S.tocsr()


def assemble_A(V, sigma_t, vef, layout, want_local=False):
    """Interaction mass plus the Miften-Larsen boundary term on Gamma_b."""
    vol, fb = layout.vol, layout.fb
    st = _field_at(sigma_t, vol.x)
    nd = V.ndof_local
    if V.kind in ("RTp", "brokenRTp"):
        FV = np.einsum("eqcd,qnd->eqnc", vol.F, V.basis.eval(vol.points))
        local = np.einsum("eq,eqnc,eqmc->enm", vol.w * st / vol.J, FV, FV)
    else:
        vec = _physical_vec_shapes_vol(V, layout)
        local = np.einsum("eq,qnc,qmc->enm", vol.w * st * vol.J, vec[0], vec[0])
    local = np.ascontiguousarray(local)
    bdr_elems = set()
    if len(fb.faces):
        if np.any(vef.Eb_bdr <= 0.0):
            raise AssemblyError("boundary factor E_b vanishes on a boundary face")
        flips = np.zeros(len(fb.faces), dtype=bool)
        v = _physical_vec_trace(V, fb, fb.geo1, fb.side1, flips)
        vEn = np.einsum("fqnc,fqc->fqn", v, vef.En_bdr)
        vn = np.einsum("fqnc,fqc->fqn", v, fb.n)
        blk = np.einsum("fq,fqn,fqm->fnm", fb.wq / vef.Eb_bdr, vEn, vn)
        for i, e in enumerate(fb.elem1):
            local[e] += blk[i]
            bdr_elems.add(int(e))
    S = _Scatter(V.n_dofs, V.n_dofs)
    _scatter_local(S, V, local)
    A = S.tocsr()
    return (A, local, bdr_elems) if want_local else A


def assemble_G(Y, V, vef, layout, want_local=False):
    """Gradient-against-Eddington block; the RT variant adds the interior-face
    numerical flux [[v . <En>]] <phi>, the broken variant omits it."""
    vol = layout.vol
    shp_y = Y.basis.eval(vol.points)
    if V.kind == "Wp":
        g = V.basis.grad(vol.points)
        ns = V.basis.n
        tmp = np.einsum("eqkc,qnk->eqnc", vol.Finv, g)  # (F^-T grad)_c
        dvE = np.empty((V.mesh.n_elems, vol.n_q, 2 * ns))
        dvE[:, :, :ns] = np.einsum("eqnc,eqc->eqn", tmp, vef.E_vol[:, :, 0, :])
        dvE[:, :, ns:] = np.einsum("eqnc,eqc->eqn", tmp, vef.E_vol[:, :, 1, :])
        local = -np.einsum("eq,eqn,qj->enj", vol.w * vol.J, dvE, shp_y)
    else:
        vhat = V.basis.eval(vol.points)
        ghat = V.basis.grad(vol.points)
        vp = np.einsum("eqcd,qnd->eqnc", vol.F, vhat) / vol.J[..., None, None]
        B = piola_bmat(vol.H[:, :, None, :, :], vp)
        M = np.einsum("eqka,eqkl,eqbl->eqab", vol.F, vef.E_vol, vol.Finv)
        contracted = np.einsum("eqnab,eqab->eqn", ghat[None, ...] - B, M)
        # the J of dx cancels the Piola 1/J: weight is the bare rule weight
        local = -np.einsum("q,eqn,qj->enj", vol.w, contracted, shp_y)
    S = _Scatter(V.n_dofs, Y.n_dofs)
    vals = local * V.signs[:, :, None]
    S.add(V.dofs[:, :, None], Y.dofs[:, None, :], vals)

    if V.kind == "RTp":
        fi = layout.fi
        if len(fi.faces):
            flips0 = np.zeros(len(fi.faces), dtype=bool)
            v1 = _physical_vec_trace(V, fi, fi.geo1, fi.side1, flips0)
            v2 = _physical_vec_trace(V, fi, fi.geo2, fi.side2, fi.flip)
            y1 = _scalar_trace(Y, fi, fi.side1, flips0)
            y2 = _scalar_trace(Y, fi, fi.side2, fi.flip)
            vEn1 = np.einsum("fqnc,fqc->fqn", v1, vef.Eavg_n)
            vEn2 = np.einsum("fqnc,fqc->fqn", v2, vef.Eavg_n)
            sgn1 = V.signs[fi.elem1]
            sgn2 = V.signs[fi.elem2]
            for vEn, vd, sv, sgn_jump in ((vEn1, fi.elem1, sgn1, 1.0), (vEn2, fi.elem2, sgn2, -1.0)):
                for ytr, yd in ((y1, fi.elem1), (y2, fi.elem2)):
                    blk = 0.5 * sgn_jump * np.einsum("fq,fqn,fqj->fnj", fi.wq, vEn, ytr)
                    blk = blk * sv[:, :, None]
                    S.add(V.dofs[vd][:, :, None], Y.dofs[yd][:, None, :], blk)
    G = S.tocsr()
    return (G, local) if want_local else G


def assemble_rhs(Y, V, Q0, Q1, Jin, vef, layout, want_local=False):
    """Moment sources and Miften-Larsen inflow: returns (g, f)."""
    vol, fb = layout.vol, layout.fb
    shp_y = Y.basis.eval(vol.points)
    f_loc = np.einsum("eq,qi->ei", vol.w * vol.J * _field_at(Q0, vol.x), shp_y)
    f = np.zeros(Y.n_dofs)
    Y.scatter_add(f, f_loc)

    q1 = Q1(vol.x.reshape(-1, 2)).reshape(vol.x.shape[:-1] + (2,)) if callable(Q1) else np.broadcast_to(np.asarray(Q1, float), vol.x.shape)
    if V.kind in ("RTp", "brokenRTp"):
        Fv = np.einsum("eqcd,qnd->eqnc", vol.F, V.basis.eval(vol.points))
        g_loc = np.einsum("q,eqnc,eqc->en", vol.w, Fv, q1)
    else:
        vec = _physical_vec_shapes_vol(V, layout)
        g_loc = np.einsum("eq,eqnc,eqc->en", vol.w * vol.J, vec, q1)
    if len(fb.faces):
        flips = np.zeros(len(fb.faces), dtype=bool)
        v = _physical_vec_trace(V, fb, fb.geo1, fb.side1, flips)
        vEn = np.einsum("fqnc,fqc->fqn", v, vef.En_bdr)
        jin = Jin(fb.x, fb.n) if callable(Jin) else np.full(fb.x.shape[:-1], float(Jin))
        add = 2.0 * np.einsum("fq,fqn->fn", fb.wq * jin / vef.Eb_bdr, vEn)
        np.add.at(g_loc, fb.elem1, add)
    g = np.zeros(V.n_dofs)
    V.scatter_add(g, g_loc)
    return ((g, f), (g_loc, f_loc)) if want_local else (g, f)


@dataclass
class VefBlockSystem:
    kind: str
    Y: object
    V: object
    layout: object
    A: sp.csr_matrix
    G: sp.csr_matrix
    D: sp.csr_matrix
    Ma: sp.csr_matrix
    g: np.ndarray
    f: np.ndarray
    localA: np.ndarray = None
    bdr_elems: set = field(default_factory=set)


def assemble_vef_system(Y, V, sigma_t, sigma_a, Q0, Q1, Jin, vef, layout):
    kind = {"Wp": "h1", "RTp": "rt", "brokenRTp": "hrt"}[V.kind]
    A, localA, bdr = assemble_A(V, sigma_t, vef, layout, want_local=True)
    Ma = assemble_Ma(Y, sigma_a, layout)
    D = assemble_D(Y, V, layout)
    G = assemble_G(Y, V, vef, layout)
    g, f = assemble_rhs(Y, V, Q0, Q1, Jin, vef, layout)
    return VefBlockSystem(kind, Y, V, layout, A, G, D, Ma, g, f, localA, bdr)


@dataclass
class SolverConfig:
    method: str = "direct"  # direct | bicgstab
    tol: float = 1e-8
    maxit: int = 1000
    smoother: str = "jacobi"  # jacobi | gs | exact
    n_smooth: int = 1
    schur: str = "direct"  # direct | gs | exact
    n_schur: int = 1


def solve_mixed(system, config=None, x0=None):
    """Solve the assembled block system; returns (phi, J, stats)."""
    config = config or SolverConfig()
    K = sp.bmat([[system.A, system.G], [system.D, system.Ma]], format="csr")
    b = np.concatenate([system.g, system.f])
    nv = system.V.n_dofs
    if config.method == "direct":
        x = sparse_lu(K.tocsc()).solve(b)
        res = np.linalg.norm(b - K @ x) / max(np.linalg.norm(b), 1e-300)
        stats = SolveStats(0, res, True)
    else:
        from .precond import BlockTriPrec

        prec = BlockTriPrec.build(system, config)
        x, stats = bicgstab(K, b, x0=x0, prec=prec.apply, tol=config.tol, maxit=config.maxit)
    J = GridFunction(system.V, x[:nv])
    phi = GridFunction(system.Y, x[nv:])
    return phi, J, stats


def dump_blocks(system, prefix):
    for name, M in (("A", system.A), ("G", system.G), ("D", system.D), ("Ma", system.Ma)):
        export_matrix_market(f"{prefix}_{name}.mtx", M)
