"""Finite element spaces (DG, continuous scalar/vector, RT, trace) and field
evaluation including the contravariant Piola transform and its gradient."""

import numpy as np

from .basis import Bernstein1D, Lagrange1D, RTBasis, TensorBasis
from .mesh import edge_local_nodes, mesh_h
from .quadrature import gauss_legendre, gauss_lobatto, volume_rule

__all__ = [
    "FeSpace",
    "GridFunction",
    "build_dof_map",
    "eval_scalar",
    "eval_scalar_grad",
    "eval_vector_h1",
    "eval_vector_h1_grad",
    "eval_rt",
    "eval_rt_grad",
    "eval_rt_div",
    "l2_project",
    "rt_edge_dofs",
    "rt_edge_sign",
    "save_gridfunction",
    "load_gridfunction",
]

# sign of the outward reference-normal component carried by an edge dof
_RT_SIDE_SIGN = np.array([-1.0, 1.0, 1.0, -1.0])


def rt_edge_sign(side):
    return _RT_SIDE_SIGN[side]


def rt_edge_dofs(p, side):
    """Local RT dof indices whose normal trace lives on a side, in edge order."""
    nx = (p + 2) * (p + 1)
    k = np.arange(p + 1)
    if side == 0:
        return nx + k
    if side == 1:
        return k * (p + 2) + (p + 1)
    if side == 2:
        return nx + (p + 1) * (p + 1) + k
    if side == 3:
        return k * (p + 2)
    raise ValueError(f"bad side {side}")


def _scalar_basis(p, variant):
    if variant == "bernstein":
        b = Bernstein1D(p)
    elif variant == "gl":
        b = Lagrange1D(gauss_legendre(p + 1).points)
    elif variant == "gll":
        b = Lagrange1D(gauss_lobatto(p + 1).points)
    else:
        raise ValueError(f"unknown basis variant {variant}")
    return TensorBasis(b, b)


def _hash_nodes(coords, tol):
    """Assign shared ids to coincident points (within tol) across elements."""
    ids = np.empty(len(coords), dtype=int)
    buckets = {}
    n = 0
    for i, (x, y) in enumerate(coords):
        kx, ky = int(round(x / tol)), int(round(y / tol))
        hit = -1
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                j = buckets.get((kx + dx, ky + dy), -1)
                if j >= 0 and abs(coords[j][0] - x) <= tol and abs(coords[j][1] - y) <= tol:
                    hit = j
                    break
            if hit >= 0:
                break
        if hit >= 0:
            ids[i] = ids[hit]
        else:
            buckets[(kx, ky)] = i
            ids[i] = n
            n += 1
    return ids, n


class FeSpace:
    """One of Yp, Vp, Wp, RTp, brokenRTp, LambdaP on a mesh, with its dof map."""

    def __init__(self, mesh, kind, p, dofs, signs, n_dofs, basis, component_of=None):
        self.mesh = mesh
        self.kind = kind
        self.p = p
        self.dofs = dofs
        self.signs = signs
        self.n_dofs = n_dofs
        self.basis = basis
        self.component_of = component_of
        self.ndof_local = dofs.shape[1] if dofs.ndim == 2 else dofs.shape[-1]

    @property
    def is_vector(self):
        return self.kind in ("Wp", "RTp", "brokenRTp")

    def local_coeffs(self, u):
        """Per-element local coefficients, orientation signs applied."""
        return self.signs * np.asarray(u)[self.dofs]

    def scatter_add(self, vec, local):
        np.add.at(vec, self.dofs.ravel(), (self.signs * local).ravel())


def _build_yp(mesh, p, variant):
    basis = _scalar_basis(p, variant)
    nd = basis.n
    dofs = np.arange(mesh.n_elems * nd).reshape(mesh.n_elems, nd)
    return FeSpace(mesh, "Yp", p, dofs, np.ones_like(dofs, dtype=float), mesh.n_elems * nd, basis)


def _build_vp_nodes(mesh, p):
    basis = _scalar_basis(p, "gll")
    ref = basis.nodes2d()
    coords = mesh.transform(None, ref).reshape(-1, 2)
    tol = 1e-12 * max(1.0, mesh_h(mesh))
    ids, n = _hash_nodes(coords, tol)
    return basis, ids.reshape(mesh.n_elems, basis.n), n


def _build_vp(mesh, p):
    if p < 1:
        raise ValueError("Vp requires p >= 1")
    basis, dofs, n = _build_vp_nodes(mesh, p)
    return FeSpace(mesh, "Vp", p, dofs, np.ones_like(dofs, dtype=float), n, basis)


def _build_wp(mesh, p):
    if p < 1:
        raise ValueError("Wp requires p >= 1")
    basis, sdofs, n = _build_vp_nodes(mesh, p)
    dofs = np.concatenate([sdofs, sdofs + n], axis=1)
    comp = np.zeros(2 * n, dtype=int)
    comp[n:] = 1
    return FeSpace(mesh, "Wp", p, dofs, np.ones_like(dofs, dtype=float), 2 * n, basis, comp)


def _build_rt(mesh, p, broken):
    basis = RTBasis(p)
    nd = basis.n
    ne = mesh.n_elems
    if broken:
        dofs = np.arange(ne * nd).reshape(ne, nd)
        comp = np.zeros(ne * nd, dtype=int)
        comp.reshape(ne, nd)[:, basis.nx :] = 1
        return FeSpace(
            mesh, "brokenRTp", p, dofs, np.ones((ne, nd)), ne * nd, basis, comp
        )
    dofs = -np.ones((ne, nd), dtype=int)
    signs = np.ones((ne, nd))
    # interior-face normal dofs are shared; the owner (lower element id) keeps
    # its raw reference dof and the neighbor picks up an orientation sign
    for f in mesh.interior_faces:
        ed1 = rt_edge_dofs(p, f.side1)
        ed2 = rt_edge_dofs(p, f.side2)
        s = -rt_edge_sign(f.side2) * rt_edge_sign(f.side1)
        for j2 in range(p + 1):
            j1 = p - j2 if f.flip else j2
            dofs[f.elem2, ed2[j2]] = -2 - (f.elem1 * nd + ed1[j1])  # placeholder link
            signs[f.elem2, ed2[j2]] = s
    n = 0
    comp = []
    for e in range(ne):
        for i in range(nd):
            if dofs[e, i] == -1:
                dofs[e, i] = n
                comp.append(0 if i < basis.nx else 1)
                n += 1
    for e in range(ne):
        for i in range(nd):
            if dofs[e, i] < -1:
                link = -2 - dofs[e, i]
                dofs[e, i] = dofs[link // nd, link % nd]
    return FeSpace(mesh, "RTp", p, dofs, signs, n, basis, np.array(comp))


class LambdaSpace(FeSpace):
    """Trace space on the interior skeleton; dofs indexed per interior face."""

    def __init__(self, mesh, p):
        nfi = len(mesh.interior_faces)
        dofs = np.arange(nfi * (p + 1)).reshape(nfi, p + 1)
        basis = Lagrange1D(gauss_legendre(p + 1).points)
        super().__init__(mesh, "LambdaP", p, dofs, np.ones_like(dofs, dtype=float), nfi * (p + 1), basis)


def build_dof_map(mesh, kind, p, basis="gl"):
    """Build a finite element space over the mesh.

    kind: Yp | Vp | Wp | RTp | brokenRTp | LambdaP. For Yp, basis selects the
    local nodal family ('gl' Lagrange or 'bernstein').
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    if kind == "Yp":
        return _build_yp(mesh, p, basis)
    if kind == "Vp":
        return _build_vp(mesh, p)
    if kind == "Wp":
        return _build_wp(mesh, p)
    if kind == "RTp":
        return _build_rt(mesh, p, broken=False)
    if kind == "brokenRTp":
        return _build_rt(mesh, p, broken=True)
    if kind == "LambdaP":
        return LambdaSpace(mesh, p)
    raise ValueError(f"unknown space kind {kind}")


class GridFunction:
    """Coefficient vector over a finite element space."""

    def __init__(self, space, data=None):
        self.space = space
        self.data = np.zeros(space.n_dofs) if data is None else np.asarray(data, dtype=float)
        if len(self.data) != space.n_dofs:
            raise ValueError("coefficient vector does not match space dimension")


def _check_kind(gf, kinds):
    if gf.space.kind not in kinds:
        raise TypeError(f"space kind {gf.space.kind} not in {kinds}")


def eval_scalar(gf, elem, pts):
    _check_kind(gf, ("Yp", "Vp"))
    pts = np.atleast_2d(pts)
    loc = gf.space.local_coeffs(gf.data)[elem]
    return gf.space.basis.eval(pts) @ loc


def eval_scalar_grad(gf, elem, pts):
    _check_kind(gf, ("Yp", "Vp"))
    pts = np.atleast_2d(pts)
    loc = gf.space.local_coeffs(gf.data)[elem]
    ghat = np.einsum("qnd,n->qd", gf.space.basis.grad(pts), loc)
    geo = gf.space.mesh.geometry(np.array([elem]), pts)
    return np.einsum("qji,qj->qi", geo.Finv[0], ghat)


def eval_vector_h1(gf, elem, pts):
    _check_kind(gf, ("Wp",))
    pts = np.atleast_2d(pts)
    loc = gf.space.local_coeffs(gf.data)[elem]
    ns = gf.space.basis.n
    shp = gf.space.basis.eval(pts)
    return np.stack([shp @ loc[:ns], shp @ loc[ns:]], axis=1)


def eval_vector_h1_grad(gf, elem, pts):
    _check_kind(gf, ("Wp",))
    pts = np.atleast_2d(pts)
    loc = gf.space.local_coeffs(gf.data)[elem]
    ns = gf.space.basis.n
    g = gf.space.basis.grad(pts)
    geo = gf.space.mesh.geometry(np.array([elem]), pts)
    out = np.empty((len(pts), 2, 2))
    for c, coeff in enumerate((loc[:ns], loc[ns:])):
        ghat = np.einsum("qnd,n->qd", g, coeff)
        out[:, c, :] = np.einsum("qji,qj->qi", geo.Finv[0], ghat)
    return out


def _rt_ref_value(gf, elem, pts):
    loc = gf.space.local_coeffs(gf.data)[elem]
    return np.einsum("qnc,n->qc", gf.space.basis.eval(pts), loc)


def eval_rt(gf, elem, pts):
    """Contravariant Piola value v = (1/J) F vhat."""
    _check_kind(gf, ("RTp", "brokenRTp"))
    pts = np.atleast_2d(pts)
    vhat = _rt_ref_value(gf, elem, pts)
    geo = gf.space.mesh.geometry(np.array([elem]), pts)
    return np.einsum("qcd,qd->qc", geo.F[0], vhat) / geo.J[0][:, None]


def piola_bmat(H, v_phys):
    """Flattened-Hessian correction Bhat given physical vector values.

    H has rows [x;y] of [d2/dxi2, d2/dxideta, d2/deta2]; returns (..,2,2).
    """
    H11, H12, H13 = H[..., 0, 0], H[..., 0, 1], H[..., 0, 2]
    H21, H22, H23 = H[..., 1, 0], H[..., 1, 1], H[..., 1, 2]
    v1, v2 = v_phys[..., 0], v_phys[..., 1]
    B = np.empty(H.shape[:-2] + (2, 2))
    B[..., 0, 0] = H22 * v1 - H12 * v2
    B[..., 0, 1] = H23 * v1 - H13 * v2
    B[..., 1, 0] = -H21 * v1 + H11 * v2
    B[..., 1, 1] = -H22 * v1 + H12 * v2
    return B


def eval_rt_grad(gf, elem, pts):
    """Physical gradient of a Piola-mapped vector: (1/J) F (grad_ref - Bhat) Finv."""
    _check_kind(gf, ("RTp", "brokenRTp"))
    pts = np.atleast_2d(pts)
    loc = gf.space.local_coeffs(gf.data)[elem]
    vhat = np.einsum("qnc,n->qc", gf.space.basis.eval(pts), loc)
    ghat = np.einsum("qncd,n->qcd", gf.space.basis.grad(pts), loc)
    geo = gf.space.mesh.geometry(np.array([elem]), pts)
    F, J, Finv, H = geo.F[0], geo.J[0], geo.Finv[0], geo.H[0]
    v = np.einsum("qcd,qd->qc", F, vhat) / J[:, None]
    B = piola_bmat(H, v)
    return np.einsum("qab,qbc,qcd->qad", F, ghat - B, Finv) / J[:, None, None]


def eval_rt_div(gf, elem, pts):
    """Divergence via the Piola identity: (1/J) div_ref vhat."""
    _check_kind(gf, ("RTp", "brokenRTp"))
    pts = np.atleast_2d(pts)
    loc = gf.space.local_coeffs(gf.data)[elem]
    dhat = gf.space.basis.div(pts) @ loc
    geo = gf.space.mesh.geometry(np.array([elem]), pts)
    return dhat / geo.J[0]


def l2_project(space, f, quad_order=None):
    """Element-wise L2 projection of a callable f(x) onto a DG space."""
    if space.kind != "Yp":
        raise TypeError("l2_project targets Yp spaces")
    rule = volume_rule(quad_order if quad_order is not None else 2 * space.p + 2)
    shp = space.basis.eval(rule.points)
    geo = space.mesh.all_geometry(rule)
    xq = space.mesh.transform(None, rule.points)
    fq = np.asarray(f(xq.reshape(-1, 2))).reshape(space.mesh.n_elems, rule.n)
    wJ = rule.weights * geo.J
    M = np.einsum("bq,qi,qj->bij", wJ, shp, shp)
    b = np.einsum("bq,bq,qi->bi", wJ, fq, shp)
    out = GridFunction(space)
    out.data[:] = np.linalg.solve(M, b[..., None])[..., 0].ravel()
    return out


def save_gridfunction(path, gf):
    variant = "bernstein" if isinstance(gf.space.basis, TensorBasis) and isinstance(
        gf.space.basis.bx, Bernstein1D
    ) else "gl"
    with open(path, "w") as fh:
        fh.write(f"veffield {gf.space.kind} {gf.space.p} {variant} {gf.space.n_dofs}\n")
        for v in gf.data:
            fh.write(f"{v:.17g}\n")


def load_gridfunction(path, mesh):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 5 or head[0] != "veffield":
            raise ValueError(f"{path}: malformed field header")
        kind, p, variant, n = head[1], int(head[2]), head[3], int(head[4])
        data = np.array([float(fh.readline()) for _ in range(n)])
    space = build_dof_map(mesh, kind, p, basis=variant)
    return GridFunction(space, data)
