import numpy as np

from vef2d.mesh import build_cartesian_mesh, apply_taylor_green_distortion, mesh_h
from vef2d.spaces import build_dof_map, GridFunction, l2_project
from vef2d.quadrature import level_symmetric
from vef2d.tables import QuadLayout
from vef2d.closure import compute_vef_data, diffusion_vef_data
from vef2d.assembly import assemble_vef_system, solve_mixed, SolverConfig
from vef2d.mms import MmsSpec


class AFS:
    def __init__(self, space, quad, coeffs):
        self.space, self.quad, self.coeffs = space, quad, coeffs


def project_psi(space, mms, quad):
    ne, nd = space.mesh.n_elems, space.ndof_local
    coeffs = np.empty((quad.n_dir, ne, nd))
    for d, om in enumerate(quad.omega):
        gf = l2_project(space, lambda x: mms.psi(x, om), quad_order=2 * space.p + 4)
        coeffs[d] = gf.data.reshape(ne, nd)
    return AFS(space, quad, coeffs)


def run_one(n, p, kind, mms, quad):
    mesh = apply_taylor_green_distortion(build_cartesian_mesh(n, n, order=3), 0.3 * np.pi, 300)
    Y = build_dof_map(mesh, "Yp", p, basis="gl")
    V = build_dof_map(mesh, {"h1": "Wp", "rt": "RTp"}[kind], p + 1 if kind == "h1" else p)
    layout = QuadLayout(mesh, p)
    afs = project_psi(Y, mms, quad)
    vef = compute_vef_data(afs, layout)
    print("  E err vs 1/3:", np.abs(vef.E_vol - np.eye(2) / 3).max(), "Eb:", vef.Eb_bdr.mean())

    def Q0(x):
        return sum(w * mms.source(x, om) for w, om in zip(quad.weights, quad.omega))

    def Q1(x):
        out = np.zeros(x.shape[:-1] + (2,))
        for w, om in zip(quad.weights, quad.omega):
            out += w * om[None, :2] * mms.source(x, om)[..., None]
        return out

    def Jin(x, nrm):
        out = np.zeros(x.shape[:-1])
        for w, om in zip(quad.weights, quad.omega):
            mu = nrm @ om[:2] if nrm.ndim == 1 else np.einsum("fqc,c->fq", nrm, om[:2])
            out += np.where(mu < 0, w * mu * mms.psi(x, om), 0.0)
        return out

    sys = assemble_vef_system(Y, V, mms.sigma_t, mms.sigma_t - mms.sigma_s, Q0, Q1, Jin, vef, layout)
    # invariant: diffusion mode RT -> G = -(1/3) D^T
    if kind == "rt":
        gap = abs(sys.G + sys.D.T / 3).max()
        print("  |G + D^T/3| =", gap)
    phi, J, stats = solve_mixed(sys, SolverConfig(method="direct"))
    # errors by quadrature
    vol = layout.vol
    shp = Y.basis.eval(vol.points)
    phi_h = np.einsum("en,qn->eq", phi.data.reshape(mesh.n_elems, -1), shp)
    phi_ex = mms.phi(vol.x)
    err_phi = np.sqrt(np.einsum("eq,eq->", vol.w * vol.J, (phi_h - phi_ex) ** 2))
    # projected error
    piphi = l2_project(Y, mms.phi, quad_order=2 * p + 4)
    pi_q = np.einsum("en,qn->eq", piphi.data.reshape(mesh.n_elems, -1), shp)
    err_pi = np.sqrt(np.einsum("eq,eq->", vol.w * vol.J, (phi_h - pi_q) ** 2))
    # current error
    if kind == "rt":
        vhat = V.basis.eval(vol.points)
        loc = V.local_coeffs(J.data)
        Jh = np.einsum("eqcd,qnd,en->eqc", vol.F, vhat, loc) / vol.J[..., None]
    else:
        ns = V.basis.n
        shpv = V.basis.eval(vol.points)
        loc = V.local_coeffs(J.data)
        Jh = np.stack([np.einsum("qn,en->eq", shpv, loc[:, :ns]), np.einsum("qn,en->eq", shpv, loc[:, ns:])], axis=-1)
    err_J = np.sqrt(np.einsum("eq,eqc->", vol.w * vol.J, (Jh - mms.current(vol.x)) ** 2))
    return mesh_h(mesh), err_phi, err_pi, err_J


def fit(hs, es):
    A = np.vstack([np.log(hs), np.ones(len(hs))]).T
    o, c = np.linalg.lstsq(A, np.log(es), rcond=None)[0]
    return o


mms = MmsSpec(diffusion=True)
quad = level_symmetric(4)
p = 1
for kind in ("rt", "h1"):
    hs, e1, e2, e3 = [], [], [], []
    for n in (4, 8, 12):
        h, a, b, c = run_one(n, p, kind, mms, quad)
        hs.append(h); e1.append(a); e2.append(b); e3.append(c)
        print(f"{kind} n={n} h={h:.4f} phi={a:.3e} pi={b:.3e} J={c:.3e}")
    print(kind, "orders:", fit(hs, e1), fit(hs, e2), fit(hs, e3))
