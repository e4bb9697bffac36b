"""Eddington tensor and boundary factor tables evaluated at assembly quadrature."""

from dataclasses import dataclass

import numpy as np

from .mesh import side_ref_points

__all__ = ["VefData", "ClosureError", "compute_vef_data", "diffusion_vef_data", "vef_data_from_functions"]


class ClosureError(Exception):
    pass


@dataclass
class VefData:
    """Pointwise closure data on a QuadLayout.

    E_vol: (Ne, nq, 2, 2) Eddington tensor at volume points.
    Eavg_n: (Nfi, nqf, 2) single-valued average <E n> on interior faces.
    En_bdr: (Nfb, nqf, 2) E n on boundary faces.
    Eb_bdr: (Nfb, nqf) boundary factor.
    """

    layout: object
    E_vol: np.ndarray
    Eavg_n: np.ndarray
    En_bdr: np.ndarray
    Eb_bdr: np.ndarray


def _trace_matrices(basis, rule):
    """Reference trace values per side, and flipped variants: T[side][flip]."""
    out = []
    for side in range(4):
        row = []
        for flip in (False, True):
            s = 1.0 - rule.points if flip else rule.points
            row.append(basis.eval(side_ref_points(side, s)))
        out.append(row)
    return out


def _ratio_tensor(quad, psi, where):
    """E = sum_d w Omega Omega psi_d / sum_d w psi_d over the leading axis."""
    w = quad.weights
    den = np.einsum("d,d...->...", w, psi)
    if np.any(den <= 0.0):
        idx = np.argwhere(den <= 0.0)[0]
        raise ClosureError(f"nonpositive angular-flux sum at {where} {tuple(idx)}")
    o = quad.omega[:, :2]
    num = np.einsum("d,di,dj,d...->...ij", w, o, o, psi)
    return num / den[..., None, None], den


def compute_vef_data(afs, layout):
    """Closure tables from a discrete angular flux set at the layout's points.

    Interior-face values are the average of the two one-sided traces; the
    boundary factor uses the same angular quadrature as the flux moments.
    """
    quad = afs.quad
    basis = afs.space.basis
    coeffs = afs.coeffs  # (Nd, Ne, ndl)

    shp = basis.eval(layout.vol.points)
    psi_vol = np.einsum("den,qn->deq", coeffs, shp)
    E_vol, _ = _ratio_tensor(quad, psi_vol, "element point")

    fi, fb = layout.fi, layout.fb
    T = _trace_matrices(basis, fi.rule)
    Eavg_n = np.zeros((len(fi.faces), fi.n_q, 2))
    if len(fi.faces):
        psi1 = np.empty((quad.n_dir, len(fi.faces), fi.n_q))
        psi2 = np.empty_like(psi1)
        for side in range(4):
            m1 = fi.side1 == side
            if m1.any():
                psi1[:, m1] = np.einsum("dfn,qn->dfq", coeffs[:, fi.elem1[m1]], T[side][0])
            for flip in (False, True):
                m2 = (fi.side2 == side) & (fi.flip == flip)
                if m2.any():
                    psi2[:, m2] = np.einsum(
                        "dfn,qn->dfq", coeffs[:, fi.elem2[m2]], T[side][int(flip)]
                    )
        E1, _ = _ratio_tensor(quad, psi1, "interior face point")
        E2, _ = _ratio_tensor(quad, psi2, "interior face point")
        Eavg = 0.5 * (E1 + E2)
        Eavg_n = np.einsum("fqij,fqj->fqi", Eavg, fi.n)

    En_bdr = np.zeros((len(fb.faces), fb.n_q, 2))
    Eb_bdr = np.zeros((len(fb.faces), fb.n_q))
    if len(fb.faces):
        Tb = _trace_matrices(basis, fb.rule)
        psib = np.empty((quad.n_dir, len(fb.faces), fb.n_q))
        for side in range(4):
            m = fb.side1 == side
            if m.any():
                psib[:, m] = np.einsum("dfn,qn->dfq", coeffs[:, fb.elem1[m]], Tb[side][0])
        Eb_full, den = _ratio_tensor(quad, psib, "boundary face point")
        En_bdr = np.einsum("fqij,fqj->fqi", Eb_full, fb.n)
        mu = np.abs(np.einsum("dc,fqc->dfq", quad.omega[:, :2], fb.n))
        Eb_bdr = np.einsum("d,dfq,dfq->fq", quad.weights, mu, psib) / den
    return VefData(layout, E_vol, Eavg_n, En_bdr, Eb_bdr)


def diffusion_vef_data(layout):
    """Asymptotic closure: E = I/3 everywhere, E_b = 1/2."""
    ne, nq = layout.vol.J.shape
    E_vol = np.tile(np.eye(2) / 3.0, (ne, nq, 1, 1))
    Eavg_n = layout.fi.n / 3.0 if len(layout.fi.faces) else np.zeros((0, layout.fi.n_q, 2))
    En_bdr = layout.fb.n / 3.0
    Eb_bdr = np.full((len(layout.fb.faces), layout.fb.n_q), 0.5)
    return VefData(layout, E_vol, Eavg_n, En_bdr, Eb_bdr)


def vef_data_from_functions(layout, E_fn, Eb_fn):
    """Closure tables from analytic E(x) -> (...,2,2) and Eb(x, n) -> (...)."""
    E_vol = E_fn(layout.vol.x)
    Eavg_n = (
        np.einsum("fqij,fqj->fqi", E_fn(layout.fi.x), layout.fi.n)
        if len(layout.fi.faces)
        else np.zeros((0, layout.fi.n_q, 2))
    )
    En_bdr = np.einsum("fqij,fqj->fqi", E_fn(layout.fb.x), layout.fb.n)
    Eb_bdr = Eb_fn(layout.fb.x, layout.fb.n)
    return VefData(layout, E_vol, Eavg_n, En_bdr, Eb_bdr)
