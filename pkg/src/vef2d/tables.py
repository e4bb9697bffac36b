"""Precomputed geometry tables at quadrature points for volumes and faces."""

import numpy as np

from .mesh import _SIDE_DIR, _SIDE_ROT, GeometryError, side_ref_points
from .quadrature import gauss_legendre, volume_rule

__all__ = ["VolumeTables", "FaceTables", "QuadLayout"]


class VolumeTables:
    """Geometry of every element at the points of a 2D reference rule."""

    def __init__(self, mesh, rule):
        self.rule = rule
        self.points = rule.points
        self.w = rule.weights
        geo = mesh.geometry(None, rule.points)
        self.F, self.J, self.Finv, self.H = geo.F, geo.J, geo.Finv, geo.H
        self.x = mesh.transform(None, rule.points)
        self.n_q = rule.n


class FaceTables:
    """Per-face trace geometry at the points of a 1D rule.

    Arrays are indexed (face, quad point). Normals point from elem1 to elem2
    (interior) or outward (boundary); `wq` already includes the arc-length
    metric, so sums against wq integrate over the physical face.
    """

    def __init__(self, mesh, faces, rule):
        self.rule = rule
        self.faces = faces
        self.n_q = rule.n
        nf = len(faces)
        self.elem1 = np.array([f.elem1 for f in faces], dtype=int)
        self.side1 = np.array([f.side1 for f in faces], dtype=int)
        self.interior = bool(faces) and faces[0].kind == "interior"
        s = rule.points
        self.ref1 = np.empty((nf, rule.n, 2))
        self.x = np.empty((nf, rule.n, 2))
        self.n = np.empty((nf, rule.n, 2))
        self.warc = np.empty((nf, rule.n))
        self.geo1 = {}
        self._fill_side(mesh, self.elem1, self.side1, np.zeros(nf, dtype=bool), s, self.ref1, self.geo1, primary=True)
        if self.interior:
            self.elem2 = np.array([f.elem2 for f in faces], dtype=int)
            self.side2 = np.array([f.side2 for f in faces], dtype=int)
            self.flip = np.array([f.flip for f in faces], dtype=bool)
            self.ref2 = np.empty((nf, rule.n, 2))
            self.geo2 = {}
            self._fill_side(mesh, self.elem2, self.side2, self.flip, s, self.ref2, self.geo2, primary=False)
        self.wq = self.warc * rule.weights[None, :]

    def _fill_side(self, mesh, elems, sides, flips, s, ref_out, geo_out, primary):
        nf = len(elems)
        nq = len(s)
        F = np.empty((nf, nq, 2, 2))
        J = np.empty((nf, nq))
        Finv = np.empty((nf, nq, 2, 2))
        H = np.empty((nf, nq, 2, 3))
        for side in range(4):
            for flip in (False, True):
                mask = (sides == side) & (flips == flip)
                if not mask.any():
                    continue
                sp = 1.0 - s if flip else s
                pts = side_ref_points(side, sp)
                ref_out[mask] = pts
                geo = mesh.geometry(elems[mask], pts)
                F[mask], J[mask], Finv[mask], H[mask] = geo.F, geo.J, geo.Finv, geo.H
                if primary:
                    t = np.einsum("fqcd,d->fqc", geo.F, _SIDE_DIR[side])
                    w = np.linalg.norm(t, axis=2)
                    if np.any(w <= 0):
                        raise GeometryError("degenerate face tangent")
                    that = t / w[..., None]
                    rot = _SIDE_ROT[side]
                    self.n[mask, :, 0] = rot * that[..., 1]
                    self.n[mask, :, 1] = -rot * that[..., 0]
                    self.warc[mask] = w
                    self.x[mask] = mesh.transform(elems[mask], pts)
        geo_out["F"], geo_out["J"], geo_out["Finv"], geo_out["H"] = F, J, Finv, H


class QuadLayout:
    """Volume and face quadrature used consistently for VEF data and assembly.

    Terms containing VEF data are rational, so the order is raised to 2p+4
    rather than the 2p+2 mass-term default.
    """

    def __init__(self, mesh, p, order=None):
        self.mesh = mesh
        self.p = p
        self.order = order if order is not None else 2 * p + 4
        self.vol = VolumeTables(mesh, volume_rule(self.order))
        face_rule = gauss_legendre(self.order // 2 + 1)
        self.fi = FaceTables(mesh, mesh.interior_faces, face_rule)
        self.fb = FaceTables(mesh, mesh.boundary_faces, face_rule)
