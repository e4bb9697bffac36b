"""High-order quadrilateral meshes: transforms, face topology, generators, I/O."""

from dataclasses import dataclass, field

import numpy as np

from .basis import Lagrange1D, TensorBasis
from .quadrature import gauss_lobatto, volume_rule

__all__ = [
    "Mesh",
    "Face",
    "ElementGeometry",
    "MeshError",
    "TanglingError",
    "GeometryError",
    "MeshParseError",
    "build_cartesian_mesh",
    "apply_taylor_green_distortion",
    "apply_sine_distortion",
    "eval_geometry",
    "face_geometry",
    "write_mesh",
    "read_mesh",
    "mesh_h",
]


class MeshError(Exception):
    pass


class TanglingError(MeshError):
    pass


class GeometryError(MeshError):
    pass


class MeshParseError(MeshError):
    pass


# Local edges of the reference square, parameterized by s in [0,1]:
#   side 0: (s,0)   side 1: (1,s)   side 2: (s,1)   side 3: (0,s)
_SIDE_ORIGIN = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
_SIDE_DIR = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
# physical outward normal = rotate tangent by -90 (sides 0,1) or +90 (sides 2,3)
_SIDE_ROT = np.array([1.0, 1.0, -1.0, -1.0])


def side_ref_points(side, s):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return _SIDE_ORIGIN[side] + np.outer(s, _SIDE_DIR[side])


def edge_local_nodes(m, side):
    """Local node indices along a side of an order-m element, in s order."""
    k = np.arange(m + 1)
    if side == 0:
        return k
    if side == 1:
        return k * (m + 1) + m
    if side == 2:
        return m * (m + 1) + k
    if side == 3:
        return k * (m + 1)
    raise ValueError(f"bad side {side}")


@dataclass
class Face:
    kind: str  # 'interior' or 'boundary'
    elem1: int
    side1: int
    elem2: int = -1
    side2: int = -1
    flip: bool = False  # elem2's edge parameter runs opposite the face parameter
    tag: int = 0
    index: int = -1


@dataclass
class ElementGeometry:
    """Transform data at a set of reference points: Jacobian F, det J, inverse,
    and the flattened Hessian rows [d2/dxi2, d2/dxideta, d2/deta2] for x and y."""

    F: np.ndarray
    J: np.ndarray
    Finv: np.ndarray
    H: np.ndarray


class Mesh:
    """Immutable order-m quadrilateral mesh over shared control points."""

    def __init__(self, order, points, elem_nodes, boundary_tags=None):
        self.order = int(order)
        self.points = np.asarray(points, dtype=float)
        self.elem_nodes = np.asarray(elem_nodes, dtype=int)
        if self.elem_nodes.shape[1] != (self.order + 1) ** 2:
            raise MeshError("element connectivity does not match mesh order")
        gll = gauss_lobatto(self.order + 1).points if self.order >= 1 else np.array([0.0, 1.0])
        self.geom_basis = TensorBasis(Lagrange1D(gll), Lagrange1D(gll))
        self.faces = []
        self.interior_faces = []
        self.boundary_faces = []
        self._build_topology(boundary_tags or {})
        self._geom_cache = {}

    @property
    def n_elems(self):
        return len(self.elem_nodes)

    @property
    def n_points(self):
        return len(self.points)

    def _build_topology(self, boundary_tags):
        m = self.order
        edges = {}
        for e in range(self.n_elems):
            for side in range(4):
                nodes = tuple(self.elem_nodes[e][edge_local_nodes(m, side)])
                key = nodes if nodes[0] < nodes[-1] else tuple(reversed(nodes))
                edges.setdefault(key, []).append((e, side, nodes))
        for key in sorted(edges, key=lambda k: min(x[0] for x in edges[k])):
            owners = sorted(edges[key])
            if len(owners) == 1:
                e, side, _ = owners[0]
                f = Face("boundary", e, side, tag=boundary_tags.get((e, side), 1))
            elif len(owners) == 2:
                (e1, s1, n1), (e2, s2, n2) = owners
                f = Face("interior", e1, s1, e2, s2, flip=(n2 != n1))
                if f.flip and n2 != tuple(reversed(n1)):
                    raise MeshError(f"edge nodes mismatch between elements {e1} and {e2}")
            else:
                raise MeshError(f"edge shared by more than two elements: {key}")
            f.index = len(self.faces)
            self.faces.append(f)
            (self.interior_faces if f.kind == "interior" else self.boundary_faces).append(f)

    def elem_coords(self, elems=None):
        if elems is None:
            return self.points[self.elem_nodes]
        return self.points[self.elem_nodes[np.atleast_1d(elems)]]

    def transform(self, elems, pts):
        """Physical coordinates of reference points pts (nq,2) on each element."""
        shp = self.geom_basis.eval(pts)
        return np.einsum("bnc,qn->bqc", self.elem_coords(elems), shp)

    def geometry(self, elems, pts):
        """Batched ElementGeometry at shared reference points (nq,2)."""
        coords = self.elem_coords(elems)
        g = self.geom_basis.grad(pts)
        h = self.geom_basis.hess(pts)
        F = np.einsum("bnc,qnd->bqcd", coords, g)
        J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        if np.any(J <= 0):
            bad = np.argwhere(J <= 0)
            e = np.atleast_1d(elems)[bad[0, 0]] if elems is not None else bad[0, 0]
            raise GeometryError(f"non-positive Jacobian in element {e}")
        Finv = np.empty_like(F)
        Finv[..., 0, 0] = F[..., 1, 1] / J
        Finv[..., 0, 1] = -F[..., 0, 1] / J
        Finv[..., 1, 0] = -F[..., 1, 0] / J
        Finv[..., 1, 1] = F[..., 0, 0] / J
        H = np.einsum("bnc,qnk->bqck", coords, h)
        return ElementGeometry(F, J, Finv, H)

    def all_geometry(self, rule):
        """Geometry of every element at the points of a 2D rule, cached by rule id."""
        key = (id(rule), len(rule.weights))
        if key not in self._geom_cache:
            self._geom_cache[key] = self.geometry(None, rule.points)
        return self._geom_cache[key]


def eval_geometry(mesh, elem, ref_pt):
    """ElementGeometry of one element at a single reference point."""
    g = mesh.geometry(np.array([elem]), np.atleast_2d(ref_pt))
    return ElementGeometry(g.F[0, 0], g.J[0, 0], g.Finv[0, 0], g.H[0, 0])


def face_geometry(mesh, face, s):
    """Physical point, unit normal, tangent, and arc-length weight at face
    parameters s. The normal points from elem1 to elem2 on interior faces and
    outward on boundary faces; the tangent is its 90-degree CCW rotation."""
    f = mesh.faces[face] if isinstance(face, int) else face
    pts = side_ref_points(f.side1, s)
    g = mesh.geometry(np.array([f.elem1]), pts)
    t = np.einsum("qcd,d->qc", g.F[0], _SIDE_DIR[f.side1])
    w = np.linalg.norm(t, axis=1)
    if np.any(w <= 0):
        raise GeometryError(f"degenerate tangent on face {f.index}")
    that = t / w[:, None]
    rot = _SIDE_ROT[f.side1]
    n = np.stack([rot * that[:, 1], -rot * that[:, 0]], axis=1)
    tau = np.stack([-n[:, 1], n[:, 0]], axis=1)
    x = mesh.transform(np.array([f.elem1]), pts)[0]
    return x, n, tau, w


def check_tangling(mesh):
    """Raise TanglingError if det F <= 0 anywhere at the 2m+2 tangling rule."""
    rule = volume_rule(2 * mesh.order + 2)
    coords = mesh.elem_coords()
    g = mesh.geom_basis.grad(rule.points)
    F = np.einsum("bnc,qnd->bqcd", coords, g)
    J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    if np.any(J <= 0):
        bad = int(np.argwhere(J <= 0)[0, 0])
        raise TanglingError(f"mesh tangled: det F <= 0 in element {bad}")


def build_cartesian_mesh(nx, ny, domain=(0.0, 1.0, 0.0, 1.0), order=1):
    """Orthogonal tensor mesh with control points at Gauss-Lobatto positions.

    Boundary tags: 1 bottom, 2 right, 3 top, 4 left.
    """
    if nx < 1 or ny < 1 or order < 1:
        raise ValueError("nx, ny and order must be positive")
    x0, x1, y0, y1 = domain
    if x1 <= x0 or y1 <= y0:
        raise ValueError("domain must have positive extent")
    m = order
    gll = gauss_lobatto(m + 1).points
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny

    def axis(n0, h, n):
        c = np.empty(n * m + 1)
        for cell in range(n):
            c[cell * m : (cell + 1) * m] = n0 + (cell + gll[:m]) * h
        c[n * m] = n0 + n * h
        return c

    gx, gy = axis(x0, hx, nx), axis(y0, hy, ny)
    npx = nx * m + 1
    pts = np.empty((npx * (ny * m + 1), 2))
    for iy in range(ny * m + 1):
        for ix in range(npx):
            pts[iy * npx + ix] = (gx[ix], gy[iy])
    elems = np.empty((nx * ny, (m + 1) ** 2), dtype=int)
    for cy in range(ny):
        for cx in range(nx):
            e = cy * nx + cx
            for ky in range(m + 1):
                for kx in range(m + 1):
                    elems[e, ky * (m + 1) + kx] = (cy * m + ky) * npx + (cx * m + kx)
    tags = {}
    for cx in range(nx):
        tags[(cx, 0)] = 1
        tags[((ny - 1) * nx + cx, 2)] = 3
    for cy in range(ny):
        tags[(cy * nx + nx - 1, 1)] = 2
        tags[(cy * nx, 3)] = 4
    return Mesh(m, pts, elems, tags)


def _boundary_tag_map(mesh):
    return {(f.elem1, f.side1): f.tag for f in mesh.boundary_faces}


def apply_taylor_green_distortion(mesh, t_final, n_steps):
    """Advect all control points by forward Euler under the Taylor-Green field
    v = (sin x cos y, -cos x sin y)."""
    pts = mesh.points.copy()
    if n_steps > 0 and t_final != 0.0:
        dt = t_final / n_steps
        for _ in range(n_steps):
            vx = np.sin(pts[:, 0]) * np.cos(pts[:, 1])
            vy = -np.cos(pts[:, 0]) * np.sin(pts[:, 1])
            pts[:, 0] += dt * vx
            pts[:, 1] += dt * vy
    out = Mesh(mesh.order, pts, mesh.elem_nodes, _boundary_tag_map(mesh))
    check_tangling(out)
    return out


def boundary_point_ids(mesh):
    ids = set()
    for f in mesh.boundary_faces:
        ids.update(mesh.elem_nodes[f.elem1][edge_local_nodes(mesh.order, f.side1)])
    return np.array(sorted(ids), dtype=int)


def apply_sine_distortion(mesh, alpha):
    """Move interior control points by alpha*(sin 2pi x sin 2pi y) in x and y."""
    pts = mesh.points.copy()
    mask = np.ones(len(pts), dtype=bool)
    mask[boundary_point_ids(mesh)] = False
    s = alpha * np.sin(2 * np.pi * pts[mask, 0]) * np.sin(2 * np.pi * pts[mask, 1])
    pts[mask, 0] += s
    pts[mask, 1] += s
    out = Mesh(mesh.order, pts, mesh.elem_nodes, _boundary_tag_map(mesh))
    check_tangling(out)
    return out


def mesh_h(mesh):
    """Characteristic size: max over elements of the max pairwise control-point
    distance."""
    coords = mesh.elem_coords()
    d = coords[:, :, None, :] - coords[:, None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def write_mesh(path, mesh):
    with open(path, "w") as fh:
        fh.write(
            f"vefmesh 1 {mesh.order} {mesh.n_points} {mesh.n_elems} "
            f"{len(mesh.boundary_faces)}\n"
        )
        for x, y in mesh.points:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for row in mesh.elem_nodes:
            fh.write(" ".join(str(i) for i in row) + "\n")
        for f in mesh.boundary_faces:
            fh.write(f"{f.elem1} {f.side1} {f.tag}\n")


def read_mesh(path):
    with open(path) as fh:
        lines = fh.read().splitlines()

    def err(lineno, msg):
        raise MeshParseError(f"{path}:{lineno + 1}: {msg}")

    if not lines:
        err(0, "empty mesh file")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "vefmesh" or head[1] != "1":
        err(0, "malformed header, expected 'vefmesh 1 <order> <np> <ne> <nb>'")
    try:
        order, n_pts, n_el, n_bdr = (int(v) for v in head[2:])
    except ValueError:
        err(0, "non-integer counts in header")
    if len(lines) < 1 + n_pts + n_el + n_bdr:
        err(len(lines) - 1, "file shorter than header counts")
    pts = np.empty((n_pts, 2))
    for i in range(n_pts):
        parts = lines[1 + i].split()
        if len(parts) != 2:
            err(1 + i, "expected 'x y'")
        pts[i] = (float(parts[0]), float(parts[1]))
    nn = (order + 1) ** 2
    elems = np.empty((n_el, nn), dtype=int)
    for i in range(n_el):
        parts = lines[1 + n_pts + i].split()
        if len(parts) != nn:
            err(1 + n_pts + i, f"expected {nn} node ids")
        row = [int(v) for v in parts]
        for v in row:
            if not 0 <= v < n_pts:
                err(1 + n_pts + i, f"element references missing node id {v}")
        elems[i] = row
    if len(np.setdiff1d(np.arange(n_pts), elems.ravel())) > 0:
        orphan = int(np.setdiff1d(np.arange(n_pts), elems.ravel())[0])
        err(0, f"control point {orphan} not referenced by any element")
    tags = {}
    for i in range(n_bdr):
        parts = lines[1 + n_pts + n_el + i].split()
        if len(parts) != 3:
            err(1 + n_pts + n_el + i, "expected 'elem local_edge tag'")
        e, side, tag = (int(v) for v in parts)
        tags[(e, side)] = tag
    return Mesh(order, pts, elems, tags)
