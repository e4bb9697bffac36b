"""Reference-element polynomial bases: nodal Lagrange, Bernstein, anisotropic RT."""

import numpy as np

from .quadrature import gauss_legendre, gauss_lobatto

__all__ = ["Lagrange1D", "Bernstein1D", "TensorBasis", "RTBasis", "lagrange_gll", "lagrange_gl"]


class Lagrange1D:
    """Nodal Lagrange basis on arbitrary 1D nodes via monomial coefficients."""

    def __init__(self, nodes):
        self.nodes = np.asarray(nodes, dtype=float)
        self.n = len(self.nodes)
        V = np.vander(self.nodes, self.n, increasing=True)
        # column j holds monomial coefficients of the j-th cardinal polynomial
        self.coef = np.linalg.inv(V)

    def _powers(self, x, shift):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P = np.zeros((len(x), self.n))
        for m in range(shift, self.n):
            fac = 1.0
            for s in range(shift):
                fac *= m - s
            P[:, m] = fac * x ** (m - shift)
        return P

    def eval(self, x):
        return self._powers(x, 0) @ self.coef

    def deriv(self, x):
        return self._powers(x, 1) @ self.coef

    def deriv2(self, x):
        return self._powers(x, 2) @ self.coef


class Bernstein1D:
    """Degree-p Bernstein polynomials on [0,1]; nonnegative partition of unity."""

    def __init__(self, p):
        self.p = p
        self.n = p + 1
        from math import comb

        self._binom = np.array([comb(p, i) for i in range(p + 1)], dtype=float)

    def eval(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.p
        i = np.arange(p + 1)
        return self._binom * x[:, None] ** i * (1 - x[:, None]) ** (p - i)

    def deriv(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.p
        out = np.zeros((len(x), p + 1))
        if p == 0:
            return out
        lower = Bernstein1D(p - 1).eval(x)
        for i in range(p + 1):
            lo = lower[:, i - 1] if i >= 1 else 0.0
            hi = lower[:, i] if i <= p - 1 else 0.0
            out[:, i] = p * (lo - hi)
        return out

    def deriv2(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.p
        out = np.zeros((len(x), p + 1))
        if p < 2:
            return out
        lower = Bernstein1D(p - 2).eval(x)
        for i in range(p + 1):
            t = 0.0
            if 0 <= i - 2 <= p - 2:
                t = t + lower[:, i - 2]
            if 0 <= i - 1 <= p - 2:
                t = t - 2 * lower[:, i - 1]
            if 0 <= i <= p - 2:
                t = t + lower[:, i]
            out[:, i] = p * (p - 1) * t
        return out


def lagrange_gll(p):
    return Lagrange1D(gauss_lobatto(p + 1).points) if p >= 1 else Lagrange1D(np.array([0.5]))


def lagrange_gl(p):
    return Lagrange1D(gauss_legendre(p + 1).points)


class TensorBasis:
    """Tensor product of two 1D bases; local index i = iy*nx + ix (xi fastest)."""

    def __init__(self, bx, by):
        self.bx = bx
        self.by = by
        self.nx = bx.n
        self.ny = by.n
        self.n = self.nx * self.ny

    def nodes2d(self):
        """Tensor node coordinates, defined only when both factors are nodal."""
        pts = np.empty((self.n, 2))
        for iy in range(self.ny):
            for ix in range(self.nx):
                pts[iy * self.nx + ix] = (self.bx.nodes[ix], self.by.nodes[iy])
        return pts

    def eval(self, pts):
        pts = np.atleast_2d(pts)
        vx = self.bx.eval(pts[:, 0])
        vy = self.by.eval(pts[:, 1])
        return np.einsum("qj,qi->qji", vy, vx).reshape(len(pts), self.n)

    def grad(self, pts):
        pts = np.atleast_2d(pts)
        vx, dx = self.bx.eval(pts[:, 0]), self.bx.deriv(pts[:, 0])
        vy, dy = self.by.eval(pts[:, 1]), self.by.deriv(pts[:, 1])
        g = np.empty((len(pts), self.n, 2))
        g[:, :, 0] = np.einsum("qj,qi->qji", vy, dx).reshape(len(pts), self.n)
        g[:, :, 1] = np.einsum("qj,qi->qji", dy, vx).reshape(len(pts), self.n)
        return g

    def hess(self, pts):
        """Second derivatives in flattened order [d_xi2, d_xieta, d_eta2]."""
        pts = np.atleast_2d(pts)
        vx, dx, d2x = (
            self.bx.eval(pts[:, 0]),
            self.bx.deriv(pts[:, 0]),
            self.bx.deriv2(pts[:, 0]),
        )
        vy, dy, d2y = (
            self.by.eval(pts[:, 1]),
            self.by.deriv(pts[:, 1]),
            self.by.deriv2(pts[:, 1]),
        )
        h = np.empty((len(pts), self.n, 3))
        h[:, :, 0] = np.einsum("qj,qi->qji", vy, d2x).reshape(len(pts), self.n)
        h[:, :, 1] = np.einsum("qj,qi->qji", dy, dx).reshape(len(pts), self.n)
        h[:, :, 2] = np.einsum("qj,qi->qji", d2y, vx).reshape(len(pts), self.n)
        return h


class RTBasis:
    """Nodal basis for Q_{p+1,p} x Q_{p,p+1}: Gauss-Lobatto nodes in the normal
    direction, Gauss-Legendre in the tangential direction, x-component block
    first."""

    def __init__(self, p):
        self.p = p
        gll = Lagrange1D(gauss_lobatto(p + 2).points)
        gl = Lagrange1D(gauss_legendre(p + 1).points)
        self.tx = TensorBasis(gll, gl)
        self.ty = TensorBasis(gl, gll)
        self.nx = self.tx.n
        self.n = self.tx.n + self.ty.n

    def eval(self, pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), self.n, 2))
        out[:, : self.nx, 0] = self.tx.eval(pts)
        out[:, self.nx :, 1] = self.ty.eval(pts)
        return out

    def grad(self, pts):
        """Reference gradients d v_i / d xi_j with shape (nq, ndof, 2, 2)."""
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), self.n, 2, 2))
        out[:, : self.nx, 0, :] = self.tx.grad(pts)
        out[:, self.nx :, 1, :] = self.ty.grad(pts)
        return out

    def div(self, pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), self.n))
        out[:, : self.nx] = self.tx.grad(pts)[:, :, 0]
        out[:, self.nx :] = self.ty.grad(pts)[:, :, 1]
        return out
