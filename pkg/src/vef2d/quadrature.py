"""Spatial quadrature on the reference element and discrete-ordinates angular sets."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import fsolve

__all__ = [
    "QuadRule",
    "gauss_legendre",
    "gauss_lobatto",
    "tensor_rule",
    "AngularQuadrature",
    "level_symmetric",
]


@dataclass(frozen=True)
class QuadRule:
    """Quadrature points and weights on [0,1] (1D) or [0,1]^2 (2D)."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return len(self.weights)


def gauss_legendre(n):
    """Gauss-Legendre rule on [0,1], exact for polynomials of degree <= 2n-1."""
    if n < 1:
        raise ValueError("gauss_legendre requires n >= 1")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule((x + 1) / 2, w / 2)


def gauss_lobatto(n):
    """Gauss-Lobatto rule on [0,1] including both endpoints, exact degree <= 2n-3."""
    if n < 2:
        raise ValueError("gauss_lobatto requires n >= 2")
    if n == 2:
        return QuadRule(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    # interior nodes are roots of P'_{n-1} on [-1,1]
    cp = np.zeros(n)
    cp[n - 1] = 1.0
    dcp = np.polynomial.legendre.legder(cp)
    interior = np.polynomial.legendre.legroots(dcp)
    # Newton polish on P'_{n-1}
    d2cp = np.polynomial.legendre.legder(dcp)
    for _ in range(3):
        interior = interior - np.polynomial.legendre.legval(
            interior, dcp
        ) / np.polynomial.legendre.legval(interior, d2cp)
    x = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    Pn1 = np.polynomial.legendre.legval(x, cp)
    w = 2.0 / (n * (n - 1) * Pn1**2)
    return QuadRule((x + 1) / 2, w / 2)


def tensor_rule(r1, r2):
    """Tensor product of two 1D rules; first rule varies fastest."""
    n1, n2 = r1.n, r2.n
    pts = np.empty((n1 * n2, 2))
    wts = np.empty(n1 * n2)
    for iy in range(n2):
        for ix in range(n1):
            i = iy * n1 + ix
            pts[i] = (r1.points[ix], r2.points[iy])
            wts[i] = r1.weights[ix] * r2.weights[iy]
    return QuadRule(pts, wts)


def volume_rule(order):
    """2D Gauss rule integrating total degree <= order on [0,1]^2."""
    n = order // 2 + 1
    g = gauss_legendre(n)
    return tensor_rule(g, g)


@dataclass(frozen=True)
class AngularQuadrature:
    """Discrete ordinates: unit directions (Nd,3) and weights summing to 4*pi."""

    omega: np.ndarray
    weights: np.ndarray
    N: int

    @property
    def n_dir(self):
        return len(self.weights)


# First direction cosine of the standard level-symmetric (LQn) sets. These seed
# a Newton solve that pins the even-moment conditions to machine precision.
_LS_MU1 = {2: 0.5773503, 4: 0.3500212, 6: 0.2666355, 8: 0.2182179, 12: 0.1672126}


def _ls_octant(N, mu1):
    """Octant triples (i,j,k), their cosines, and the weight-class of each."""
    n = N // 2
    if N == 2:
        mus = np.array([np.sqrt(1.0 / 3.0)])
    else:
        delta = 2.0 * (1.0 - 3.0 * mu1**2) / (N - 2)
        mus = np.sqrt(mu1**2 + np.arange(n) * delta)
    triples = []
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            k = n + 2 - i - j
            if 1 <= k <= n:
                triples.append((i, j, k))
    classes = sorted({tuple(sorted(t)) for t in triples})
    class_of = np.array([classes.index(tuple(sorted(t))) for t in triples])
    return triples, mus, class_of, len(classes)


def level_symmetric(N):
    """Level-symmetric S_N angular quadrature over all eight octants.

    Cosines follow the equal-spacing rule mu_i^2 = mu_1^2 + 2(i-1)(1-3 mu_1^2)/(N-2).
    mu_1 and the per-class point weights are solved from the even-moment
    conditions (normalization plus exact mu^4, mu^6, ... moments), seeded by the
    standard published mu_1 values.
    """
    if N not in _LS_MU1:
        raise ValueError(f"unsupported level-symmetric order N={N}")

    if N == 2:
        mu = np.sqrt(1.0 / 3.0)
        octant_dirs = np.array([[mu, mu, mu]])
        octant_w = np.array([1.0])
    else:
        triples0, _, class_of, n_class = _ls_octant(N, _LS_MU1[N])

        def moments(params):
            mu1 = params[0]
            wc = params[1:]
            _, mus, _, _ = _ls_octant(N, mu1)
            mux = np.array([mus[t[0] - 1] for t in triples0])
            w = wc[class_of]
            res = [np.sum(w) - 1.0]
            for m in range(2, n_class + 2):
                res.append(np.sum(w * mux ** (2 * m)) - 1.0 / (2 * m + 1))
            return res

        x0 = np.full(1 + n_class, 1.0 / len(triples0))
        x0[0] = _LS_MU1[N]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = fsolve(moments, x0, full_output=False, xtol=1e-14)
        mu1 = sol[0]
        if max(abs(r) for r in moments(sol)) > 1e-10:
            raise RuntimeError(f"level-symmetric moment solve failed for N={N}")
        triples, mus, class_of, _ = _ls_octant(N, mu1)
        octant_dirs = np.array([[mus[i - 1], mus[j - 1], mus[k - 1]] for i, j, k in triples])
        octant_w = sol[1:][class_of]
        if np.any(octant_w <= 0):
            raise RuntimeError(f"level-symmetric weights not positive for N={N}")

    dirs = []
    wts = []
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                for d, w in zip(octant_dirs, octant_w):
                    dirs.append([sx * d[0], sy * d[1], sz * d[2]])
                    wts.append(w)
    omega = np.array(dirs)
    w = np.array(wts) * (4 * np.pi / 8.0)
    return AngularQuadrature(omega, w, N)
