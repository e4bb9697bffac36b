"""Manufactured transport solution with linear and quadratic angular anisotropy.

The angular flux is psi = (alpha + Omega.beta + OmegaOmega:Theta)/4pi with
smooth sine-product coefficient fields on [0,1]^2. Setting Theta = 0 gives a
linearly anisotropic field whose closure data reduce to the diffusion values.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["MmsSpec"]


def _sin2(a, xs, ys, shift):
    """f = sin(a(x+shift)) sin(a(y+shift)) and its first derivatives."""
    sx, cx = np.sin(a * (xs + shift)), np.cos(a * (xs + shift))
    sy, cy = np.sin(a * (ys + shift)), np.cos(a * (ys + shift))
    return sx * sy, a * cx * sy, a * sx * cy


@dataclass
class MmsSpec:
    sigma_t: float = 1.0
    sigma_s: float = 0.5
    diffusion: bool = False  # Theta = 0, linearly anisotropic
    delta: float = 1.25
    zeta: float = 0.1
    omega: float = 0.05

    def _alpha(self, x):
        xs, ys = x[..., 0], x[..., 1]
        f, fx, fy = _sin2(np.pi, xs, ys, 0.0)
        return f + self.delta, fx, fy

    def _b(self, x):
        xs, ys = x[..., 0], x[..., 1]
        return _sin2(2 * np.pi / (1 + 2 * self.omega), xs, ys, self.omega)

    def _t(self, x):
        if self.diffusion:
            z = np.zeros(x.shape[:-1])
            return z, z, z
        xs, ys = x[..., 0], x[..., 1]
        return _sin2(3 * np.pi / (1 + 2 * self.zeta), xs, ys, self.zeta)

    def theta(self, x):
        """Quadratic anisotropy tensor Theta(x), shape (...,2,2)."""
        t, _, _ = self._t(x)
        b, _, _ = self._b(x)
        out = np.empty(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 0.5 * t
        out[..., 1, 1] = 0.25 * t
        out[..., 0, 1] = b
        out[..., 1, 0] = b
        return out

    def psi(self, x, omega):
        """Angular flux at points x (...,2) for a unit direction omega (3,)."""
        a, _, _ = self._alpha(x)
        b, _, _ = self._b(x)
        t, _, _ = self._t(x)
        ox, oy = omega[0], omega[1]
        quad = ox**2 * 0.5 * t + 2 * ox * oy * b + oy**2 * 0.25 * t
        return (a + (ox + oy) * b + quad) / (4 * np.pi)

    def grad_psi(self, x, omega):
        """Spatial gradient of psi, shape (...,2)."""
        _, ax, ay = self._alpha(x)
        _, bx, by = self._b(x)
        _, tx, ty = self._t(x)
        ox, oy = omega[0], omega[1]
        cquad = ox**2 * 0.5 + oy**2 * 0.25
        gx = ax + (ox + oy) * bx + cquad * tx + 2 * ox * oy * bx
        gy = ay + (ox + oy) * by + cquad * ty + 2 * ox * oy * by
        return np.stack([gx, gy], axis=-1) / (4 * np.pi)

    def phi(self, x):
        """Exact scalar flux alpha + tr(Theta)/3."""
        a, _, _ = self._alpha(x)
        t, _, _ = self._t(x)
        return a + 0.25 * t  # (1/2 + 1/4)/3 = 1/4

    def current(self, x):
        """Exact current beta/3."""
        b, _, _ = self._b(x)
        return np.stack([b, b], axis=-1) / 3.0

    def pressure(self, x):
        """Exact second angular moment (2D block) computed by direct
        integration of Omega Omega psi over the unit sphere."""
        a, _, _ = self._alpha(x)
        t, _, _ = self._t(x)
        b, _, _ = self._b(x)
        t11, t22, t12 = 0.5 * t, 0.25 * t, b
        P = np.empty(x.shape[:-1] + (2, 2))
        P[..., 0, 0] = a / 3 + (3 * t11 + t22) / 15
        P[..., 1, 1] = a / 3 + (t11 + 3 * t22) / 15
        P[..., 0, 1] = 2 * t12 / 15
        P[..., 1, 0] = 2 * t12 / 15
        return P

    def eddington(self, x):
        """Exact Eddington tensor P/phi."""
        return self.pressure(x) / self.phi(x)[..., None, None]

    def source(self, x, omega):
        """Transport source forcing psi: q = Omega.grad psi + sigma_t psi
        - sigma_s phi / 4pi."""
        g = self.grad_psi(x, omega)
        adv = omega[0] * g[..., 0] + omega[1] * g[..., 1]
        return adv + self.sigma_t * self.psi(x, omega) - self.sigma_s * self.phi(x) / (4 * np.pi)
