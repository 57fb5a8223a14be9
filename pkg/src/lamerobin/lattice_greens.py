"""Periodic fundamental solution of the Lamé operator and its derivatives.

``Gamma^q`` is the q-periodic matrix with Fourier coefficients

    (1 / (4 pi^2 |Q| |xi|^2)) [-I + omega/(omega+1) xi xi^T / |xi|^2],   xi = q^{-1} z,

solving ``L[omega] Gamma^q = sum_z delta_{qz} I - I/|Q|``. It is the combination
``-G_q I + c Hess(H_q)`` (``c = omega/(omega+1)``) of the periodic Laplace and
biharmonic lattice sums, each evaluated by a heat-kernel Ewald split: the Fourier
tail carries ``exp(-4 pi^2 |xi|^2 tau)``, the images carry exponential integrals
of ``u = r^2 / (4 tau)``.

Derivative tensors use the layout ``D[..., i, l, k] = d_k Gamma_il``; column ``l``
is the displacement produced by a point force in direction ``e_l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import exp1

from .elastic_core import (
    ElasticConfig,
    fd_lame_residual,
    fd_lame_residual_richardson,
    traction_tensor,
)
from .errors import LatticePointError, ToleranceError

EULER_GAMMA = 0.57721566490153286061

ACCELERATIONS = ("ewald_split", "reference_windowed")


def _ein(u):
    """Entire exponential integral ``int_0^u (1 - e^{-t}) / t dt``."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = u < 1.0
    us = u[small]
    term = us.copy()
    acc = term.copy()
    for k in range(2, 30):
        term = -term * us * (k - 1) / (k * k)
        acc += term
    out[small] = acc
    ub = u[~small]
    out[~small] = exp1(ub) + EULER_GAMMA + np.log(ub)
    return out


def _phi1(u):
    """``(1 - e^{-u}) / u`` with the removable singularity filled in."""
    u = np.asarray(u, dtype=float)
    out = np.ones_like(u)
    nz = u > 0
    out[nz] = -np.expm1(-u[nz]) / u[nz]
    return out


def _phi2(u):
    """``(e^{-u} (1 + u) - 1) / u^2``, tending to -1/2 at 0."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = u < 0.5
    us = u[small]
    # sum_{k>=2} (-1)^{k+1} (k-1) u^{k-2} / k!
    acc = np.zeros_like(us)
    upow = np.ones_like(us)
    fact = 2.0
    for k in range(2, 24):
        acc += (-1) ** (k + 1) * (k - 1) * upow / fact
        upow = upow * us
        fact *= k + 1
    out[small] = acc
    ub = u[~small]
    out[~small] = (np.exp(-ub) * (1.0 + ub) - 1.0) / ub**2
    return out


def _assemble_value(y, s_iso, s_yy):
    """``s_iso I + s_yy y y^T`` for points ``y (..., 2)``."""
    out = s_yy[..., None, None] * y[..., :, None] * y[..., None, :]
    out[..., 0, 0] += s_iso
    out[..., 1, 1] += s_iso
    return out


def _assemble_deriv(y, s_k, s_sym, s3):
    """Tensor ``s_k y_k d_il + s_sym (d_ik y_l + d_lk y_i) + s3 y_i y_l y_k``."""
    eye = np.eye(2)
    out = s3[..., None, None, None] * (y[..., :, None, None] * y[..., None, :, None]
                                       * y[..., None, None, :])
    out += s_k[..., None, None, None] * eye[:, :, None] * y[..., None, None, :]
    out += s_sym[..., None, None, None] * (eye[:, None, :] * y[..., None, :, None]
                                           + eye[None, :, :] * y[..., :, None, None])
    return out


def _sum_deriv(y, s_k, s_sym, s3):
    """Image sum of :func:`_assemble_deriv` terms; ``y (p, K, 2)``, profiles ``(p, K)``."""
    p, K = s_k.shape
    a1 = np.matmul(s_k[:, None, :], y)[:, 0]
    a2 = np.matmul(s_sym[:, None, :], y)[:, 0]
    eye = np.eye(2)
    w = (s3[..., None, None] * y[..., :, None] * y[..., None, :]).reshape(p, K, 4)
    out = np.matmul(w.transpose(0, 2, 1), y).reshape(p, 2, 2, 2)
    out += eye[None, :, :, None] * a1[:, None, None, :]
    out += eye[None, :, None, :] * a2[:, None, :, None] + eye[None, None, :, :] * a2[:, :, None, None]
    return out


def free_gamma(x, omega):
    """Free-space Kelvin-type solution of ``L[omega] U = delta I`` in 2D.

    ``U(x) = (1/2pi) [((omega+2) / (2 (omega+1))) log|x| I - (omega / (2 (omega+1))) x x^T / |x|^2]``.
    """
    x = np.asarray(x, dtype=float)
    c = omega / (omega + 1.0)
    r2 = np.sum(x * x, axis=-1)
    logr = 0.5 * np.log(r2)
    return _assemble_value(x, (1.0 - 0.5 * c) * logr / (2 * np.pi), -c / (4 * np.pi * r2))


def free_dgamma(x, omega):
    """Gradient tensor ``d_k U_il`` of :func:`free_gamma`."""
    x = np.asarray(x, dtype=float)
    c = omega / (omega + 1.0)
    r2 = np.sum(x * x, axis=-1)
    G1 = -1.0 / (2 * np.pi * r2)
    H2 = -1.0 / (4 * np.pi * r2)
    H3 = 1.0 / (2 * np.pi * r2 * r2)
    return _assemble_deriv(x, -G1 + c * H2, c * H2, c * H3)


def free_traction(x, nu, omega):
    """Closed-form traction kernel of :func:`free_gamma` along normals ``nu``.

    ``beta [(x.nu) I + (x ^ nu) E] / |x|^2 + (c / pi) (x.nu) x x^T / |x|^4`` with
    ``beta = 1 / (2 pi (omega + 1))``, ``c = omega / (omega + 1)``, ``E = [[0, 1], [-1, 0]]``.
    """
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    c = omega / (omega + 1.0)
    beta = (1.0 - c) / (2 * np.pi)
    r2 = np.sum(x * x, axis=-1)
    xn = np.sum(x * nu, axis=-1) / r2
    xw = (x[..., 0] * nu[..., 1] - x[..., 1] * nu[..., 0]) / r2
    out = (c / np.pi) * (xn / r2)[..., None, None] * x[..., :, None] * x[..., None, :]
    out[..., 0, 0] += beta * xn
    out[..., 1, 1] += beta * xn
    out[..., 0, 1] += beta * xw
    out[..., 1, 0] -= beta * xw
    return out


def traction_from_gradient(omega, D, nu):
    """Apply ``T(omega, .) nu`` column-wise to a gradient tensor ``D[..., i, l, k]``."""
    A = np.swapaxes(D, -2, -3)  # A[..., l, i, k] = d_k Gamma_il: per-column Jacobian
    T = traction_tensor(omega, A)
    return np.swapaxes(np.einsum("...lik,...k->...li", T, nu), -1, -2)


@dataclass(frozen=True)
class GreensEvaluator:
    """Evaluator for ``Gamma^q``, its gradient and traction kernel.

    Parameters
    ----------
    cfg : ElasticConfig
    acceleration : {"ewald_split", "reference_windowed"}
        ``ewald_split`` is the production route. ``reference_windowed`` is the
        brute-force Gaussian-windowed Fourier sum over ``|z|_inf <= truncation``
        with polynomial (Richardson) extrapolation in the window width.
    truncation : int
        Fourier cutoff ``Z`` of the windowed reference.
    ewald_xi : float, optional
        Ewald splitting parameter; the heat-kernel split time is ``1 / (4 xi^2)``.
        Defaults to ``sqrt(pi / |Q|)``.
    tol : float
        Target absolute truncation level of the Ewald sums.
    exclusion_radius : float, optional
        Points closer than this to ``qZ^n`` are rejected. Default ``1e-8 min q``.
    window_levels : int
        Number of window widths used by the reference extrapolation.
    window_edge : float
        Ratio of the smallest truncation wavenumber to the widest window.
    """

    cfg: ElasticConfig
    acceleration: str = "ewald_split"
    truncation: int = 64
    ewald_xi: float | None = None
    tol: float = 1e-15
    exclusion_radius: float | None = None
    window_levels: int = 3
    window_edge: float = 5.0

    def __post_init__(self):
        if self.acceleration not in ACCELERATIONS:
            raise ValueError(f"unknown acceleration {self.acceleration!r}")
        if int(self.truncation) < 1:
            raise ValueError("truncation must be >= 1")
        xi = self.ewald_xi
        if xi is None:
            xi = math.sqrt(math.pi / self.cfg.cell_volume)
        if not xi > 0:
            raise ValueError("ewald_xi must be positive")
        object.__setattr__(self, "ewald_xi", float(xi))
        if self.exclusion_radius is None:
            object.__setattr__(self, "exclusion_radius", 1e-8 * float(np.min(self.cfg.q_diag)))
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.tol < 1e-16:
            raise ToleranceError(f"tolerance {self.tol:g} is below double-precision reach")

    # ------------------------------------------------------------------ setup
    @property
    def omega(self) -> float:
        return self.cfg.omega

    @property
    def c(self) -> float:
        return self.omega / (self.omega + 1.0)

    @property
    def tau(self) -> float:
        return 1.0 / (4.0 * self.ewald_xi**2)

    @property
    def _u_cut(self) -> float:
        # exp(-u) below tol with a margin for the polynomial prefactors
        return math.log(1.0 / self.tol) + 6.0

    @cached_property
    def _fourier_table(self):
        tau, q = self.tau, self.cfg.q_diag
        kmax = math.sqrt(self._u_cut / tau) / (2 * np.pi)
        m = np.ceil(kmax * q).astype(int)
        z1, z2 = np.meshgrid(np.arange(-m[0], m[0] + 1), np.arange(-m[1], m[1] + 1), indexing="ij")
        z = np.stack([z1.ravel(), z2.ravel()], axis=1)
        # half lattice: cos/sin parity folds z and -z together
        half = (z[:, 0] > 0) | ((z[:, 0] == 0) & (z[:, 1] > 0))
        xi = z[half] / q
        a = 4 * np.pi**2 * np.sum(xi * xi, axis=1)
        keep = a * tau <= self._u_cut
        xi, a = xi[keep], a[keep]
        damp = np.exp(-a * tau) / self.cfg.cell_volume
        coef = _assemble_value(xi, -damp / a, self.c * 4 * np.pi**2 * damp * (tau / a + 1.0 / a**2))
        return xi, 2.0 * coef

    def certificate(self) -> dict:
        """Truncation data recorded in run reports."""
        xi, _ = self._fourier_table
        return {
            "acceleration": self.acceleration,
            "ewald_xi": self.ewald_xi,
            "split_time": self.tau,
            "fourier_modes": int(2 * len(xi)),
            "real_cutoff": math.sqrt(4 * self.tau * self._u_cut),
            "tolerance": self.tol,
        }

    def _images(self, xmax):
        rcut = math.sqrt(4 * self.tau * self._u_cut)
        q = self.cfg.q_diag
        m = np.ceil((rcut + xmax) / q).astype(int)
        z1, z2 = np.meshgrid(np.arange(-m[0], m[0] + 1), np.arange(-m[1], m[1] + 1), indexing="ij")
        z = np.stack([z1.ravel(), z2.ravel()], axis=1)
        return z * q

    # --------------------------------------------------------- core sums
    def _wrap(self, x):
        q = self.cfg.q_diag
        return x - q * np.round(x / q)

    def _check_lattice(self, x):
        d = np.sqrt(np.sum(self._wrap(x) ** 2, axis=-1))
        if np.any(d < self.exclusion_radius):
            raise LatticePointError(
                f"point within {self.exclusion_radius:g} of the lattice (distance {d.min():.3g})")

    def _ewald(self, x, deriv, regular, chunk=2048):
        """Sum the Ewald pieces at points ``x (m, 2)``.

        With ``regular`` the z = 0 image is replaced by its difference with
        the free-space solution, giving the smooth remainder near the origin.
        """
        m = x.shape[0]
        out = np.empty((m, 2, 2, 2) if deriv else (m, 2, 2))
        if m == 0:
            return out
        shifts = self._images(float(np.max(np.abs(x))))
        for start in range(0, m, chunk):
            sl = slice(start, start + chunk)
            out[sl] = self._ewald_chunk(x[sl], shifts, deriv, regular)
        return out

    def _ewald_chunk(self, x, shifts, deriv, regular):
        tau, c, pi = self.tau, self.c, np.pi
        xi, coef = self._fourier_table
        phase = 2 * np.pi * (x @ xi.T)
        if deriv:
            out = -2 * np.pi * np.einsum("pf,fil,fk->pilk", np.sin(phase), coef, xi)
        else:
            out = np.einsum("pf,fil->pil", np.cos(phase), coef)
            out[:, 0, 0] += tau / self.cfg.cell_volume
            out[:, 1, 1] += tau / self.cfg.cell_volume

        y = x[:, None, :] - shifts[None, :, :]
        r2 = np.sum(y * y, axis=-1)
        u = r2 / (4 * tau)
        mask = u <= self._u_cut
        if regular:
            mask[:, np.all(shifts == 0, axis=1)] = False
        r2m = np.where(mask, r2, 1.0)
        eu = np.where(mask, np.exp(-np.where(mask, u, 0.0)), 0.0)
        if deriv:
            G1 = -eu / (2 * pi * r2m)
            H2 = -eu / (4 * pi * r2m)
            H3 = eu / (4 * pi) * (1.0 / (2 * tau * r2m) + 2.0 / r2m**2)
            out += _sum_deriv(y, -G1 + c * H2, c * H2, c * H3)
        else:
            e1 = np.zeros_like(u)
            e1[mask] = exp1(u[mask])
            s_iso = (-1.0 / (4 * pi) + c / (8 * pi)) * e1.sum(axis=1)
            s_yy = -c * eu / (4 * pi * r2m)
            out += np.matmul((s_yy[..., None] * y).transpose(0, 2, 1), y)
            out[:, 0, 0] += s_iso
            out[:, 1, 1] += s_iso
        if regular:
            u0 = np.sum(x * x, axis=-1) / (4 * tau)
            if deriv:
                G1 = _phi1(u0) / (8 * pi * tau)
                H2 = _phi1(u0) / (16 * pi * tau)
                H3 = _phi2(u0) / (32 * pi * tau**2)
                out += _assemble_deriv(x, -G1 + c * H2, c * H2, c * H3)
            else:
                base = -EULER_GAMMA + math.log(4 * tau) + _ein(u0)
                out += _assemble_value(x, -base / (4 * pi) + c * base / (8 * pi),
                                       c * _phi1(u0) / (16 * pi * tau))
        return out

    # ------------------------------------------------------ windowed reference
    def _window_tables(self):
        Z = int(self.truncation)
        q = self.cfg.q_diag
        zr = np.arange(-Z, Z + 1)
        xi1, xi2 = np.meshgrid(zr / q[0], zr / q[1], indexing="ij")
        k2 = xi1**2 + xi2**2
        k2[Z, Z] = 1.0
        pref = 1.0 / (4 * np.pi**2 * self.cfg.cell_volume * k2)
        c = self.c
        ghat = np.empty((2, 2) + k2.shape)
        ghat[0, 0] = pref * (-1 + c * xi1 * xi1 / k2)
        ghat[1, 1] = pref * (-1 + c * xi2 * xi2 / k2)
        ghat[0, 1] = ghat[1, 0] = pref * c * xi1 * xi2 / k2
        ghat[:, :, Z, Z] = 0.0
        wmax = min(Z / q[0], Z / q[1]) / self.window_edge
        ts = [1.0 / wmax**2 * 2.0**j for j in range(self.window_levels)]
        return zr, xi1, xi2, k2, ghat, ts

    def _windowed(self, x, deriv):
        zr, xi1, xi2, k2, ghat, ts = self._window_tables()
        q = self.cfg.q_diag
        e1 = np.exp(2j * np.pi * np.outer(x[:, 0], zr / q[0]))
        e2 = np.exp(2j * np.pi * np.outer(x[:, 1], zr / q[1]))
        vals = []
        for t in ts:
            w = np.exp(-k2 * t)
            w[len(zr) // 2, len(zr) // 2] = 0.0
            if deriv:
                out = np.empty((x.shape[0], 2, 2, 2))
                for k, xik in enumerate((xi1, xi2)):
                    for i in range(2):
                        for l in range(2):
                            M = ghat[i, l] * w * (2j * np.pi * xik)
                            out[:, i, l, k] = np.real(np.sum((e1 @ M) * e2, axis=1))
            else:
                out = np.empty((x.shape[0], 2, 2))
                for i in range(2):
                    for l in range(2):
                        M = ghat[i, l] * w
                        out[:, i, l] = np.real(np.sum((e1 @ M) * e2, axis=1))
            vals.append(out)
        return _neville_zero(np.array(ts), np.array(vals))

    # --------------------------------------------------------- public API
    def gamma_hat(self, z):
        return gamma_hat(z, self.cfg)

    def eval_gamma(self, x):
        """``Gamma^q(x)`` for points ``x (..., 2)``; returns ``(..., 2, 2)``."""
        return self._evaluate(x, deriv=False)

    def eval_dgamma(self, x):
        """Gradient ``d_k Gamma^q_il(x)``; returns ``(..., 2, 2, 2)`` indexed ``[i, l, k]``."""
        return self._evaluate(x, deriv=True)

    def _evaluate(self, x, deriv):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, 2)
        self._check_lattice(pts)
        pts = self._wrap(pts)
        if self.acceleration == "ewald_split":
            out = self._ewald(pts, deriv, regular=False)
        else:
            out = self._windowed(pts, deriv)
        return out.reshape(shape + out.shape[1:])

    def eval_regular(self, x):
        """Smooth remainder ``Gamma^q(x) - U(x)`` with ``U`` the free-space solution.

        Valid (and analytic) for ``|x_j| < q_jj``; well defined at ``x = 0``.
        """
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        out = self._ewald(x.reshape(-1, 2), deriv=False, regular=True)
        return out.reshape(shape + (2, 2))

    def eval_dregular(self, x):
        """Gradient of :meth:`eval_regular`, layout ``[..., i, l, k]``."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        out = self._ewald(x.reshape(-1, 2), deriv=True, regular=True)
        return out.reshape(shape + (2, 2, 2))

    def traction_kernel(self, x, nu):
        """Column-wise traction ``T(omega, D Gamma^{q,l}(x)) nu``; returns ``(..., 2, 2)``."""
        return traction_from_gradient(self.omega, self.eval_dgamma(x), np.asarray(nu, dtype=float))

    def fd_distributional_identity(self, x, h, richardson=False):
        """FD residual ``L[omega] Gamma^q(x) + I/|Q|`` (zero off the lattice).

        With ``richardson`` the steps ``h`` and ``h/2`` are combined to fourth order.
        """
        fd = fd_lame_residual_richardson if richardson else fd_lame_residual
        res = fd(self.eval_gamma, x, h, self.omega)
        return res + np.eye(2) / self.cfg.cell_volume


def gamma_hat(z, cfg: ElasticConfig):
    """Fourier coefficient of ``Gamma^q`` at the nonzero integer vector ``z``."""
    z = np.asarray(z, dtype=float).reshape(2)
    if not np.any(z):
        raise ValueError("Gamma^q has no zero Fourier mode")
    xi = z / cfg.q_diag
    k2 = float(xi @ xi)
    c = cfg.omega / (cfg.omega + 1.0)
    return (-np.eye(2) + c * np.outer(xi, xi) / k2) / (4 * np.pi**2 * cfg.cell_volume * k2)


def _neville_zero(ts, vals):
    """Polynomial extrapolation of ``vals[j]`` sampled at ``ts[j]`` to ``t = 0``."""
    p = list(vals)
    n = len(ts)
    for level in range(1, n):
        for j in range(n - level):
            t0, t1 = ts[j], ts[j + level]
            p[j] = (t1 * p[j] - t0 * p[j + 1]) / (t1 - t0)
    return p[0]
