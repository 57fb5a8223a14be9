"""Nyström discretization of the periodic single-layer and adjoint traction operators.

On the boundary the kernel splits as ``Gamma^q = U + R`` with ``U`` the free-space
solution (log singular) and ``R`` smooth. For the single layer the logarithm is
integrated with Kress product weights. The traction kernel of ``U`` contains a
Cauchy term ``beta (y ^ nu) / |y|^2 E`` (``E`` the 2x2 rotation generator,
``beta = 1 / (2 pi (omega + 1))``), which is integrated with trigonometric
Hilbert-transform weights; everything else is smooth and uses the trapezoidal
rule with diagonal limits from the curve's derivatives.

Densities are arrays of shape ``(N, 2)``; matrices act on the flattened
node-major vector ``mu.reshape(-1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary_geom import BoundaryDisc, discretize, upsample
from .errors import StandoffError, ToleranceError
from .lattice_greens import (
    GreensEvaluator,
    free_dgamma,
    free_gamma,
    free_traction,
    traction_from_gradient,
    _neville_zero,
)

SCHEMES = ("kress_split", "offset_limit")

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class PotentialMatrices:
    """Discrete ``V_q`` and ``W*_q`` on one boundary discretization."""

    V: np.ndarray
    Wstar: np.ndarray
    disc: BoundaryDisc
    ev: GreensEvaluator
    scheme: str
    certificate: dict = field(default_factory=dict)

    def apply_V(self, mu):
        return (self.V @ np.asarray(mu).reshape(-1)).reshape(-1, 2)

    def apply_Wstar(self, mu):
        return (self.Wstar @ np.asarray(mu).reshape(-1)).reshape(-1, 2)


def kress_log_weights(N):
    """Weights ``R_d`` with ``int log(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R_{i-j} f_j``."""
    n = N // 2
    d = 2 * np.pi * np.arange(N) / N
    m = np.arange(1, n)
    w = -(4 * np.pi / N) * (np.cos(np.outer(d, m)) / m).sum(axis=1)
    return w - (4 * np.pi / N**2) * np.cos(n * d)


def hilbert_weights(N):
    """Weights ``H_d`` with ``(1/2pi) PV int cot((t_i - s)/2) f(s) ds ~ sum_j H_{i-j} f_j``."""
    n = N // 2
    d = 2 * np.pi * np.arange(N) / N
    m = np.arange(1, n)
    return (2.0 / N) * np.sin(np.outer(d, m)).sum(axis=1)


def _circulant(w, N):
    idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return w[idx]


def _blocks_to_matrix(blocks):
    """``(N, N, 2, 2)`` node blocks to the ``(2N, 2N)`` operator matrix."""
    N = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * N, 2 * N)


def assemble(disc: BoundaryDisc, ev: GreensEvaluator, scheme="kress_split", certify=None):
    """Assemble :class:`PotentialMatrices`.

    ``certify``, if given, is the largest tolerated sup-norm difference between
    ``V mu`` and ``W* mu`` at ``N`` and ``N/2`` nodes for a smooth test density;
    exceeding it raises :class:`ToleranceError`.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "kress_split":
        V, W = _assemble_kress(disc, ev)
    else:
        V, W = _assemble_offset(disc, ev)
    cert = {"scheme": scheme, "N": disc.N, "greens": ev.certificate()}
    if certify is not None:
        err = _self_convergence(disc, ev, scheme, V, W)
        cert["self_convergence"] = err
        if err > certify:
            raise ToleranceError(
                f"N vs N/2 self-convergence {err:.3g} exceeds requested {certify:.3g}")
    return PotentialMatrices(V, W, disc, ev, scheme, cert)


def _assemble_kress(disc, ev):
    N = disc.N
    omega = ev.omega
    c = omega / (omega + 1.0)
    a = (1.0 - 0.5 * c) / (2 * np.pi)  # log coefficient of the free solution
    b = c / (4 * np.pi)
    beta = (1.0 - c) / (2 * np.pi)
    x, sp, nu = disc.points, disc.speeds, disc.normals
    tau = disc.tangents / sp[:, None]
    h = 2 * np.pi / N

    y = x[:, None, :] - x[None, :, :]
    r2 = np.sum(y * y, axis=-1)
    dt = disc.t[:, None] - disc.t[None, :]
    off = ~np.eye(N, dtype=bool)
    log4sin2 = np.zeros((N, N))
    log4sin2[off] = np.log(4 * np.sin(dt[off] / 2) ** 2)

    # single layer: smooth remainder S after removing (a/2) log(4 sin^2) I
    R = ev.eval_regular(y)
    S = R.copy()
    r2s = np.where(off, r2, 1.0)
    yy = y[..., :, None] * y[..., None, :] / r2s[..., None, None]
    logterm = np.where(off, 0.5 * np.log(r2s) - 0.5 * log4sin2, np.log(sp)[:, None])
    S += a * logterm[..., None, None] * np.eye(2)
    S -= b * np.where(off[..., None, None], yy, (tau[:, :, None] * tau[:, None, :])[:, None])
    kress = _circulant(kress_log_weights(N), N)
    Vb = (0.5 * a * kress)[..., None, None] * np.eye(2) + h * S
    Vb *= sp[None, :, None, None]

    # adjoint traction operator
    Dfree = np.zeros((N, N, 2, 2, 2))
    Dfree[off] = free_dgamma(y[off], omega)
    D = Dfree + ev.eval_dregular(y)
    K = traction_from_gradient(omega, D, nu[:, None, :])
    F = K * sp[None, :, None, None]
    cot = np.zeros((N, N))
    cot[off] = 1.0 / np.tan(dt[off] / 2)
    F += (0.5 * beta * cot)[..., None, None] * ROT
    kappa = disc.curvature
    dot = np.sum(disc.tangents * disc.second, axis=1)
    diag = (sp * kappa / 2)[:, None, None] * (beta * np.eye(2) + (c / np.pi) * tau[:, :, None] * tau[:, None, :])
    diag += (beta * dot / (2 * sp**2))[:, None, None] * ROT
    # traction of the regular part at y = 0 (zero by parity, kept for completeness)
    diag += K[np.arange(N), np.arange(N)] * sp[:, None, None]
    F[np.arange(N), np.arange(N)] = diag
    hil = _circulant(hilbert_weights(N), N)
    Wb = h * F - (np.pi * beta * hil)[..., None, None] * ROT
    return _blocks_to_matrix(Vb), _blocks_to_matrix(Wb)


def _interp_matrix(N, factor):
    """Trigonometric interpolation operator from ``N`` to ``factor * N`` samples."""
    M = N * factor
    eye = np.eye(N)
    n = N // 2
    coef = np.fft.fft(eye, axis=0)
    fine = np.zeros((M, N), dtype=complex)
    fine[:n] = coef[:n]
    fine[-n + 1:] = coef[-n + 1:]
    fine[n] = 0.5 * coef[n]
    fine[-n] = 0.5 * coef[n]
    return np.real(np.fft.ifft(fine, axis=0)) * factor


NEAR_OFFSETS = np.array([1.0, 0.5, 0.25, 0.125])


def _near_kernels(disc, ev, targets, normals, fine):
    """Free-space kernel on the refined grid and smooth remainder on the native grid."""
    omega = ev.omega
    yc = targets[:, None, :] - disc.points[None, :, :]
    yf = targets[:, None, :] - fine.points[None, :, :]
    if normals is None:
        Kf = free_gamma(yf, omega)
        Kc = ev.eval_regular(yc)
    else:
        nf = normals[:, None, :]
        Kf = free_traction(yf, nf, omega)
        Kc = traction_from_gradient(omega, ev.eval_dregular(yc), nf)
    return Kf * fine.weights[None, :, None, None], Kc * disc.weights[None, :, None, None]


def _assemble_offset(disc, ev, c0=2.0, factor=32):
    """Rows from limits of off-boundary values along the normal (cross-check scheme)."""
    N = disc.N
    fine = discretize(disc.spec, N * factor)
    P = _interp_matrix(N, factor)
    eps = c0 / N * NEAR_OFFSETS
    Vs, Ts = [], []
    for e in eps:
        tgt = disc.points + e * disc.normals
        for normals, acc in ((None, Vs), (disc.normals, Ts)):
            Kf, Kc = _near_kernels(disc, ev, tgt, normals, fine)
            acc.append(np.einsum("mfil,fn->mnil", Kf, P) + Kc)
    V = _blocks_to_matrix(_neville_zero(eps, np.array(Vs)))
    W = _blocks_to_matrix(_neville_zero(eps, np.array(Ts))) - 0.5 * np.eye(2 * N)
    return V, W


def _self_convergence(disc, ev, scheme, V, W):
    half = discretize(disc.spec, disc.N // 2)
    if scheme == "kress_split":
        Vh, Wh = _assemble_kress(half, ev)
    else:
        Vh, Wh = _assemble_offset(half, ev)
    mu = smooth_test_density(disc)
    muh = smooth_test_density(half)
    err = 0.0
    for A, Ah in ((V, Vh), (W, Wh)):
        full = (A @ mu.reshape(-1)).reshape(-1, 2)[::2]
        coarse = (Ah @ muh.reshape(-1)).reshape(-1, 2)
        err = max(err, float(np.max(np.abs(full - coarse))))
    return err


def smooth_test_density(disc):
    """A fixed low-order trigonometric density with nonzero mean."""
    t = disc.t
    return np.stack([1.0 + np.cos(t) + 0.5 * np.sin(2 * t), 0.3 - np.sin(3 * t)], axis=-1)


# ----------------------------------------------------------------- evaluation
def _periodic_distance(disc, ev, x):
    q = ev.cfg.q_diag
    y = x[:, None, :] - disc.points[None, :, :]
    y -= q * np.round(y / q)
    return np.sqrt(np.min(np.sum(y * y, axis=-1), axis=1))


def default_standoff(disc) -> float:
    return 5.0 * disc.mesh_spacing


def _check_standoff(disc, ev, x, standoff):
    if standoff is None:
        standoff = default_standoff(disc)
    d = _periodic_distance(disc, ev, x)
    if np.any(d < standoff):
        raise StandoffError(
            f"evaluation point at distance {d.min():.3g} from the boundary "
            f"(standoff {standoff:.3g})")


def eval_single_layer(disc, ev, mu, x, standoff=None):
    """``v_q[omega, mu](x) = sum_i w_i Gamma^q(x - x_i) mu_i`` at points ``x (..., 2)``."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 2)
    _check_standoff(disc, ev, pts, standoff)
    G = ev.eval_gamma(pts[:, None, :] - disc.points[None, :, :])
    out = np.einsum("mnil,n,nl->mi", G, disc.weights, np.asarray(mu, dtype=float))
    return out.reshape(shape + (2,))


def eval_single_layer_traction(disc, ev, mu, x, nu, standoff=None):
    """Traction ``T(omega, D_x v_q[omega, mu](x)) nu`` at off-boundary points."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 2)
    nu = np.broadcast_to(np.asarray(nu, dtype=float), x.shape).reshape(-1, 2)
    _check_standoff(disc, ev, pts, standoff)
    D = ev.eval_dgamma(pts[:, None, :] - disc.points[None, :, :])
    K = traction_from_gradient(ev.omega, D, nu[:, None, :])
    out = np.einsum("mnil,n,nl->mi", K, disc.weights, np.asarray(mu, dtype=float))
    return out.reshape(shape + (2,))


def exterior_limit(disc, ev, mu, c0=2.0, factor=32, traction=True, chunk=64):
    """Exterior boundary limit at the nodes by normal offsets and extrapolation.

    Evaluates at ``x_i + eps nu_i`` for ``eps = (c0 / N) {1, 1/2, 1/4, 1/8}``. The
    log/Cauchy free-space part is summed on a ``factor``-times refined grid with
    trigonometrically interpolated ``mu``; the smooth remainder uses the native
    grid. The offsets are extrapolated to ``eps = 0`` with a cubic. Returns ``(N, 2)``.
    """
    mu = np.asarray(mu, dtype=float)
    N = disc.N
    fine, mu_f = upsample(disc, mu, factor)
    eps = c0 / N * NEAR_OFFSETS
    vals = []
    for e in eps:
        out = np.empty((N, 2))
        for s in range(0, N, chunk):
            sl = slice(s, s + chunk)
            tgt = disc.points[sl] + e * disc.normals[sl]
            Kf, Kc = _near_kernels(disc, ev, tgt, disc.normals[sl] if traction else None, fine)
            out[sl] = np.einsum("mfil,fl->mi", Kf, mu_f) + np.einsum("mnil,nl->mi", Kc, mu)
        vals.append(out)
    return _neville_zero(eps, np.array(vals))


def jump_relation_check(pm: PotentialMatrices, mu, c0=2.0, factor=32):
    """Sup-norm gap between ``mu/2 + W* mu`` and the extrapolated exterior traction."""
    mu = np.asarray(mu, dtype=float)
    if not np.any(mu):
        return 0.0
    lhs = 0.5 * mu + pm.apply_Wstar(mu)
    rhs = exterior_limit(pm.disc, pm.ev, mu, c0=c0, factor=factor)
    return float(np.max(np.abs(lhs - rhs)))
