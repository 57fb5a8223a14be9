"""Elasticity algebra, periodicity-cell bookkeeping and finite-difference oracles.

The Lamé operator is ``L[omega] u = Δu + omega ∇div u = div T(omega, Du)`` with
stress map ``T(omega, A) = (omega - 1) tr(A) I + (A + A^T)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ElasticConfig:
    """Lamé parameter, periodicity cell and quasi-periodicity increments.

    Parameters
    ----------
    omega : float
        Lamé-type parameter, must exceed ``1 - 2/n``.
    q_diag : array_like
        Positive cell edge lengths ``q_11, ..., q_nn``.
    B : array_like, optional
        ``n x n`` matrix of quasi-periodicity increments (default zero).
    """

    omega: float
    q_diag: np.ndarray
    B: np.ndarray = None
    n: int = field(init=False)
    cell_volume: float = field(init=False)

    def __post_init__(self):
        q = np.array(self.q_diag, dtype=float).reshape(-1)
        n = q.size
        if n != 2:
            raise ValueError(f"only n = 2 is supported, got n = {n}")
        if not np.all(np.isfinite(q)) or np.any(q <= 0):
            raise ValueError("q_diag entries must be finite and strictly positive")
        omega = float(self.omega)
        if not omega > 1.0 - 2.0 / n:
            raise ValueError(f"omega must exceed 1 - 2/n = {1.0 - 2.0 / n:g}, got {omega:g}")
        B = np.zeros((n, n)) if self.B is None else np.array(self.B, dtype=float)
        if B.shape != (n, n):
            raise ValueError(f"B must be {n}x{n}, got shape {B.shape}")
        q.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "q_diag", q)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "cell_volume", float(np.prod(q)))

    @property
    def q(self) -> np.ndarray:
        return np.diag(self.q_diag)

    @property
    def strain(self) -> np.ndarray:
        """The constant displacement gradient ``B q^{-1}``."""
        return self.B / self.q_diag[None, :]


def traction_tensor(omega, A):
    """Return ``(omega - 1) tr(A) I + A + A^T``.

    Broadcasts over leading axes of ``A`` (shape ``(..., n, n)``).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    tr = np.trace(A, axis1=-2, axis2=-1)
    out = A + np.swapaxes(A, -1, -2)
    out = out + (omega - 1.0) * tr[..., None, None] * np.eye(n)
    return out


def linear_part(cfg: ElasticConfig, x):
    """The quasi-periodic linear field ``B q^{-1} x`` at points ``x`` (shape ``(..., n)``)."""
    x = np.asarray(x, dtype=float)
    return (x / cfg.q_diag) @ cfg.B.T


def linear_part_traction(cfg: ElasticConfig, nu):
    """Traction ``T(omega, B q^{-1}) nu`` of the linear field for unit normals ``nu``."""
    nu = np.asarray(nu, dtype=float)
    return nu @ traction_tensor(cfg.omega, cfg.strain).T


def default_fd_step(cfg: ElasticConfig) -> float:
    return 1e-3 * float(np.min(cfg.q_diag))


def fd_lame_residual(field, x, h, omega):
    """Second-order central-difference approximation of ``Δu + omega ∇div u`` at ``x``.

    ``field`` maps an array of points ``(m, 2)`` to values ``(m, 2, ...)``; trailing
    axes are carried along, so a matrix-valued field is differenced column-wise.
    Uses the 9-point stencil (the mixed derivative needs the corner points).
    """
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h!r}")
    x = np.asarray(x, dtype=float).reshape(2)
    offsets = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1],
                        [1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    vals = np.asarray(field(x[None, :] + h * offsets))
    f0, fe, fw, fn, fs, fne, fse, fnw, fsw = vals
    d11 = (fe - 2.0 * f0 + fw) / h**2
    d22 = (fn - 2.0 * f0 + fs) / h**2
    d12 = (fne - fse - fnw + fsw) / (4.0 * h**2)
    lap = d11 + d22
    # grad div u: component 1 = d11 u1 + d12 u2, component 2 = d12 u1 + d22 u2
    gd = np.stack([d11[0] + d12[1], d12[0] + d22[1]])
    return lap + omega * gd


def fd_lame_residual_richardson(field, x, h, omega):
    """Richardson-extrapolated residual from steps ``h`` and ``h/2`` (fourth order)."""
    r1 = fd_lame_residual(field, x, h, omega)
    r2 = fd_lame_residual(field, x, h / 2.0, omega)
    return (4.0 * r2 - r1) / 3.0
