"""Parameterized hole boundary: nodes, normals, weights and boundary integrals.

The curve ``x(t), t in [0, 2pi)`` runs counter-clockwise around the hole, so the
normal ``(x2', -x1') / |x'|`` points out of the hole into the periodic exterior.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

CURVE_KINDS = ("circle", "ellipse", "trig_star")


@dataclass(frozen=True)
class CurveSpec:
    """Analytic closed curve.

    ``params`` by kind:

    - ``circle``: ``{"radius": r}``
    - ``ellipse``: ``{"a": semi-axis along x1, "b": semi-axis along x2}``
    - ``trig_star``: ``{"r0": r0, "cos": [a_1, ...], "sin": [b_1, ...]}`` for the
      polar radius ``r(t) = r0 + sum_m a_m cos(mt) + b_m sin(mt)``
    """

    kind: str
    center: tuple = (0.5, 0.5)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise GeometryError(f"unknown curve kind {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        p = dict(self.params)
        if self.kind == "circle":
            if not p.get("radius", 0) > 0:
                raise GeometryError("circle radius must be positive")
        elif self.kind == "ellipse":
            if not (p.get("a", 0) > 0 and p.get("b", 0) > 0):
                raise GeometryError("ellipse semi-axes must be positive")
        else:
            if not p.get("r0", 0) > 0:
                raise GeometryError("trig_star r0 must be positive")
            p.setdefault("cos", [])
            p.setdefault("sin", [])
        object.__setattr__(self, "params", p)

    @classmethod
    def circle(cls, radius, center=(0.5, 0.5)):
        return cls("circle", center, {"radius": radius})

    @classmethod
    def ellipse(cls, a, b, center=(0.5, 0.5)):
        return cls("ellipse", center, {"a": a, "b": b})

    @classmethod
    def trig_star(cls, r0, cos=(), sin=(), center=(0.5, 0.5)):
        return cls("trig_star", center, {"r0": r0, "cos": list(cos), "sin": list(sin)})

    def evaluate(self, t):
        """Return ``x, x', x''`` at parameters ``t``, each of shape ``(len(t), 2)``."""
        t = np.asarray(t, dtype=float)
        ct, st = np.cos(t), np.sin(t)
        c = np.asarray(self.center)
        p = self.params
        if self.kind in ("circle", "ellipse"):
            a = p["radius"] if self.kind == "circle" else p["a"]
            b = p["radius"] if self.kind == "circle" else p["b"]
            x = c + np.stack([a * ct, b * st], axis=-1)
            dx = np.stack([-a * st, b * ct], axis=-1)
            ddx = np.stack([-a * ct, -b * st], axis=-1)
            return x, dx, ddx
        r, dr, ddr = p["r0"] * np.ones_like(t), np.zeros_like(t), np.zeros_like(t)
        for m, am in enumerate(p["cos"], start=1):
            r += am * np.cos(m * t)
            dr -= m * am * np.sin(m * t)
            ddr -= m * m * am * np.cos(m * t)
        for m, bm in enumerate(p["sin"], start=1):
            r += bm * np.sin(m * t)
            dr += m * bm * np.cos(m * t)
            ddr -= m * m * bm * np.sin(m * t)
        e = np.stack([ct, st], axis=-1)
        ep = np.stack([-st, ct], axis=-1)
        x = c + r[:, None] * e
        dx = dr[:, None] * e + r[:, None] * ep
        ddx = (ddr - r)[:, None] * e + 2 * dr[:, None] * ep
        return x, dx, ddx


@dataclass(frozen=True, eq=False)
class BoundaryDisc:
    """Trapezoidal discretization of a :class:`CurveSpec` with ``N`` nodes."""

    spec: CurveSpec
    N: int
    t: np.ndarray
    points: np.ndarray
    tangents: np.ndarray  # x'(t_i)
    second: np.ndarray  # x''(t_i)
    speeds: np.ndarray
    normals: np.ndarray
    weights: np.ndarray

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.weights))

    @property
    def curvature(self) -> np.ndarray:
        cross = self.tangents[:, 0] * self.second[:, 1] - self.tangents[:, 1] * self.second[:, 0]
        return cross / self.speeds**3

    @property
    def mesh_spacing(self) -> float:
        return float(np.max(self.weights))


def discretize(spec: CurveSpec, N: int, cell=None, margin=None) -> BoundaryDisc:
    """Sample ``spec`` at ``t_i = 2 pi i / N``.

    If ``cell`` (the diagonal of ``q``) is given, the curve must stay at least
    ``margin`` (default ``0.05 min q``) inside the open cell ``Q``.
    """
    N = int(N)
    if N < 16 or N % 2:
        raise ValueError(f"node count must be even and >= 16, got {N}")
    t = 2 * np.pi * np.arange(N) / N
    x, dx, ddx = spec.evaluate(t)
    speed = np.hypot(dx[:, 0], dx[:, 1])
    if np.any(speed <= 0):
        raise GeometryError("curve has a stationary point")
    normals = np.stack([dx[:, 1], -dx[:, 0]], axis=-1) / speed[:, None]
    _check_simple(spec)
    if cell is not None:
        _check_containment(spec, np.asarray(cell, dtype=float), margin)
    return BoundaryDisc(spec, N, t, x, dx, ddx, speed, normals, (2 * np.pi / N) * speed)


def _check_simple(spec, samples=2048):
    t = 2 * np.pi * np.arange(samples) / samples
    x, dx, _ = spec.evaluate(t)
    c = np.asarray(spec.center)
    # counter-clockwise, winding once around the center
    winding = _total_turn(np.arctan2(x[:, 1] - c[1], x[:, 0] - c[0]))
    if abs(winding - 1) > 1e-6:
        raise GeometryError(f"curve does not wind once counter-clockwise (winding {winding:.3g})")
    # the tangent of a simple closed curve turns by exactly 2pi
    turning = _total_turn(np.arctan2(dx[:, 1], dx[:, 0]))
    if abs(turning - 1) > 1e-6:
        raise GeometryError(f"curve self-intersects (turning number {turning:.3g})")
    if spec.kind == "trig_star":
        radial = np.sum((x - c) * np.stack([np.cos(t), np.sin(t)], axis=-1), axis=1)
        if np.any(radial <= 0):
            raise GeometryError("trig_star radius must stay positive")


def _total_turn(angles):
    """Net number of turns of a closed sequence of angles."""
    steps = np.diff(np.append(angles, angles[0]))
    return float(np.sum((steps + np.pi) % (2 * np.pi) - np.pi) / (2 * np.pi))


def _check_containment(spec, q, margin=None, samples=2048):
    if margin is None:
        margin = 0.05 * float(np.min(q))
    t = 2 * np.pi * np.arange(samples) / samples
    x, _, _ = spec.evaluate(t)
    gap = np.min(np.concatenate([x - 0.0, q - x], axis=1))
    if gap < margin:
        raise GeometryError(
            f"curve comes within {gap:.4g} of the cell boundary (margin {margin:.4g})")


def boundary_integral(disc: BoundaryDisc, f):
    """Trapezoidal integral ``sum_i w_i f_i`` of node samples ``f (N, ...)``."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != disc.N:
        raise ValueError(f"expected {disc.N} samples, got {f.shape[0]}")
    return np.tensordot(disc.weights, f, axes=(0, 0))


def zero_mean_project(disc: BoundaryDisc, mu):
    """Subtract the weighted mean so that the discrete integral vanishes."""
    mu = np.asarray(mu, dtype=float)
    return mu - boundary_integral(disc, mu) / disc.perimeter


def upsample(disc: BoundaryDisc, values, factor: int):
    """Trigonometric interpolation of node samples onto ``factor * N`` nodes.

    Returns the finer discretization and the interpolated values; used for
    near-boundary evaluation where the native grid under-resolves the kernel.
    """
    values = np.asarray(values, dtype=float)
    N, M = disc.N, disc.N * int(factor)
    coef = np.fft.fft(values, axis=0)
    fine = np.zeros((M,) + values.shape[1:], dtype=complex)
    h = N // 2
    fine[:h] = coef[:h]
    fine[-h + 1:] = coef[-h + 1:]
    # split the Nyquist mode symmetrically so real data stays real
    fine[h] = 0.5 * coef[h]
    fine[-h] = 0.5 * coef[h]
    out = np.real(np.fft.ifft(fine, axis=0)) * (M / N)
    fine_disc = discretize(disc.spec, M)
    return fine_disc, out
