"""Exact solutions of mean curvature flow used as oracles.

Time convention: flows are ancient and live on ``t <= 0``; ``R0`` is the
radius at ``t = 0`` (``R0 = 0`` gives the self-similar solution that becomes
extinct at ``t = 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import AXIS, OPEN, Slice, curvature_polyline

__all__ = [
    "ShrinkingSphere",
    "ShrinkingCylinder",
    "GrimReaper",
    "BowlSoliton",
    "StaticPlane",
    "BowlTable",
    "ModelError",
    "sample_model",
    "exact_alpha",
    "bowl_profile",
    "ellipse",
    "MODEL_KINDS",
    "make_model",
]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ShrinkingSphere:
    R0: float = 1.0
    n: int = 2
    kind = "sphere"

    def radius(self, t: float) -> float:
        sq = self.R0**2 - 2 * self.n * t
        if sq <= 0:
            raise ModelError("extinct")
        return math.sqrt(sq)


@dataclass(frozen=True)
class ShrinkingCylinder:
    """S^{n-k} x R^k; only ``n = 2, k = 1`` is a genuine cylinder here."""

    R0: float = 1.0
    n: int = 2
    k: int = 1
    kind = "cylinder"

    def __post_init__(self):
        if not 0 <= self.k <= self.n - 1:
            raise ModelError("need 0 <= k <= n - 1")

    def radius(self, t: float) -> float:
        sq = self.R0**2 - 2 * (self.n - self.k) * t
        if sq <= 0:
            raise ModelError("extinct")
        return math.sqrt(sq)


@dataclass(frozen=True)
class GrimReaper:
    """The translating curve y = t - log cos x (unit upward speed)."""

    n: int = 1
    kind = "reaper"


@dataclass(frozen=True)
class BowlSoliton:
    """Rotationally symmetric convex translator in R^3, z = t + u(|x|)."""

    n: int = 2
    kind = "bowl"


@dataclass(frozen=True)
class StaticPlane:
    n: int = 2
    kind = "plane"


MODEL_KINDS = {
    "sphere": ShrinkingSphere,
    "cylinder": ShrinkingCylinder,
    "reaper": GrimReaper,
    "bowl": BowlSoliton,
    "plane": StaticPlane,
}


def make_model(kind: str, **params):
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ModelError(f"unknown model kind {kind!r}") from None
    return cls(**params)


def _slice(points, t, closed, ends, tangents, kappa_p, kappa_r, n, meta=None) -> Slice:
    tangents = np.asarray(tangents, dtype=float)
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    return Slice(
        points=np.asarray(points, dtype=float),
        n=n,
        time=float(t),
        closed=closed,
        ends=ends,
        tangents=tangents,
        normals=normals,
        profile_curvature=np.broadcast_to(np.asarray(kappa_p, dtype=float), (len(points),)).copy(),
        rotational_curvature=np.broadcast_to(np.asarray(kappa_r, dtype=float), (len(points),)).copy(),
        exact=True,
        meta=meta or {},
    )


def _circle(rho: float, resolution: int, t: float) -> Slice:
    th = 2 * np.pi * np.arange(resolution) / resolution
    pts = rho * np.stack([np.cos(th), np.sin(th)], axis=1)
    tan = np.stack([-np.sin(th), np.cos(th)], axis=1)
    return _slice(pts, t, True, ("cyclic", "cyclic"), tan, 1.0 / rho, 0.0, 1)


def _sphere_profile(rho: float, resolution: int, t: float) -> Slice:
    th = (np.arange(resolution) + 0.5) * np.pi / resolution
    pts = rho * np.stack([np.sin(th), -np.cos(th)], axis=1)
    tan = np.stack([np.cos(th), np.sin(th)], axis=1)
    return _slice(pts, t, False, (AXIS, AXIS), tan, 1.0 / rho, 1.0 / rho, 2)


def sample_model(model, t: float, resolution: int, extent: float = 3.0) -> Slice:
    """Slice of an exact solution at time ``t`` carrying analytic curvatures.

    ``extent`` truncates noncompact models: half-length of the cylinder and
    the plane segment, height above the tip for the grim reaper, outer
    radius of the bowl.
    """
    if resolution < 16:
        raise ModelError("resolution must be >= 16")
    if isinstance(model, ShrinkingSphere):
        rho = model.radius(t)
        if model.n == 1:
            return _circle(rho, resolution, t)
        if model.n == 2:
            return _sphere_profile(rho, resolution, t)
        raise ModelError("sphere sampling supports n in {1, 2}")
    if isinstance(model, ShrinkingCylinder):
        rho = model.radius(t)
        if model.k == 0:
            return sample_model(ShrinkingSphere(model.R0, model.n), t, resolution, extent)
        z = np.linspace(-extent, extent, resolution)
        pts = np.stack([np.full_like(z, rho), z], axis=1)
        tan = np.tile([0.0, 1.0], (resolution, 1))
        return _slice(pts, t, False, (OPEN, OPEN), tan, 0.0, 1.0 / rho, 2)
    if isinstance(model, GrimReaper):
        # unit-speed parametrisation: x = atan(sinh s), y = log cosh s
        s_max = math.acosh(math.exp(extent))
        s = np.linspace(-s_max, s_max, resolution)
        x = np.arctan(np.sinh(s))
        y = np.log(np.cosh(s)) + t
        tan = np.stack([np.cos(x), np.sin(x)], axis=1)
        sl = _slice(np.stack([x, y], axis=1), t, False, (OPEN, OPEN), tan, 1.0 / np.cosh(s), 0.0, 1)
        return sl
    if isinstance(model, BowlSoliton):
        if model.n != 2:
            raise ModelError("bowl soliton implemented for n = 2")
        sub = 4
        table = bowl_profile(2, extent, extent / (resolution * sub))
        idx = np.arange(1, resolution + 1) * sub
        rho, u, du, ddu = table.rho[idx], table.u[idx], table.du[idx], table.ddu[idx]
        w = np.sqrt(1 + du * du)
        tan = np.stack([1 / w, du / w], axis=1)
        kp = ddu / w**3
        kr = du / (rho * w)
        return _slice(np.stack([rho, u + t], axis=1), t, False, (AXIS, OPEN), tan, kp, kr, 2)
    if isinstance(model, StaticPlane):
        if model.n == 1:
            x = np.linspace(-extent, extent, resolution)
            pts = np.stack([x, np.zeros_like(x)], axis=1)
            tan = np.tile([1.0, 0.0], (resolution, 1))
            return _slice(pts, t, False, (OPEN, OPEN), tan, 0.0, 0.0, 1)
        r = (np.arange(resolution) + 0.5) * extent / (resolution - 0.5)
        pts = np.stack([r, np.zeros_like(r)], axis=1)
        tan = np.tile([1.0, 0.0], (resolution, 1))
        return _slice(pts, t, False, (AXIS, OPEN), tan, 0.0, 0.0, 2)
    raise ModelError(f"unsupported model {model!r}")


def exact_alpha(model) -> float | None:
    """Exact noncollapsing constant.

    Returns ``n`` for spheres, ``n - k`` for cylinders, ``0.0`` for the grim
    reaper (collapsed), ``inf`` for the plane (half-space balls) and ``None``
    for the bowl, which has no closed form and is handled numerically.
    """
    if isinstance(model, ShrinkingSphere):
        return float(model.n)
    if isinstance(model, ShrinkingCylinder):
        return float(model.n - model.k)
    if isinstance(model, GrimReaper):
        return 0.0
    if isinstance(model, StaticPlane):
        return math.inf
    if isinstance(model, BowlSoliton):
        return None
    raise ModelError(f"unsupported model {model!r}")


@dataclass(frozen=True)
class BowlTable:
    rho: np.ndarray
    u: np.ndarray
    du: np.ndarray
    ddu: np.ndarray

    def to_csv(self, path: str | Path | None = None) -> str:
        lines = ["rho,u,du,ddu"]
        lines += [f"{a!r},{b!r},{c!r},{d!r}" for a, b, c, d in zip(self.rho.tolist(), self.u.tolist(), self.du.tolist(), self.ddu.tolist())]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def bowl_profile(n: int = 2, max_radius: float = 3.0, step: float = 1e-3) -> BowlTable:
    """Rotationally symmetric translator u(rho).

    Solves ``u''/(1+u'^2) + (n-1) u'/rho = 1`` with classical RK4 at fixed
    step, starting one step off the axis from the regular series
    ``u = rho^2/(2n) + rho^4/(4 n^3 (n+2))``.
    """
    if max_radius <= 0 or step <= 0:
        raise ModelError("max_radius and step must be positive")
    count = int(round(max_radius / step))
    if count < 2:
        raise ModelError("step too large for max_radius")
    h = max_radius / count
    a = 1.0 / (2 * n)
    b = 1.0 / (4 * n**3 * (n + 2))

    def rhs(rho, y):
        p = y[1]
        return np.array([p, (1 + p * p) * (1 - (n - 1) * p / rho)])

    rho = np.arange(count + 1) * h
    y = np.zeros((count + 1, 2))
    y[1] = [a * h**2 + b * h**4, 2 * a * h + 4 * b * h**3]
    for i in range(1, count):
        r = rho[i]
        k1 = rhs(r, y[i])
        k2 = rhs(r + h / 2, y[i] + h / 2 * k1)
        k3 = rhs(r + h / 2, y[i] + h / 2 * k2)
        k4 = rhs(r + h, y[i] + h * k3)
        y[i + 1] = y[i] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(y[i + 1, 1] - y[i, 1]) > 0.5:
            raise ModelError("step unstable")
    u, du = y[:, 0], y[:, 1]
    ddu = np.empty_like(u)
    ddu[0] = 1.0 / n
    ddu[1:] = (1 + du[1:] ** 2) * (1 - (n - 1) * du[1:] / rho[1:])
    return BowlTable(rho=rho, u=u, du=du, ddu=ddu)


def ellipse(a: float, b: float, resolution: int, center=(0.0, 0.0), t: float = 0.0, exact: bool = False) -> Slice:
    """Counter-clockwise ellipse sampled uniformly in the polar parameter.

    With ``exact=False`` curvature is estimated discretely; with ``exact=True``
    the analytic curvature and normals are attached.
    """
    th = 2 * np.pi * np.arange(resolution) / resolution
    pts = np.stack([a * np.cos(th), b * np.sin(th)], axis=1) + np.asarray(center, dtype=float)
    if not exact:
        return curvature_polyline(pts, t)
    tan = np.stack([-a * np.sin(th), b * np.cos(th)], axis=1)
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    kappa = a * b / (b * b * np.cos(th) ** 2 + a * a * np.sin(th) ** 2) ** 1.5
    return _slice(pts, t, True, ("cyclic", "cyclic"), tan, kappa, 0.0, 1)
