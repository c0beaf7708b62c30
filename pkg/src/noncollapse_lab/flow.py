"""Numerical mean curvature flow of polylines and surfaces of revolution.

The semi-implicit step treats the meridian curvature vector implicitly,
``(I - dt L_old) x_new = x_old + dt S_old``, where ``L_old`` is the
three-point arclength Laplacian of the current slice and ``S_old`` the
explicit parallel-circle contribution ``-(nu_r / r) nu`` (profiles only).
The displacement is then projected onto the old normal so that vertices
follow normal trajectories; material time derivatives along vertex paths
are therefore the normal time derivatives used in the parabolic operators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .geometry import AXIS, OPEN, GeometryError, Slice, enclosed_measure, ensure_quasi_uniform, rebuild, read_slice, write_slice

logger = logging.getLogger(__name__)

SEMI_IMPLICIT = "semi_implicit"
EXPLICIT = "explicit"


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowParams:
    """Time-stepping controls.

    Exactly one of ``dt`` (fixed step) and ``cfl`` (``dt = cfl * h_min^2``)
    is used; explicit runs default to ``cfl = 0.25``.
    """

    t_start: float = -1.0
    t_end: float = 0.0
    scheme: str = SEMI_IMPLICIT
    dt: float | None = 1e-4
    cfl: float | None = None
    resample_threshold: float = 4.0
    store_every: int = 1
    keep_successor: bool = False
    extinction_fraction: float = 1e-3
    embed_check_every: int = 1

    def __post_init__(self):
        if self.scheme not in (SEMI_IMPLICIT, EXPLICIT):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.t_start < self.t_end <= 0:
            raise ValueError("need t_start < t_end <= 0")
        if self.dt is None and self.cfl is None:
            if self.scheme != EXPLICIT:
                raise ValueError("semi-implicit runs need dt or cfl")
            object.__setattr__(self, "cfl", 0.25)
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.cfl is not None:
            if self.cfl <= 0:
                raise ValueError("cfl must be positive")
            if self.scheme == EXPLICIT and self.cfl > 0.5:
                raise ValueError("explicit scheme requires cfl <= 0.5")
        if self.store_every < 1 or self.embed_check_every < 1:
            raise ValueError("store_every and embed_check_every must be >= 1")

    def step_size(self, slice_: Slice) -> float:
        if self.dt is not None:
            return self.dt
        return self.cfl * float(slice_.edge_lengths().min()) ** 2


@dataclass(frozen=True, eq=False)
class DiscreteFlow:
    """Stored slices of one trajectory.

    ``resets`` holds the indices ``m`` for which vertex ``i`` of
    ``slices[m - 1]`` is *not* vertex ``i`` of ``slices[m]`` (a resampling
    happened in between).  ``steps`` are the time-step counts of the stored
    slices.
    """

    times: tuple[float, ...]
    slices: tuple[Slice, ...]
    resets: frozenset[int] = frozenset()
    steps: tuple[int, ...] = ()
    status: str = "complete"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.slices):
            raise ValueError("slice count must equal time count")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must increase")

    def __len__(self) -> int:
        return len(self.slices)

    def connected(self, m: int) -> bool:
        """Whether slices ``m`` and ``m + 1`` share the vertex correspondence."""
        return 0 <= m < len(self) - 1 and (m + 1) not in self.resets and len(self.slices[m]) == len(self.slices[m + 1])

    def pair_indices(self, max_dt: float | None = None) -> list[int]:
        """Indices ``m`` usable for time derivatives, optionally with ``dt <= max_dt``."""
        out = []
        for m in range(len(self) - 1):
            if not self.connected(m):
                continue
            if max_dt is not None and self.times[m + 1] - self.times[m] > max_dt * (1 + 1e-9):
                continue
            out.append(m)
        return out

    def scaled(self, s: float) -> "DiscreteFlow":
        return DiscreteFlow(
            times=tuple(t * s * s for t in self.times),
            slices=tuple(sl.scaled(s) for sl in self.slices),
            resets=self.resets,
            steps=self.steps,
            status=self.status,
            meta=dict(self.meta),
        )


# ---------------------------------------------------------------------------
# linear algebra


def _solve_tridiagonal(lower, diag, upper, rhs, cyclic: bool) -> np.ndarray:
    """Solve a (cyclic) tridiagonal system; ``lower[i]`` multiplies x[i-1] in row i."""
    n = len(diag)
    if not cyclic:
        ab = np.zeros((3, n))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag
        ab[2, :-1] = lower[1:]
        return solve_banded((1, 1), ab, rhs)
    # Sherman-Morrison on the corner couplings
    gamma = -diag[0]
    b = diag.astype(float).copy()
    b[0] -= gamma
    b[-1] -= lower[0] * upper[-1] / gamma
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = b
    ab[2, :-1] = lower[1:]
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = upper[-1]
    rhs2 = np.column_stack([rhs, u]) if rhs.ndim == 1 else np.column_stack([rhs, u[:, None]])
    sol = solve_banded((1, 1), ab, rhs2)
    y, q = sol[:, :-1], sol[:, -1]
    v0, vn = 1.0, lower[0] / gamma
    factor = (v0 * y[0] + vn * y[-1]) / (1.0 + v0 * q[0] + vn * q[-1])
    x = y - np.outer(q, factor)
    return x[:, 0] if rhs.ndim == 1 else x


def _laplacian_rows(slice_: Slice):
    """Weights of the three-point arclength Laplacian, ghosts folded in per coordinate."""
    p = slice_.points
    n = len(p)
    if slice_.closed:
        hm = np.linalg.norm(p - np.roll(p, 1, axis=0), axis=1)
        hp = np.roll(hm, -1)
    else:
        e = np.linalg.norm(np.diff(p, axis=0), axis=1)
        hm = np.empty(n)
        hp = np.empty(n)
        hm[1:] = e
        hp[:-1] = e
        # ghost leg through the axis has length 2 r
        hm[0] = 2 * p[0, 0] if slice_.ends[0] == AXIS else 1.0
        hp[-1] = 2 * p[-1, 0] if slice_.ends[1] == AXIS else 1.0
    wm = 2.0 / ((hm + hp) * hm)
    wp = 2.0 / ((hm + hp) * hp)
    rows = []
    for coord in (0, 1):
        lower = wm.copy()
        upper = wp.copy()
        diag = -(wm + wp)
        if not slice_.closed:
            for side, i in ((0, 0), (1, n - 1)):
                if slice_.ends[side] == OPEN:
                    lower[i] = upper[i] = diag[i] = 0.0
                else:
                    ghost = upper if side == 1 else lower
                    # reflected ghost: r -> -r, z -> z
                    diag[i] += -ghost[i] if coord == 0 else ghost[i]
                    ghost[i] = 0.0
        rows.append((lower, diag, upper))
    return rows


def _explicit_rotational_source(slice_: Slice) -> np.ndarray:
    if slice_.n == 1:
        return np.zeros_like(slice_.points)
    return -slice_.rotational_curvature[:, None] * slice_.normals


def _advance(slice_: Slice, dt: float, scheme: str, check: bool) -> Slice:
    if dt <= 0:
        raise FlowError("dt must be positive")
    x = slice_.points
    if scheme == EXPLICIT:
        new = x - dt * slice_.mean_curvature[:, None] * slice_.normals
    else:
        rhs = x + dt * _explicit_rotational_source(slice_)
        new = np.empty_like(x)
        for coord, (lower, diag, upper) in enumerate(_laplacian_rows(slice_)):
            a_low, a_diag, a_up = -dt * lower, 1.0 - dt * diag, -dt * upper
            if not np.all(np.isfinite(a_diag)) or np.any(a_diag == 0):
                raise FlowError("singular linear system")
            new[:, coord] = _solve_tridiagonal(a_low, a_diag, a_up, rhs[:, coord], slice_.closed)
        disp = np.einsum("ij,ij->i", new - x, slice_.normals)
        new = x + disp[:, None] * slice_.normals
    if not np.all(np.isfinite(new)):
        raise FlowError("non-finite positions")
    try:
        return rebuild(slice_, new, slice_.time + dt, check=check)
    except GeometryError as exc:
        if str(exc) in ("not embedded", "axis touch"):
            raise FlowError("embeddedness lost") from exc
        raise


def step_curve(slice_: Slice, dt: float, scheme: str = SEMI_IMPLICIT, check: bool = True) -> Slice:
    """One mean curvature flow step of a planar polyline (``x_t = -H nu``)."""
    if slice_.n != 1:
        raise ValueError("step_curve needs a polyline slice")
    return _advance(slice_, dt, scheme, check)


def step_revolution(slice_: Slice, dt: float, scheme: str = SEMI_IMPLICIT, check: bool = True) -> Slice:
    """One step for a surface of revolution, normal speed ``H = k_meridian + nu_r / r``.

    Axis-adjacent samples use the mirror ghost, so the closed surface meets
    the axis orthogonally; open truncation ends move only with the parallel
    curvature term.
    """
    if slice_.n != 2:
        raise ValueError("step_revolution needs a profile slice")
    return _advance(slice_, dt, scheme, check)


def _measure(slice_: Slice) -> float | None:
    try:
        return abs(enclosed_measure(slice_))
    except GeometryError:
        return None


def evolve(initial: Slice, params: FlowParams) -> DiscreteFlow:
    """Evolve ``initial`` (relabelled to ``params.t_start``) up to ``params.t_end``.

    Resamples by arclength once the edge ratio exceeds
    ``params.resample_threshold`` and records a reset there.  Stops early
    with ``status="extinct"`` when the enclosed measure drops below
    ``params.extinction_fraction`` of its initial value.
    """
    current = initial.with_time(params.t_start) if initial.time != params.t_start else initial
    step = step_curve if current.n == 1 else step_revolution
    m0 = _measure(current)
    times = [current.time]
    slices = [current]
    steps = [0]
    resets: set[int] = set()
    pending_reset = False
    k = 0
    status = "complete"
    end = params.t_end
    while current.time < end - 1e-12:
        dt = params.step_size(current)
        if params.scheme == EXPLICIT and params.dt is not None:
            h = float(current.edge_lengths().min())
            if dt > 0.5 * h * h:
                raise FlowError("explicit step violates dt <= 0.5 h^2")
        dt = min(dt, end - current.time)
        k += 1
        check = (k % params.embed_check_every == 0)
        nxt = step(current, dt, params.scheme, check=check)
        if end - nxt.time < 1e-12:
            nxt = nxt.with_time(end)
        nxt, did = ensure_quasi_uniform(nxt, params.resample_threshold)
        if did:
            pending_reset = True
            logger.debug("resampled at t=%.6g", nxt.time)
        current = nxt
        done = current.time >= end - 1e-12
        extinct = False
        if m0 is not None:
            m = _measure(current)
            extinct = m is not None and m < params.extinction_fraction * m0
        store = (
            k % params.store_every == 0
            or done
            or extinct
            or (params.keep_successor and (k - 1) % params.store_every == 0)
        )
        if store:
            if pending_reset:
                resets.add(len(slices))
                pending_reset = False
            slices.append(current)
            times.append(current.time)
            steps.append(k)
        if extinct:
            status = "extinct"
            break
    return DiscreteFlow(
        times=tuple(times), slices=tuple(slices), resets=frozenset(resets), steps=tuple(steps), status=status
    )


def material_time_derivative(
    flow: DiscreteFlow, field: Callable[[Slice], np.ndarray] | Sequence[np.ndarray], m: int
) -> np.ndarray:
    """Forward difference of a per-vertex field between slices ``m`` and ``m + 1``.

    ``field`` is either a function of a slice or the pair of value arrays.
    """
    if not flow.connected(m):
        raise FlowError("correspondence broken")
    s0, s1 = flow.slices[m], flow.slices[m + 1]
    if callable(field):
        f0, f1 = field(s0), field(s1)
    else:
        f0, f1 = (np.asarray(v, dtype=float) for v in field)
    return (np.asarray(f1) - np.asarray(f0)) / (s1.time - s0.time)


# ---------------------------------------------------------------------------
# archive


def write_flow(flow: DiscreteFlow, directory: str | Path) -> Path:
    """Directory of ``slice_<k>.txt`` files plus ``index.txt`` (k, step, t, reset)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = [f"# status={flow.status}", "# k step t reset"]
    for k, (t, sl) in enumerate(zip(flow.times, flow.slices)):
        write_slice(sl, d / f"slice_{k:06d}.txt")
        step = flow.steps[k] if flow.steps else k
        lines.append(f"{k} {step} {t!r} {int(k in flow.resets)}")
    (d / "index.txt").write_text("\n".join(lines) + "\n")
    return d


def read_flow(directory: str | Path) -> DiscreteFlow:
    d = Path(directory)
    status = "complete"
    times, slices, steps, resets = [], [], [], set()
    for line in (d / "index.txt").read_text().splitlines():
        if line.startswith("# status="):
            status = line.split("=", 1)[1].strip()
            continue
        if not line.strip() or line.startswith("#"):
            continue
        k, step, t, reset = line.split()
        k = int(k)
        sl = read_slice(d / f"slice_{k:06d}.txt")
        slices.append(sl)
        times.append(float(t))
        steps.append(int(step))
        if int(reset):
            resets.add(k)
    return DiscreteFlow(tuple(times), tuple(slices), frozenset(resets), tuple(steps), status)


def radius_law(rho0: float, n: int, elapsed: float) -> float:
    sq = rho0 * rho0 - 2 * n * elapsed
    return math.sqrt(sq) if sq > 0 else 0.0
