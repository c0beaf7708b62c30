"""Discrete hypersurfaces and the differential operators acting on them.

Two representations are supported:

* planar polylines (``n = 1``), closed loops or open arcs, stored as ``(x, y)``;
* surfaces of revolution (``n = 2``), stored as a meridian profile ``(r, z)``
  rotated about the z-axis.  Each profile end either sits next to the axis
  (``"axis"``, the surface closes up smoothly there) or is a truncation
  (``"open"``).

Orientation convention: samples are ordered so the enclosed region is on the
left.  The outward normal is then the unit tangent rotated by -90 degrees and
convex bodies have ``H > 0``.

All arrays are per-sample and indexed like ``Slice.points``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

AXIS = "axis"
OPEN = "open"


class GeometryError(ValueError):
    """Invalid or degenerate discrete geometry."""


@dataclass(frozen=True)
class SurfaceSample:
    """One point of a discrete hypersurface with its curvature data."""

    position: np.ndarray
    normal: np.ndarray
    mean_curvature: float
    principal_curvatures: tuple[float, ...]
    second_form_norm: float


@dataclass(frozen=True, eq=False)
class Slice:
    """A discrete hypersurface at one time.

    ``profile_curvature`` is the signed curvature of the planar curve
    (the polyline itself, or the meridian for ``n = 2``) and
    ``rotational_curvature`` is the curvature of the parallel circles
    (zero for ``n = 1``).  ``principal`` holds the sorted principal
    curvatures.
    """

    points: np.ndarray
    n: int
    time: float
    closed: bool
    ends: tuple[str, str]
    tangents: np.ndarray
    normals: np.ndarray
    profile_curvature: np.ndarray
    rotational_curvature: np.ndarray
    exact: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("points", "tangents", "normals"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("profile_curvature", "rotational_curvature"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_profile(self) -> bool:
        return self.n == 2

    @property
    def mean_curvature(self) -> np.ndarray:
        return self.profile_curvature + self.rotational_curvature

    @property
    def principal(self) -> np.ndarray:
        if self.n == 1:
            return self.profile_curvature[:, None]
        return np.sort(np.stack([self.profile_curvature, self.rotational_curvature], axis=1), axis=1)

    @property
    def second_form_norm(self) -> np.ndarray:
        return np.hypot(self.profile_curvature, self.rotational_curvature)

    @property
    def radius_sq(self) -> np.ndarray:
        """|x|^2 of every sample (the meridian plane preserves distances to 0)."""
        return np.einsum("ij,ij->i", self.points, self.points)

    def sample(self, i: int) -> SurfaceSample:
        p, nu = self.points[i], self.normals[i]
        if self.n == 2:
            p = np.array([p[0], 0.0, p[1]])
            nu = np.array([nu[0], 0.0, nu[1]])
        return SurfaceSample(
            position=p.copy(),
            normal=nu.copy(),
            mean_curvature=float(self.mean_curvature[i]),
            principal_curvatures=tuple(float(v) for v in self.principal[i]),
            second_form_norm=float(self.second_form_norm[i]),
        )

    def samples(self) -> Iterator[SurfaceSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def edge_lengths(self) -> np.ndarray:
        d = np.diff(self.points, axis=0)
        if self.closed:
            d = np.vstack([d, self.points[:1] - self.points[-1:]])
        return np.linalg.norm(d, axis=1)

    def edge_ratio(self) -> float:
        e = self.edge_lengths()
        return float(e.max() / e.min())

    def interior_mask(self) -> np.ndarray:
        """Samples whose stencils are centred (open truncation ends excluded)."""
        mask = np.ones(len(self), dtype=bool)
        if not self.closed:
            if self.ends[0] == OPEN:
                mask[:2] = False
            if self.ends[1] == OPEN:
                mask[-2:] = False
        return mask

    def scan_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Candidate partner points for two-point quantities.

        For surfaces of revolution the extremal partner of a meridian point
        always lies in the meridian plane, either on the profile or on its
        reflection across the axis, so the reflected copy is appended.
        Returns ``(points, source_index)``.
        """
        idx = np.arange(len(self))
        if self.n == 1:
            return self.points, idx
        mirror = self.points * np.array([-1.0, 1.0])
        return np.vstack([self.points, mirror]), np.concatenate([idx, idx])

    def scaled(self, s: float, time_origin_shift: float = 0.0) -> "Slice":
        """Parabolic rescaling x -> s x, t -> s^2 t, curvatures -> curvatures / s."""
        return replace(
            self,
            points=self.points * s,
            time=self.time * s * s + time_origin_shift,
            profile_curvature=self.profile_curvature / s,
            rotational_curvature=self.rotational_curvature / s,
            meta=dict(self.meta),
        )

    def with_time(self, t: float) -> "Slice":
        return replace(self, time=float(t), meta=dict(self.meta))


# ---------------------------------------------------------------------------
# stencils


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _neighbours(points: np.ndarray, closed: bool, ends: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Previous/next point of each sample, with ghosts at the ends.

    Axis ends reflect the end sample across the axis; open ends get NaN rows
    which callers must replace with one-sided formulas.
    """
    if closed:
        return np.roll(points, 1, axis=0), np.roll(points, -1, axis=0)
    prev = np.empty_like(points)
    nxt = np.empty_like(points)
    prev[1:] = points[:-1]
    nxt[:-1] = points[1:]
    for side, (dst, src) in enumerate(((prev, 0), (nxt, -1))):
        if ends[side] == AXIS:
            dst[src] = points[src] * np.array([-1.0, 1.0])
        else:
            dst[src] = np.nan
    return prev, nxt


def _circle_frame(prev: np.ndarray, p: np.ndarray, nxt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit tangent at ``p`` and signed curvature of the circle through the triple."""
    u = nxt - p
    v = p - prev
    lu = np.linalg.norm(u, axis=-1)
    lv = np.linalg.norm(v, axis=-1)
    if np.any(lu == 0) or np.any(lv == 0):
        raise GeometryError("degenerate vertex")
    lw = np.linalg.norm(u + v, axis=-1)
    if np.any(lw == 0):
        raise GeometryError("degenerate vertex")
    tangent = _unit((lv / lu)[..., None] * u + (lu / lv)[..., None] * v)
    kappa = 2.0 * _cross(v, u) / (lu * lv * lw)
    return tangent, kappa


def _reflect_tangent(t_mid: np.ndarray, chord: np.ndarray) -> np.ndarray:
    e = _unit(chord)
    return 2.0 * np.dot(t_mid, e) * e - t_mid


def _planar_frame(points: np.ndarray, closed: bool, ends: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    if len(points) < 3:
        raise GeometryError("need at least 3 samples")
    prev, nxt = _neighbours(points, closed, ends)
    tangent = np.empty_like(points)
    kappa = np.empty(len(points))
    ok = ~(np.isnan(prev[:, 0]) | np.isnan(nxt[:, 0]))
    tangent[ok], kappa[ok] = _circle_frame(prev[ok], points[ok], nxt[ok])
    # open ends: circle through the three end samples, evaluated at the end
    if not ok[0]:
        tm, km = _circle_frame(points[0:1], points[1:2], points[2:3])
        tangent[0] = _reflect_tangent(tm[0], points[1] - points[0])
        kappa[0] = km[0]
    if not ok[-1]:
        tm, km = _circle_frame(points[-3:-2], points[-2:-1], points[-1:])
        tangent[-1] = _reflect_tangent(tm[0], points[-1] - points[-2])
        kappa[-1] = km[0]
    return tangent, kappa


def _outward(tangent: np.ndarray) -> np.ndarray:
    return np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)


# ---------------------------------------------------------------------------
# embeddedness


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0)


def is_embedded(points: np.ndarray, closed: bool) -> bool:
    """Pairwise segment test, pruned to nearby segments with a KD-tree."""
    pts = np.asarray(points, dtype=float)
    a = pts
    b = np.roll(pts, -1, axis=0) if closed else pts[1:]
    a = a[: len(b)]
    m = len(a)
    mid = 0.5 * (a + b)
    reach = float(np.linalg.norm(b - a, axis=1).max())
    pairs = cKDTree(mid).query_pairs(reach * 1.0000001, output_type="ndarray")
    if len(pairs) == 0:
        return True
    i, j = pairs[:, 0], pairs[:, 1]
    adjacent = (np.abs(i - j) == 1)
    if closed:
        adjacent |= (np.abs(i - j) == m - 1)
    i, j = i[~adjacent], j[~adjacent]
    if len(i) == 0:
        return True
    return not bool(np.any(_segments_intersect(a[i], b[i], a[j], b[j])))


# ---------------------------------------------------------------------------
# constructors and curvature


def curvature_polyline(vertices: np.ndarray, time: float = 0.0, closed: bool = True, check: bool = True) -> Slice:
    """Curvature of a planar polyline from circumscribed circles.

    Each vertex gets the circle through itself and its two neighbours; the
    tangent is that circle's tangent at the vertex, so both are second order
    on smoothly graded samplings.  Open arcs use the circle through the three
    end samples at each end.
    """
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError("polyline vertices must have shape (N, 2)")
    if len(pts) < (8 if closed else 3):
        raise GeometryError("too few vertices")
    edges = np.diff(np.vstack([pts, pts[:1]]) if closed else pts, axis=0)
    if np.any(np.linalg.norm(edges, axis=1) == 0):
        raise GeometryError("degenerate vertex")
    if check and not is_embedded(pts, closed):
        raise GeometryError("not embedded")
    ends = ("cyclic", "cyclic") if closed else (OPEN, OPEN)
    tangent, kappa = _planar_frame(pts, closed, ends)
    return Slice(
        points=pts,
        n=1,
        time=float(time),
        closed=closed,
        ends=ends,
        tangents=tangent,
        normals=_outward(tangent),
        profile_curvature=kappa,
        rotational_curvature=np.zeros(len(pts)),
    )


def curvature_revolution(
    profile: np.ndarray, time: float = 0.0, ends: Sequence[str] = (AXIS, AXIS), check: bool = True
) -> Slice:
    """Principal curvatures of the surface swept by rotating ``profile`` about z.

    ``profile`` holds ``(r, z)`` rows.  The meridian curvature comes from the
    circumscribed-circle rule (axis ends use the sample reflected across the
    axis as ghost neighbour) and the parallel curvature is ``nu_r / r``.
    """
    pts = np.asarray(profile, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise GeometryError("profile must have shape (N, 2) with N >= 3")
    if np.any(pts[:, 0] <= 0):
        raise GeometryError("axis touch")
    if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) == 0):
        raise GeometryError("degenerate vertex")
    ends = tuple(ends)
    if check and not is_embedded(pts, closed=False):
        raise GeometryError("not embedded")
    tangent, kappa = _planar_frame(pts, False, ends)
    normal = _outward(tangent)
    return Slice(
        points=pts,
        n=2,
        time=float(time),
        closed=False,
        ends=ends,
        tangents=tangent,
        normals=normal,
        profile_curvature=kappa,
        rotational_curvature=normal[:, 0] / pts[:, 0],
    )


def rebuild(slice_: Slice, points: np.ndarray, time: float, check: bool = True) -> Slice:
    """Same topology as ``slice_``, new positions, discretely estimated curvature."""
    if slice_.n == 1:
        return curvature_polyline(points, time, closed=slice_.closed, check=check)
    return curvature_revolution(points, time, ends=slice_.ends, check=check)


# ---------------------------------------------------------------------------
# differential operators


def _spacings(slice_: Slice) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    prev, nxt = _neighbours(slice_.points, slice_.closed, slice_.ends)
    hm = np.linalg.norm(slice_.points - prev, axis=1)
    hp = np.linalg.norm(nxt - slice_.points, axis=1)
    return prev, nxt, hm, hp


def _ghost_field(slice_: Slice, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if slice_.closed:
        return np.roll(f, 1), np.roll(f, -1)
    fm = np.empty_like(f)
    fp = np.empty_like(f)
    fm[1:] = f[:-1]
    fp[:-1] = f[1:]
    # axisymmetric fields are even across the axis
    fm[0] = f[0] if slice_.ends[0] == AXIS else np.nan
    fp[-1] = f[-1] if slice_.ends[1] == AXIS else np.nan
    return fm, fp


def _end_derivatives(s: np.ndarray, f: np.ndarray, at: float) -> tuple[float, float]:
    """First and second derivative at ``at`` of the cubic through 4 samples."""
    c = np.polyfit(s - at, f, 3)
    return float(c[2]), float(2.0 * c[1])


def _open_end_stencil_points(slice_: Slice, side: int) -> tuple[np.ndarray, slice]:
    if side == 0:
        sel = slice(0, 4)
        pts = slice_.points[sel]
    else:
        sel = slice(len(slice_) - 4, len(slice_))
        pts = slice_.points[sel]
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return s, sel


def laplace_beltrami(slice_: Slice, field: np.ndarray) -> np.ndarray:
    """Laplace-Beltrami operator of a per-sample (axisymmetric) field.

    Polylines: three-point second arclength derivative on the actual
    (non-uniform) chord lengths.  Profiles: ``(1/r) d/ds (r df/ds)`` in
    flux form, with zero flux through the axis.  Open ends use a cubic fit
    through the four end samples.
    """
    f = np.asarray(field, dtype=float)
    if len(slice_) < 3:
        raise GeometryError("need at least 3 samples")
    if f.shape != (len(slice_),):
        raise ValueError("field must have one value per sample")
    _, _, hm, hp = _spacings(slice_)
    fm, fp = _ghost_field(slice_, f)
    if slice_.n == 1:
        out = 2.0 / (hm + hp) * ((fp - f) / hp - (f - fm) / hm)
    else:
        r = slice_.points[:, 0]
        rm = np.empty_like(r)
        rp = np.empty_like(r)
        rm[1:] = 0.5 * (r[1:] + r[:-1])
        rp[:-1] = rm[1:]
        rm[0] = 0.0 if slice_.ends[0] == AXIS else np.nan
        rp[-1] = 0.0 if slice_.ends[1] == AXIS else np.nan
        out = 2.0 / (hm + hp) * (rp * (fp - f) / hp - rm * (f - fm) / hm) / r
    for side, i in ((0, 0), (1, -1)):
        if not slice_.closed and slice_.ends[side] == OPEN:
            s, sel = _open_end_stencil_points(slice_, side)
            at = s[0] if side == 0 else s[-1]
            d1, d2 = _end_derivatives(s, f[sel], at)
            if slice_.n == 1:
                out[i] = d2
            else:
                # arclength direction of the stencil matches traversal order
                dr_ds = slice_.tangents[i, 0]
                out[i] = d2 + dr_ds / slice_.points[i, 0] * d1
    return out


def tangential_gradient(slice_: Slice, field: np.ndarray) -> np.ndarray:
    """Components of the tangential gradient in the principal directions.

    Column 0 is ``df/ds`` along the curve/meridian (second-order weighted
    central difference); for profiles column 1 is the rotational component,
    identically zero for axisymmetric fields.
    """
    f = np.asarray(field, dtype=float)
    if len(slice_) < 3:
        raise GeometryError("need at least 3 samples")
    _, _, hm, hp = _spacings(slice_)
    fm, fp = _ghost_field(slice_, f)
    d = (hm**2 * (fp - f) + hp**2 * (f - fm)) / (hm * hp * (hm + hp))
    for side, i in ((0, 0), (1, -1)):
        if not slice_.closed and slice_.ends[side] == OPEN:
            s, sel = _open_end_stencil_points(slice_, side)
            at = s[0] if side == 0 else s[-1]
            d[i] = _end_derivatives(s, f[sel], at)[0]
    out = np.zeros((len(f), slice_.n))
    out[:, 0] = d
    return out


# ---------------------------------------------------------------------------
# measures and resampling


def enclosed_measure(slice_: Slice) -> float:
    """Enclosed area (closed polyline) or volume (profile closed at both axis ends)."""
    p = slice_.points
    if slice_.n == 1:
        if not slice_.closed:
            raise GeometryError("open curve encloses nothing")
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(_cross(p, q)))
    if slice_.ends != (AXIS, AXIS):
        raise GeometryError("open profile encloses nothing")
    ext = np.vstack([[0.0, p[0, 1]], p, [0.0, p[-1, 1]]])
    r0, r1 = ext[:-1, 0], ext[1:, 0]
    dz = np.diff(ext[:, 1])
    return float(np.pi / 3.0 * np.sum((r0 * r0 + r0 * r1 + r1 * r1) * dz))


def resample(slice_: Slice, count: int | None = None) -> Slice:
    """Arclength-equidistributed resampling with cubic splines.

    Closed loops use a periodic spline; axis ends are handled by splining the
    profile together with its mirror image, which keeps the new samples
    half a spacing off the axis.  Open ends stay fixed.  Curvature is
    recomputed discretely.
    """
    count = len(slice_) if count is None else int(count)
    p = slice_.points
    if slice_.closed:
        ext = np.vstack([p, p[:1]])
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(ext, axis=0), axis=1))])
        spline = CubicSpline(s, ext, bc_type="periodic")
        new = spline(np.arange(count) * s[-1] / count)
        return rebuild(slice_, new, slice_.time)
    k = min(4, len(p) - 1)
    parts = [p]
    lead = trail = 0
    if slice_.ends[0] == AXIS:
        parts.insert(0, (p[:k] * np.array([-1.0, 1.0]))[::-1])
        lead = k
    if slice_.ends[1] == AXIS:
        parts.append((p[-k:] * np.array([-1.0, 1.0]))[::-1])
        trail = k
    ext = np.vstack(parts)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(ext, axis=0), axis=1))])
    spline = CubicSpline(s, ext)
    first, last = s[lead], s[len(s) - 1 - trail]
    start = first - p[0, 0] if slice_.ends[0] == AXIS else first
    stop = last + p[-1, 0] if slice_.ends[1] == AXIS else last
    if slice_.ends[0] == AXIS and slice_.ends[1] == AXIS:
        u = start + (np.arange(count) + 0.5) * (stop - start) / count
    elif slice_.ends[0] == AXIS:
        u = start + (np.arange(count) + 0.5) * (stop - start) / (count - 0.5)
    elif slice_.ends[1] == AXIS:
        u = start + np.arange(count) * (stop - start) / (count - 0.5)
    else:
        u = np.linspace(start, stop, count)
    return rebuild(slice_, spline(u), slice_.time)


def ensure_quasi_uniform(slice_: Slice, threshold: float = 4.0) -> tuple[Slice, bool]:
    if slice_.edge_ratio() > threshold:
        return resample(slice_), True
    return slice_, False


# ---------------------------------------------------------------------------
# serialization


def write_slice(slice_: Slice, path: str | Path | None = None) -> str:
    """Plain-text rows ``index x y`` (polyline) or ``index z r`` (profile)."""
    lines = [
        f"# n={slice_.n} t={slice_.time!r} count={len(slice_)}",
        f"# closed={int(slice_.closed)} ends={slice_.ends[0]},{slice_.ends[1]}",
        "# index x y" if slice_.n == 1 else "# index z r",
    ]
    for i, (a, b) in enumerate(slice_.points.tolist()):
        if slice_.n == 1:
            lines.append(f"{i} {a!r} {b!r}")
        else:
            lines.append(f"{i} {b!r} {a!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_slice(text: str) -> Slice:
    header: dict[str, str] = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = v
            continue
        rows.append([float(v) for v in line.split()])
    try:
        n = int(header["n"])
        t = float(header["t"])
        count = int(header["count"])
    except KeyError as exc:
        raise GeometryError(f"slice header missing {exc.args[0]!r}") from None
    data = np.asarray(rows, dtype=float)
    if len(data) != count:
        raise GeometryError(f"slice header says {count} samples, found {len(data)}")
    order = np.argsort(data[:, 0], kind="stable")
    data = data[order]
    if n == 1:
        closed = bool(int(header.get("closed", "1")))
        return curvature_polyline(data[:, 1:3], t, closed=closed)
    ends = tuple(header.get("ends", f"{AXIS},{AXIS}").split(","))
    return curvature_revolution(np.stack([data[:, 2], data[:, 1]], axis=1), t, ends=ends)


def read_slice(path: str | Path) -> Slice:
    return parse_slice(Path(path).read_text())
