"""Localized noncollapsing quantities and their verification.

All formulas assume the flow has been parabolically rescaled so that the
inner radius is ``r = 1`` and the time window is ``[-1, 0]``;
``NoncollapseParams.normalized`` and ``DiscreteFlow.scaled`` do that once at
ingestion.

Two-point defect::

    Z_c(x, y) = 1/2 c(x) |x - y|^2 - <x - y, nu(x)>

with ``c = Lambda H`` (initial hypothesis), ``c = Phi`` (propagated
quantity), ``c = 2 Lambda (2 + 6n)^4 H`` (conclusion) or ``c = H / alpha``
(alpha-noncollapsedness).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .flow import DiscreteFlow, FlowError
from .geometry import Slice, SurfaceSample, laplace_beltrami, tangential_gradient
from .models import sample_model

HYPOTHESIS = "hypothesis"
LEMMA = "lemma"
CONCLUSION = "conclusion"
ALPHA = "alpha"

ZSCAN_TOLERANCE = 1e-8
ALGEBRAIC_TOLERANCE = 1e-12
DISCRETE_TOLERANCE = 0.02
AUTO_LAMBDA_SAFETY = 1.05


class HypothesisError(ValueError):
    """The hypotheses of the theorem/corollary being checked do not hold."""


class InconsistencyError(RuntimeError):
    """A lemma precondition that should follow algebraically was violated."""


@dataclass(frozen=True)
class NoncollapseParams:
    """Constants of the local noncollapsing estimate.

    ``lam`` is the pinching/normalisation constant, ``R`` the outer radius,
    ``r`` the inner radius and ``n`` the hypersurface dimension.  The radii
    must satisfy ``R >= sqrt(1 + 3n) r``.
    """

    lam: float
    R: float
    r: float = 1.0
    n: int = 1

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("Lambda must be positive")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.R < math.sqrt(1 + 3 * self.n) * self.r * (1 - 1e-12):
            raise HypothesisError(
                f"radii relation R >= sqrt(1+3n) r violated: R={self.R}, sqrt(1+3n) r={math.sqrt(1 + 3 * self.n) * self.r}"
            )

    def normalized(self) -> "NoncollapseParams":
        return NoncollapseParams(self.lam, self.R / self.r, 1.0, self.n)

    @property
    def cutoff_constant(self) -> float:
        return (2 * self.lam) ** -0.25 / (1 + 3 * self.n)

    @property
    def hypothesis_radius(self) -> float:
        return math.sqrt(1 + 3 * self.n) * self.r

    @property
    def outer_radius(self) -> float:
        return 3 * self.R

    @property
    def conclusion_radius(self) -> float:
        return 0.5 * self.r

    @property
    def conclusion_factor(self) -> float:
        """Lambda (2 + 6n)^4, the constant in front of ``H |x - y|^2``."""
        return self.lam * (2 + 6 * self.n) ** 4

    def inner_radius_sq(self, t: float) -> float:
        return 1 - 3 * self.n * t

    def heat_constant(self) -> float:
        """Exact value of ``(d/dt - Laplacian) phi``."""
        return -self.cutoff_constant * self.n

    def with_lambda(self, lam: float) -> "NoncollapseParams":
        return NoncollapseParams(lam, self.R, self.r, self.n)


# ---------------------------------------------------------------------------
# pointwise quantities


def phi(position, t: float, params: NoncollapseParams) -> float:
    x = np.asarray(position, dtype=float)
    rem = params.inner_radius_sq(t) - float(x @ x)
    if rem < 0:
        raise ValueError("outside cutoff support")
    return params.cutoff_constant * rem


def phi_field(slice_: Slice, params: NoncollapseParams, t: float | None = None) -> np.ndarray:
    """The cutoff polynomial at every sample (negative outside its support)."""
    t = slice_.time if t is None else t
    return params.cutoff_constant * (params.inner_radius_sq(t) - slice_.radius_sq)


def cutoff_support(slice_: Slice, params: NoncollapseParams, t: float | None = None) -> np.ndarray:
    t = slice_.time if t is None else t
    return slice_.radius_sq < params.inner_radius_sq(t)


def capital_phi(sample: SurfaceSample, t: float, params: NoncollapseParams, position=None) -> float:
    position = sample.position if position is None else position
    p = phi(position, t, params)
    if p <= 0:
        raise ValueError("cutoff is not positive at this point")
    if sample.mean_curvature <= 0:
        raise ValueError("mean convexity violated")
    return p**-4 * sample.mean_curvature


def capital_phi_field(slice_: Slice, params: NoncollapseParams, mask: np.ndarray | None = None) -> np.ndarray:
    """``phi^-4 H`` on ``mask`` (default: cutoff support), NaN elsewhere."""
    mask = cutoff_support(slice_, params) if mask is None else mask
    H = slice_.mean_curvature
    if np.any(H[mask] <= 0):
        raise ValueError("mean convexity violated")
    out = np.full(len(slice_), np.nan)
    out[mask] = phi_field(slice_, params)[mask] ** -4 * H[mask]
    return out


def two_point_defect(x_sample: SurfaceSample, y, coeff: float) -> float:
    d = np.asarray(x_sample.position, dtype=float) - np.asarray(y, dtype=float)
    return 0.5 * coeff * float(d @ d) - float(d @ x_sample.normal)


# ---------------------------------------------------------------------------
# inscribed radius


def _pair_radii(x: np.ndarray, nu: np.ndarray, y: np.ndarray, self_cols: np.ndarray | None) -> np.ndarray:
    d = x[:, None, :] - y[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", d, d)
    dn = np.einsum("ijk,ik->ij", d, nu)
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = np.where(dn > 0, d2 / (2 * dn), np.inf)
    if self_cols is not None:
        rad[np.arange(len(x)), self_cols] = np.inf
    return rad.min(axis=1)


def inscribed_radii(
    slice_: Slice,
    x_index: np.ndarray | None = None,
    y_radius: float = math.inf,
    use_curvature: bool = True,
) -> np.ndarray:
    """Largest interior tangent ball radius at each requested sample.

    ``min(1/lambda_n, min_y |x-y|^2 / (2 <x-y, nu(x)>))`` over partners with
    ``<x-y, nu(x)> > 0``; ``inf`` stands for a half-space.
    """
    idx = np.arange(len(slice_)) if x_index is None else np.atleast_1d(np.asarray(x_index))
    pts, _ = slice_.scan_points()
    keep = np.einsum("ij,ij->i", pts, pts) < y_radius**2
    cols = np.flatnonzero(keep)
    y = pts[cols]
    out = np.empty(len(idx))
    pos = {c: k for k, c in enumerate(cols)}
    for start in range(0, len(idx), 256):
        chunk = idx[start : start + 256]
        self_cols = np.array([pos.get(i, -1) for i in chunk])
        rad = _pair_radii(slice_.points[chunk], slice_.normals[chunk], y, None)
        if np.any(self_cols >= 0):
            # recompute rows that contain their own sample without it
            for k, (i, c) in enumerate(zip(chunk, self_cols)):
                if c >= 0:
                    yy = np.delete(y, c, axis=0)
                    rad[k] = _pair_radii(slice_.points[i : i + 1], slice_.normals[i : i + 1], yy, None)[0]
        out[start : start + len(chunk)] = rad
    if use_curvature:
        lam_n = slice_.principal[idx, -1]
        with np.errstate(divide="ignore"):
            curv = np.where(lam_n > 0, 1.0 / lam_n, np.inf)
        out = np.minimum(out, curv)
    return out


def inscribed_alphas(slice_: Slice, x_index=None, y_radius: float = math.inf, use_curvature: bool = True) -> np.ndarray:
    idx = np.arange(len(slice_)) if x_index is None else np.atleast_1d(np.asarray(x_index))
    H = slice_.mean_curvature[idx]
    if np.any(H <= 0):
        raise ValueError("inscribed alpha needs H > 0")
    return H * inscribed_radii(slice_, idx, y_radius, use_curvature)


def inscribed_alpha(slice_: Slice, x_index: int) -> float:
    """``H(x) r_in(x)``; ``inf`` when only half-space balls are constrained."""
    return float(inscribed_alphas(slice_, [x_index])[0])


# ---------------------------------------------------------------------------
# two-point scans


@dataclass(frozen=True)
class ZScanReport:
    time: float
    min_Z: float
    argmin: tuple[int, int]
    violations: int
    pair_count: int
    tolerance: float
    coefficient: str
    alpha_min: float = math.nan
    H_min: float = math.nan
    H_max: float = math.nan
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def csv_row(self) -> list:
        return [
            repr(self.time),
            repr(self.min_Z),
            self.argmin[0],
            self.argmin[1],
            self.violations,
            self.pair_count,
            repr(self.alpha_min),
            repr(self.H_min),
            repr(self.H_max),
        ]


ZSCAN_HEADER = ["t", "min_Z", "argmin_x", "argmin_y", "violations", "pairs", "alpha_min", "H_min", "H_max"]


def write_zscan_csv(reports: Iterable[ZScanReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ZSCAN_HEADER)
        for rep in reports:
            w.writerow(rep.csv_row())


def coefficient_field(
    slice_: Slice, params: NoncollapseParams | None, coeff, x_mask: np.ndarray, alpha: float | None = None
) -> np.ndarray:
    H = slice_.mean_curvature
    if isinstance(coeff, str):
        if coeff == HYPOTHESIS:
            return params.lam * H
        if coeff == CONCLUSION:
            return 2 * params.conclusion_factor * H
        if coeff == LEMMA:
            return capital_phi_field(slice_, params, x_mask)
        if coeff == ALPHA:
            if alpha is None or not alpha > 0:
                raise ValueError("alpha form needs a positive alpha")
            return H / alpha
        raise ValueError(f"unknown coefficient form {coeff!r}")
    c = np.asarray(coeff, dtype=float)
    return np.broadcast_to(c, (len(slice_),)).astype(float)


def _default_domains(slice_: Slice, params: NoncollapseParams | None, coeff) -> tuple[np.ndarray, float]:
    everything = np.ones(len(slice_), dtype=bool)
    if params is None or not isinstance(coeff, str) or coeff == ALPHA:
        return everything, math.inf
    rsq = slice_.radius_sq
    if coeff == LEMMA:
        return cutoff_support(slice_, params), params.outer_radius
    if coeff == HYPOTHESIS:
        return rsq < params.hypothesis_radius**2, params.outer_radius
    return rsq < params.conclusion_radius**2, params.outer_radius


def _scan_chunk(x, nu, c, rows, y, y_src, n_direct, lam_n, H, tol):
    d = x[:, None, :] - y[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", d, d)
    dn = np.einsum("ijk,ik->ij", d, nu)
    Z = 0.5 * c[:, None] * d2 - dn
    # x = y is skipped (its limit is a curvature bound checked separately)
    is_self = (y_src[None, :] == rows[:, None]) & (np.arange(len(y))[None, :] < n_direct)
    Z[is_self] = np.inf
    flat = int(np.argmin(Z))
    i, j = divmod(flat, Z.shape[1])
    viol = int(np.count_nonzero(Z < -tol))
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = np.where((dn > 0) & ~is_self, d2 / (2 * dn), np.inf)
    r_in = rad.min(axis=1)
    with np.errstate(divide="ignore"):
        r_in = np.minimum(r_in, np.where(lam_n > 0, 1.0 / lam_n, np.inf))
    alpha = float(np.min(H * r_in)) if len(H) else math.inf
    return float(Z[i, j]), i, j, viol, int(np.count_nonzero(~is_self)), alpha


def scan_Z(
    slice_: Slice,
    params: NoncollapseParams | None = None,
    coeff=LEMMA,
    *,
    alpha: float | None = None,
    x_mask: np.ndarray | None = None,
    y_radius: float | None = None,
    tolerance: float = ZSCAN_TOLERANCE,
    threads: int = 1,
    chunk: int = 128,
) -> ZScanReport:
    """All-pairs two-point scan with ``x`` and ``y`` restricted to their balls.

    Default domains follow the coefficient form: the shrinking cutoff ball
    for ``"lemma"``, ``B_sqrt(1+3n)`` for ``"hypothesis"``, ``B_1/2`` for
    ``"conclusion"``; ``y`` ranges over ``B_3R``.  Work is split over ``x``
    chunks and merged in a fixed order, so results do not depend on
    ``threads``.  ``argmin[1]`` indices ``>= len(slice_)`` refer to samples
    reflected across the axis.
    """
    dx, dy = _default_domains(slice_, params, coeff)
    x_mask = dx if x_mask is None else np.asarray(x_mask, dtype=bool)
    y_radius = dy if y_radius is None else y_radius
    rows = np.flatnonzero(x_mask)
    label = coeff if isinstance(coeff, str) else "custom"
    if len(rows) == 0:
        return ZScanReport(slice_.time, math.inf, (-1, -1), 0, 0, tolerance, label, vacuous=True)
    c_all = coefficient_field(slice_, params, coeff, x_mask, alpha)
    pts, src = slice_.scan_points()
    n = len(slice_)
    ysel = np.flatnonzero(np.einsum("ij,ij->i", pts, pts) < y_radius**2)
    y, y_src = pts[ysel], src[ysel]
    n_direct = int(np.count_nonzero(ysel < n))
    H = slice_.mean_curvature
    lam_n = slice_.principal[:, -1]
    parts = [rows[k : k + chunk] for k in range(0, len(rows), chunk)]

    def work(part):
        return _scan_chunk(
            slice_.points[part], slice_.normals[part], c_all[part], part, y, y_src, n_direct, lam_n[part], H[part], tolerance
        )

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, parts))
    else:
        results = [work(p) for p in parts]
    best = math.inf
    arg = (-1, -1)
    viol = pairs = 0
    amin = math.inf
    for part, (zmin, i, j, v, pc, a) in zip(parts, results):
        if zmin < best:
            best = zmin
            arg = (int(part[i]), int(ysel[j]))
        viol += v
        pairs += pc
        amin = min(amin, a)
    Hx = H[rows]
    return ZScanReport(
        time=slice_.time,
        min_Z=best,
        argmin=arg,
        violations=viol,
        pair_count=pairs,
        tolerance=tolerance,
        coefficient=label,
        alpha_min=amin,
        H_min=float(Hx.min()),
        H_max=float(Hx.max()),
    )


def alpha_by_bisection(
    slice_: Slice, x_mask: np.ndarray | None = None, rel_tol: float = 1e-10, alpha_cap: float = 1e6
) -> float:
    """Largest alpha for which the scan with ``c = H / alpha`` has no violation."""

    def ok(a):
        return scan_Z(slice_, None, ALPHA, alpha=a, x_mask=x_mask, tolerance=0.0).passed

    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2 * hi
        if hi > alpha_cap:
            return math.inf
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# lemma checks


@dataclass
class LemmaReport:
    lemma: str
    time: float
    samples: np.ndarray
    defects: np.ndarray
    passed: bool
    tolerance: float
    hypothesis_failures: int = 0
    vacuous: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.defects)

    @property
    def min(self) -> float:
        return float(self.defects.min()) if self.count else math.nan

    @property
    def max(self) -> float:
        return float(self.defects.max()) if self.count else math.nan

    @property
    def mean(self) -> float:
        return float(self.defects.mean()) if self.count else math.nan

    def summary(self) -> str:
        if self.vacuous:
            return f"{self.lemma} t={self.time:.6g}: vacuous (no samples in cutoff support)"
        status = "pass" if self.passed else "FAIL"
        extra = " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.extra.items())
        return (
            f"{self.lemma} t={self.time:.6g}: {status} samples={self.count} "
            f"defect[min={self.min:.6g} max={self.max:.6g} mean={self.mean:.6g}] "
            f"hypothesis_failures={self.hypothesis_failures} {extra}".rstrip()
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample", "defect"])
            for s, d in zip(self.samples, self.defects):
                w.writerow([int(s), repr(float(d))])


def _check_window(t: float) -> None:
    if not -1 - 1e-12 <= t <= 1e-12:
        raise ValueError(f"time {t} outside the normalized window [-1, 0]")


def pinching_ok(slice_: Slice, lam: float, tol: float = ALGEBRAIC_TOLERANCE) -> np.ndarray:
    """``|A| <= Lambda H`` per sample (relative tolerance)."""
    H = slice_.mean_curvature
    return slice_.second_form_norm <= lam * H * (1 + tol)


def check_lemma_aux(slice_: Slice, params: NoncollapseParams, tolerance: float = ALGEBRAIC_TOLERANCE) -> LemmaReport:
    """``Phi >= 2 Lambda H`` and ``|lambda_i| <= Phi / 2`` on the cutoff support.

    Samples violating ``|A| <= Lambda H`` are counted as hypothesis
    failures and not judged.  Defects are relative to ``Phi``.
    """
    _check_window(slice_.time)
    support = cutoff_support(slice_, params)
    pinched = pinching_ok(slice_, params.lam) & (slice_.mean_curvature > 0)
    hyp_fail = int(np.count_nonzero(support & ~pinched))
    mask = support & pinched
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return LemmaReport("phi-bounds", slice_.time, idx, np.zeros(0), True, tolerance, hyp_fail, vacuous=True)
    Phi = capital_phi_field(slice_, params, mask)[idx]
    H = slice_.mean_curvature[idx]
    lam_abs = np.abs(slice_.principal[idx]).max(axis=1)
    d1 = (Phi - 2 * params.lam * H) / Phi
    d2 = (0.5 * Phi - lam_abs) / Phi
    defects = np.minimum(d1, d2)
    return LemmaReport(
        "phi-bounds",
        slice_.time,
        idx,
        defects,
        bool(np.all(defects >= -tolerance)),
        tolerance,
        hyp_fail,
        extra={"min_phi_bound": float(d1.min()), "min_curvature_bound": float(d2.min())},
    )


def _neighbour_support(slice_: Slice, support: np.ndarray) -> np.ndarray:
    """Samples whose whole three-point stencil lies in ``support``."""
    if slice_.closed:
        return support & np.roll(support, 1) & np.roll(support, -1)
    ok = support.copy()
    ok[1:] &= support[:-1]
    ok[:-1] &= support[1:]
    return ok


def _pair_mask(flow: DiscreteFlow, m: int, params: NoncollapseParams) -> np.ndarray:
    s0, s1 = flow.slices[m], flow.slices[m + 1]
    mask = np.ones(len(s0), dtype=bool)
    for s in (s0, s1):
        mask &= _neighbour_support(s, cutoff_support(s, params)) & s.interior_mask()
    return mask


def heat_defect_phi(
    flow: DiscreteFlow, m: int, params: NoncollapseParams, tolerance: float = DISCRETE_TOLERANCE
) -> LemmaReport:
    """Discrete ``(d/dt - Laplacian) phi`` between slices ``m`` and ``m + 1``.

    The time derivative is along vertex trajectories; the Laplacian is the
    average over both slices (centred in time).  Passes when every sample is
    within ``tolerance`` (relative) of the exact constant.
    """
    if not flow.connected(m):
        raise FlowError("correspondence broken")
    s0, s1 = flow.slices[m], flow.slices[m + 1]
    _check_window(s0.time)
    _check_window(s1.time)
    idx = np.flatnonzero(_pair_mask(flow, m, params))
    target = params.heat_constant()
    if len(idx) == 0:
        return LemmaReport("cutoff-heat", s0.time, idx, np.zeros(0), True, tolerance, vacuous=True, extra={"target": target})
    f0, f1 = phi_field(s0, params), phi_field(s1, params)
    dt = s1.time - s0.time
    lap = 0.5 * (laplace_beltrami(s0, f0) + laplace_beltrami(s1, f1))
    defect = ((f1 - f0) / dt - lap)[idx]
    rel = np.abs(defect - target) / abs(target)
    return LemmaReport(
        "cutoff-heat",
        s0.time,
        idx,
        defect,
        bool(np.all(rel <= tolerance)),
        tolerance,
        extra={"target": target, "max_rel_error": float(rel.max()), "variance": float(defect.var())},
    )


def supersolution_terms(flow: DiscreteFlow, m: int, params: NoncollapseParams, idx: np.ndarray) -> dict:
    """Individual terms of the parabolic inequality for ``Phi`` at samples ``idx``."""
    s0, s1 = flow.slices[m], flow.slices[m + 1]
    dt = s1.time - s0.time
    mask = np.zeros(len(s0), dtype=bool)
    mask[idx] = True
    terms = []
    Phis = []
    for s in (s0, s1):
        # Phi is smooth across the stencil because neighbours lie in the support
        wide = cutoff_support(s, params)
        Phi = np.full(len(s), np.nan)
        Phi[wide] = phi_field(s, params)[wide] ** -4 * s.mean_curvature[wide]
        Phis.append(Phi)
        lap = laplace_beltrami(s, np.where(wide, Phi, 0.0))
        grad = tangential_gradient(s, np.where(wide, Phi, 0.0))
        A2 = s.second_form_norm**2
        # principal directions: meridian/curve direction, then rotation
        lam_dir = [s.profile_curvature, s.rotational_curvature][: s.n]
        gap = [Phi - l for l in lam_dir]
        grad_term = sum(2 * grad[:, i] ** 2 / gap[i] for i in range(s.n))
        terms.append({"lap": lap, "A2Phi": A2 * Phi, "grad": grad_term, "gap": np.min(np.stack(gap), axis=0)})
    dPhi = (Phis[1] - Phis[0]) / dt
    out = {"dt_Phi": dPhi[idx]}
    for key in ("lap", "A2Phi", "grad"):
        out[key] = 0.5 * (terms[0][key] + terms[1][key])[idx]
    out["gap"] = np.minimum(terms[0]["gap"], terms[1]["gap"])[idx]
    return out


def supersolution_defect_Phi(
    flow: DiscreteFlow, m: int, params: NoncollapseParams, tolerance: float = DISCRETE_TOLERANCE
) -> LemmaReport:
    """``dPhi/dt - Lap Phi - |A|^2 Phi + 2 sum (D_i Phi)^2 / (Phi - lambda_i)`` per sample.

    The inequality is strict in the continuum; here a sample fails only if
    the defect is below ``-tolerance`` times the sum of the absolute values
    of the four terms.  ``extra["strict"]`` reports whether every defect is
    positive and ``extra["min_margin"]`` the smallest normalised defect.
    """
    if not flow.connected(m):
        raise FlowError("correspondence broken")
    s0, s1 = flow.slices[m], flow.slices[m + 1]
    _check_window(s0.time)
    _check_window(s1.time)
    mask = _pair_mask(flow, m, params)
    hyp = np.ones(len(s0), dtype=bool)
    for s in (s0, s1):
        hyp &= pinching_ok(s, params.lam) & (s.mean_curvature > 0)
    hyp_fail = int(np.count_nonzero(mask & ~hyp))
    idx = np.flatnonzero(mask & hyp)
    if len(idx) == 0:
        return LemmaReport("supersolution", s0.time, idx, np.zeros(0), True, tolerance, hyp_fail, vacuous=True)
    t = supersolution_terms(flow, m, params, idx)
    if np.any(t["gap"] <= 0):
        raise InconsistencyError("Phi - lambda_i <= 0 where |A| <= Lambda H holds")
    defect = t["dt_Phi"] - t["lap"] - t["A2Phi"] + t["grad"]
    scale = np.abs(t["dt_Phi"]) + np.abs(t["lap"]) + np.abs(t["A2Phi"]) + np.abs(t["grad"])
    margin = defect / scale
    return LemmaReport(
        "supersolution",
        s0.time,
        idx,
        defect,
        bool(np.all(margin >= -tolerance)),
        tolerance,
        hyp_fail,
        extra={"min_margin": float(margin.min()), "strict": bool(np.all(defect > 0))},
    )


# ---------------------------------------------------------------------------
# theorem and corollary


@dataclass
class HypothesisReport:
    passed: bool
    pinching_failures: int
    lower_bound_failures: int
    initial_scan: ZScanReport | None
    messages: list[str] = field(default_factory=list)


@dataclass
class TheoremReport:
    params: NoncollapseParams
    hypothesis: HypothesisReport
    conclusion: list[ZScanReport] | None

    @property
    def conclusion_passed(self) -> bool | None:
        if self.conclusion is None:
            return None
        return all(r.passed for r in self.conclusion)

    @property
    def passed(self) -> bool:
        return self.hypothesis.passed and bool(self.conclusion_passed)


def _normalize(flow: DiscreteFlow, params: NoncollapseParams) -> tuple[DiscreteFlow, NoncollapseParams]:
    if params.r == 1.0:
        return flow, params
    return flow.scaled(1.0 / params.r), params.normalized()


def _window_slices(flow: DiscreteFlow) -> list[Slice]:
    if flow.times[0] > -1 + 1e-9 or flow.times[-1] < -1e-9:
        raise FlowError("insufficient time range")
    return [s for s in flow.slices if -1 - 1e-9 <= s.time <= 1e-9]


def hypothesis_lambda(flow: DiscreteFlow, R: float, r: float = 1.0, n: int | None = None) -> float:
    """Smallest Lambda satisfying every hypothesis on the sampled flow.

    Maximum over the hypothesis ball of ``|A|/H`` and ``1/(R H)`` at all
    times, and of ``1/(H r_pairs)`` on the initial slice (the two-point
    initial condition, partners in ``B_3R``).
    """
    n = flow.slices[0].n if n is None else n
    s = 1.0 / r
    flow = flow.scaled(s) if r != 1.0 else flow
    Rn = R * s
    slices = _window_slices(flow)
    rad = math.sqrt(1 + 3 * n)
    need = 0.0
    for sl in slices:
        mask = sl.radius_sq < rad * rad
        if not np.any(mask):
            continue
        H = sl.mean_curvature[mask]
        if np.any(H <= 0):
            return math.inf
        need = max(need, float(np.max(sl.second_form_norm[mask] / H)), float(np.max(1.0 / (Rn * H))))
    first = slices[0]
    mask = first.radius_sq < rad * rad
    if np.any(mask):
        alphas = inscribed_alphas(first, np.flatnonzero(mask), y_radius=3 * Rn, use_curvature=False)
        need = max(need, float(np.max(1.0 / alphas)))
    return need


def auto_lambda(flow: DiscreteFlow, R: float, r: float = 1.0, n: int | None = None, safety: float = AUTO_LAMBDA_SAFETY) -> float:
    return safety * hypothesis_lambda(flow, R, r, n)


def check_hypotheses(flow: DiscreteFlow, params: NoncollapseParams, tolerance: float = ZSCAN_TOLERANCE, threads: int = 1) -> HypothesisReport:
    flow, params = _normalize(flow, params)
    slices = _window_slices(flow)
    radius_sq = params.hypothesis_radius**2
    pinch = lower = 0
    msgs = []
    for sl in slices:
        mask = sl.radius_sq < radius_sq
        H = sl.mean_curvature
        p = int(np.count_nonzero(mask & ~(pinching_ok(sl, params.lam) & (H > 0))))
        lo = int(np.count_nonzero(mask & ~(1.0 / params.R <= params.lam * H * (1 + ALGEBRAIC_TOLERANCE))))
        if p:
            msgs.append(f"t={sl.time:.6g}: |A| <= Lambda H fails at {p} samples")
        if lo:
            msgs.append(f"t={sl.time:.6g}: 1/R <= Lambda H fails at {lo} samples")
        pinch += p
        lower += lo
    init = scan_Z(slices[0], params, HYPOTHESIS, tolerance=tolerance, threads=threads)
    if not init.passed:
        msgs.append(f"initial two-point condition fails: min_Z={init.min_Z:.6g} at {init.argmin}")
    return HypothesisReport(pinch == 0 and lower == 0 and init.passed, pinch, lower, init, msgs)


def check_theorem(
    flow: DiscreteFlow, params: NoncollapseParams, tolerance: float = ZSCAN_TOLERANCE, threads: int = 1
) -> TheoremReport:
    """Hypotheses on ``[-r^2, 0]`` followed by conclusion scans at every stored time.

    The conclusion is only evaluated when the hypotheses hold.
    """
    flow, params = _normalize(flow, params)
    hyp = check_hypotheses(flow, params, tolerance, threads)
    if not hyp.passed:
        return TheoremReport(params, hyp, None)
    reports = [scan_Z(sl, params, CONCLUSION, tolerance=tolerance, threads=threads) for sl in _window_slices(flow)]
    return TheoremReport(params, hyp, reports)


def lemma_scans(flow: DiscreteFlow, params: NoncollapseParams, tolerance: float = ZSCAN_TOLERANCE, threads: int = 1) -> list[ZScanReport]:
    """Scans with ``c = Phi`` on the shrinking cutoff ball at every stored time."""
    flow, params = _normalize(flow, params)
    return [scan_Z(sl, params, LEMMA, tolerance=tolerance, threads=threads) for sl in _window_slices(flow)]


@dataclass
class CorollaryReport:
    lam: float
    n: int
    hypothesis: list[ZScanReport]
    pinching_failures: list[int]
    conclusion: list[ZScanReport]

    @property
    def hypothesis_passed(self) -> bool:
        return all(r.passed for r in self.hypothesis) and not any(self.pinching_failures)

    @property
    def conclusion_passed(self) -> bool:
        return all(r.passed for r in self.conclusion)

    @property
    def passed(self) -> bool:
        return self.hypothesis_passed and self.conclusion_passed


def check_corollary_ancient(
    model,
    t_list: Sequence[float],
    lam: float,
    resolution: int = 256,
    extent: float | None = None,
    conclusion_times: Sequence[float] | None = None,
    tolerance: float = ZSCAN_TOLERANCE,
    threads: int = 1,
) -> CorollaryReport:
    """Ancient-solution version on an exact model.

    Each ``t_j`` slice is rescaled by ``r_j = sqrt(-t_j)`` so the hypothesis
    ball becomes ``B_sqrt(1+3n)`` at time -1; ``extent`` is the truncation
    in those rescaled units (default ``2 sqrt(1+3n)``).  Conclusion scans
    use every sample as ``x`` and ``y``.
    """
    n = model.n
    rad = math.sqrt(1 + 3 * n)
    extent = 2 * rad if extent is None else extent
    params = NoncollapseParams(lam, rad, 1.0, n)
    hyp, pinch = [], []
    for tj in t_list:
        if tj >= 0:
            raise ValueError("t_j must be negative")
        rj = math.sqrt(-tj)
        sl = sample_model(model, tj, resolution, extent * rj).scaled(1.0 / rj)
        mask = sl.radius_sq < rad * rad
        pinch.append(int(np.count_nonzero(mask & ~(pinching_ok(sl, lam) & (sl.mean_curvature > 0)))))
        hyp.append(scan_Z(sl, params, HYPOTHESIS, x_mask=mask, y_radius=math.inf, tolerance=tolerance, threads=threads))
    if conclusion_times is None:
        conclusion_times = sorted(set(list(t_list) + [t / 100 for t in t_list]))
    concl = []
    for t in conclusion_times:
        s = math.sqrt(-t) if t < 0 else 1.0
        sl = sample_model(model, t, resolution, extent * s).scaled(1.0 / s)
        concl.append(
            scan_Z(sl, params, CONCLUSION, x_mask=np.ones(len(sl), dtype=bool), y_radius=math.inf, tolerance=tolerance, threads=threads)
        )
    return CorollaryReport(lam, n, hyp, pinch, concl)
