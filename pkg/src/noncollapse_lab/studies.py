"""Refinement studies against exact oracles, with fitted log-log orders."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .flow import FlowParams, evolve
from .models import ShrinkingSphere, ellipse, sample_model
from .noncollapse import NoncollapseParams, heat_defect_phi

DEFAULT_RESOLUTIONS = (64, 128, 256, 512, 1024)


@dataclass(frozen=True)
class StudyResult:
    name: str
    resolutions: tuple[int, ...]
    spacings: tuple[float, ...]
    errors: tuple[float, ...]
    values: tuple[float, ...]

    @property
    def slope(self) -> float:
        return fit_order(self.spacings, self.errors)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "h", "value", "error"])
            for row in zip(self.resolutions, self.spacings, self.values, self.errors):
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
            w.writerow(["# slope", repr(self.slope)])


def fit_order(spacings: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log error`` against ``log h``."""
    h = np.log(np.asarray(spacings, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(h, e, 1)[0])


def curvature_study(resolutions: Sequence[int] = DEFAULT_RESOLUTIONS, a: float = 2.0, b: float = 1.0) -> StudyResult:
    """Max curvature error of the discrete estimate on an ellipse.

    Circles cannot be used: three-point circumcircle curvature is exact on
    any sample of a circle.
    """
    hs, errs, vals = [], [], []
    for N in resolutions:
        sl = ellipse(a, b, N)
        exact = ellipse(a, b, N, exact=True)
        err = np.abs(sl.profile_curvature - exact.profile_curvature)
        hs.append(float(sl.edge_lengths().max()))
        errs.append(float(err.max()))
        vals.append(float(sl.profile_curvature.max()))
    return StudyResult("curvature", tuple(resolutions), tuple(hs), tuple(errs), tuple(vals))


def radius_law_study(
    resolutions: Sequence[int] = DEFAULT_RESOLUTIONS, cfl: float = 0.25, elapsed: float = 0.25, radius: float = 1.0
) -> StudyResult:
    """Terminal radius of an evolved circle against ``sqrt(rho0^2 - 2 t)``, with ``dt = cfl h^2``."""
    model = ShrinkingSphere(math.sqrt(radius**2 - 2 * elapsed), 1)
    exact = math.sqrt(radius**2 - 2 * elapsed)
    hs, errs, vals = [], [], []
    for N in resolutions:
        sl = sample_model(model, -elapsed, N)
        h = float(sl.edge_lengths().max())
        flow = evolve(sl, FlowParams(t_start=-elapsed, t_end=0.0, dt=cfl * h * h, store_every=10**9))
        rho = float(np.linalg.norm(flow.slices[-1].points, axis=1).mean())
        hs.append(h)
        errs.append(abs(rho - exact))
        vals.append(rho)
    return StudyResult("radius-law", tuple(resolutions), tuple(hs), tuple(errs), tuple(vals))


def heat_defect_study(
    resolutions: Sequence[int] = DEFAULT_RESOLUTIONS,
    lam: float = 1.0,
    cfl: float = 0.25,
    elapsed: float = 0.01,
    a: float = 1.5,
    b: float = 1.0,
) -> StudyResult:
    """Max deviation of the discrete heat defect of the cutoff from its exact constant.

    An ellipse is evolved from ``t = -1`` for ``elapsed`` with ``dt = cfl h^2``;
    the defect is measured on the last pair of slices.
    """
    params = NoncollapseParams(lam, 2.0, 1.0, 1)
    target = params.heat_constant()
    hs, errs, vals = [], [], []
    for N in resolutions:
        sl = ellipse(a, b, N, t=-1.0)
        h = float(sl.edge_lengths().max())
        dt = cfl * h * h
        t_end = -1.0 + elapsed
        flow = evolve(sl, FlowParams(t_start=-1.0, t_end=t_end, dt=dt, store_every=1))
        # the clamped final step may be very short; use the pair before it
        rep = heat_defect_phi(flow, len(flow.slices) - 3, params)
        hs.append(h)
        errs.append(float(np.max(np.abs(rep.defects - target))))
        vals.append(rep.mean)
    return StudyResult("heat-defect", tuple(resolutions), tuple(hs), tuple(errs), tuple(vals))


STUDIES = {
    "curvature": curvature_study,
    "radius-law": radius_law_study,
    "heat-defect": heat_defect_study,
}
