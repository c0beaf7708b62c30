"""Numerical verification harness for localized two-point noncollapsing estimates in mean curvature flow."""

from __future__ import annotations

from .geometry import GeometryError, Slice, SurfaceSample, curvature_polyline, curvature_revolution
from .flow import DiscreteFlow, FlowError, FlowParams, evolve
from .models import make_model, sample_model
from .noncollapse import HypothesisError, NoncollapseParams, check_theorem, scan_Z

__all__ = [
    "GeometryError",
    "Slice",
    "SurfaceSample",
    "curvature_polyline",
    "curvature_revolution",
    "DiscreteFlow",
    "FlowError",
    "FlowParams",
    "evolve",
    "make_model",
    "sample_model",
    "HypothesisError",
    "NoncollapseParams",
    "check_theorem",
    "scan_Z",
]
