"""Command-line harness: scenarios, convergence studies, model listing, slice dumps.

Exit status: 0 all checks pass, 1 a check found a violation, 2 hypotheses of
a requested theorem/corollary not satisfied, 3 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import noncollapse as nc
from .flow import SEMI_IMPLICIT, DiscreteFlow, FlowError, FlowParams, evolve, write_flow
from .geometry import GeometryError, Slice, read_slice, write_slice
from .models import (
    MODEL_KINDS,
    GrimReaper,
    ModelError,
    ShrinkingCylinder,
    ShrinkingSphere,
    ellipse,
    exact_alpha,
    make_model,
    sample_model,
)
from .studies import DEFAULT_RESOLUTIONS, STUDIES

logger = logging.getLogger("noncollapse_lab")

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_HYPOTHESIS = 2
EXIT_CONFIG = 3

CHECKS = ("theorem", "lemma21", "lemma22", "lemma23", "lemma24-scan", "alpha", "corollary")
FLOW_CHECKS = {"theorem", "lemma22", "lemma23", "lemma24-scan"}
PASS, VIOLATION, HYPOTHESIS = "pass", "violation", "hypotheses not satisfied"
REQUIRED_ORDER = 1.8


class ConfigError(Exception):
    pass


@dataclass
class Scenario:
    name: str
    surface: dict
    flow: FlowParams | None
    lam: float | str
    R: float
    r: float
    n: int
    checks: tuple[str, ...]
    corollary: dict = field(default_factory=dict)
    output: Path | None = None
    save_flow: bool = False


def _float(section, key, default=None):
    raw = section.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"[{section.name}] missing key {key!r}")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a number") from None


def _floats(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"bad number list {raw!r}") from None


def load_scenario(path: str | Path) -> Scenario:
    """Parse an INI-style scenario file (sections surface, flow, noncollapse, checks, output)."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # R and r are distinct keys
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    for sec in ("surface", "noncollapse", "checks"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")
    name = cp.get("scenario", "name", fallback=path.stem) if cp.has_section("scenario") else path.stem
    surface = dict(cp["surface"])
    if "model" not in surface and "file" not in surface:
        raise ConfigError("[surface] needs model or file")
    if "file" in surface:
        f = (path.parent / surface["file"]).resolve()
        if not f.exists():
            raise ConfigError(f"slice file {f} does not exist")
        surface["file"] = str(f)

    flow = None
    if cp.has_section("flow") and cp["flow"].getboolean("enabled", fallback=True):
        fs = cp["flow"]
        scheme = fs.get("scheme", SEMI_IMPLICIT).replace("-", "_")
        try:
            flow = FlowParams(
                t_start=_float(fs, "t_start", -1.0),
                t_end=_float(fs, "t_end", 0.0),
                scheme=scheme,
                dt=_float(fs, "dt") if "dt" in fs else (None if "cfl" in fs else 1e-4),
                cfl=_float(fs, "cfl") if "cfl" in fs else None,
                resample_threshold=_float(fs, "resample_threshold", 4.0),
                store_every=fs.getint("store_every", fallback=1),
                keep_successor=fs.getboolean("keep_successor", fallback=True),
            )
        except ValueError as exc:
            raise ConfigError(f"[flow] {exc}") from None

    ns = cp["noncollapse"]
    lam_raw = ns.get("lambda", "auto").strip()
    lam: float | str = lam_raw if lam_raw == "auto" else _float(ns, "lambda")
    n = ns.getint("n", fallback=int(surface.get("n", 2 if surface.get("model") in ("sphere", "cylinder", "bowl", "plane") else 1)))
    r = _float(ns, "r", 1.0)
    R = _float(ns, "R", math.sqrt(1 + 3 * n) * r)

    raw_checks = cp["checks"].get("checks", "").replace(",", " ").split()
    checks = CHECKS if raw_checks == ["all"] else tuple(raw_checks)
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise ConfigError(f"unknown checks {bad}; valid: {', '.join(CHECKS)}")
    if flow is None and FLOW_CHECKS & set(checks):
        raise ConfigError(f"checks {sorted(FLOW_CHECKS & set(checks))} need a [flow] phase")
    if lam == "auto" and flow is None:
        raise ConfigError("lambda = auto needs a [flow] phase")
    corollary = {}
    if "corollary" in checks:
        cs = cp["checks"]
        corollary["times"] = _floats(cs.get("corollary_times", "-1, -4, -16"))
        corollary["lambda"] = _float(cs, "corollary_lambda", lam if isinstance(lam, float) else 1.0)
        corollary["resolution"] = cs.getint("corollary_resolution", fallback=256)
    out, save_flow = None, False
    if cp.has_section("output"):
        if "dir" in cp["output"]:
            out = Path(cp["output"]["dir"])
        save_flow = cp["output"].getboolean("save_flow", fallback=False)
    return Scenario(name, surface, flow, lam, R, r, n, checks, corollary, out, save_flow)


_MODEL_PARAMS = {
    "sphere": {"R0": float, "n": int},
    "cylinder": {"R0": float, "n": int, "k": int},
    "reaper": {},
    "bowl": {"n": int},
    "plane": {"n": int},
}


def model_from_surface(surface: dict):
    kind = surface["model"]
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model {kind!r}")
    keys = _MODEL_PARAMS[kind]
    try:
        params = {k: conv(surface[k]) for k, conv in keys.items() if k in surface}
        return make_model(kind, **params)
    except (ModelError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters: {exc}") from None


def initial_slice(sc: Scenario) -> Slice:
    s = sc.surface
    t0 = float(s.get("time", sc.flow.t_start if sc.flow is not None else 0.0))
    if "file" in s:
        return read_slice(s["file"])
    N = int(s.get("resolution", 512))
    if s["model"] == "ellipse":
        a, b = float(s.get("a", 2.0)), float(s.get("b", 1.0))
        center = (float(s.get("center_x", 0.0)), float(s.get("center_y", 0.0)))
        return ellipse(a, b, N, center=center, t=t0)
    model = model_from_surface(s)
    return sample_model(model, t0, N, float(s.get("extent", 3.0)))


# ---------------------------------------------------------------------------
# check runners: each returns (status, summary lines)


@dataclass
class CheckResult:
    name: str
    status: str
    lines: list[str]


def _step_pairs(flow: DiscreteFlow) -> list[int]:
    """Pairs of consecutive time steps (not the short clamped last step)."""
    out = []
    for m in flow.pair_indices():
        if flow.steps and flow.steps[m + 1] - flow.steps[m] != 1:
            continue
        out.append(m)
    if not out:
        return out
    dts = np.array([flow.times[m + 1] - flow.times[m] for m in out])
    return [m for m, d in zip(out, dts) if d >= 0.5 * dts.max()]


def _write_dat(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) if not isinstance(v, (int, np.integer)) else str(v) for v in row) + "\n")


def _zscan_summary(label: str, reps: Sequence[nc.ZScanReport]) -> str:
    judged = [r for r in reps if not r.vacuous]
    if not judged:
        return f"{label}: vacuous at all {len(reps)} times"
    worst = min(judged, key=lambda r: r.min_Z)
    viol = sum(r.violations for r in reps)
    return (
        f"{label}: {len(judged)} of {len(reps)} times non-vacuous, min_Z={worst.min_Z:.6g} at t={worst.time:.6g}, "
        f"violations={viol}, pairs={sum(r.pair_count for r in reps)}"
    )


def run_theorem(flow, params, out: Path, tol, threads) -> CheckResult:
    rep = nc.check_theorem(flow, params, tol, threads)
    h = rep.hypothesis
    lines = [f"hypotheses: {'pass' if h.passed else 'FAIL'} (pinching failures {h.pinching_failures}, lower-bound failures {h.lower_bound_failures})"]
    if h.initial_scan is not None:
        lines.append(f"initial two-point condition: min_Z={h.initial_scan.min_Z:.6g} violations={h.initial_scan.violations}")
    lines += h.messages[:10]
    if rep.conclusion is None:
        lines.append("conclusion not judged")
        return CheckResult("theorem", HYPOTHESIS, lines)
    nc.write_zscan_csv(rep.conclusion, out / "theorem_conclusion.csv")
    _write_dat(out / "theorem_conclusion.dat", ["t", "min_Z", "violations"], [(r.time, r.min_Z, r.violations) for r in rep.conclusion])
    lines.append(_zscan_summary("conclusion", rep.conclusion))
    return CheckResult("theorem", PASS if rep.conclusion_passed else VIOLATION, lines)


def run_lemma21(flow, params, out: Path, tol) -> CheckResult:
    reps = [nc.check_lemma_aux(s, params, tol) for s in flow.slices if -1 - 1e-9 <= s.time <= 1e-9]
    with open(out / "lemma21.csv", "w") as fh:
        fh.write("t,samples,min,max,mean,hypothesis_failures,passed\n")
        for r in reps:
            fh.write(f"{r.time!r},{r.count},{r.min!r},{r.max!r},{r.mean!r},{r.hypothesis_failures},{int(r.passed)}\n")
    fails = sum(not r.passed for r in reps)
    hyp = sum(r.hypothesis_failures for r in reps)
    lines = [f"{len(reps)} slices, {fails} failing, {hyp} samples with |A| > Lambda H (not judged)"]
    return CheckResult("lemma21", PASS if fails == 0 else VIOLATION, lines)


def _pair_reports(fn, flow, params, tol, label, out: Path, key: str) -> tuple[list, list[str]]:
    pairs = _step_pairs(flow)
    if not pairs:
        raise ConfigError(f"{label} needs consecutive time steps in the stored flow")
    reps = [fn(flow, m, params, tol) for m in pairs]
    with open(out / f"{label}.csv", "w") as fh:
        fh.write(f"t,samples,min,max,mean,{key},passed\n")
        for r in reps:
            fh.write(f"{r.time!r},{r.count},{r.min!r},{r.max!r},{r.mean!r},{r.extra.get(key, math.nan)!r},{int(r.passed)}\n")
    worst = min(reps, key=lambda r: r.extra.get("min_margin", -r.extra.get("max_rel_error", 0.0)))
    worst.to_csv(out / f"{label}_samples.csv")
    return reps, [worst.summary()]


def run_lemma22(flow, params, out, tol) -> CheckResult:
    reps, lines = _pair_reports(nc.heat_defect_phi, flow, params, tol, "lemma22", out, "max_rel_error")
    lines.insert(0, f"target {params.heat_constant():.6g}, {len(reps)} step pairs")
    return CheckResult("lemma22", PASS if all(r.passed for r in reps) else VIOLATION, lines)


def run_lemma23(flow, params, out, tol) -> CheckResult:
    try:
        reps, lines = _pair_reports(nc.supersolution_defect_Phi, flow, params, tol, "lemma23", out, "min_margin")
    except nc.InconsistencyError as exc:
        return CheckResult("lemma23", VIOLATION, [f"internal inconsistency: {exc}"])
    judged = [r for r in reps if not r.vacuous]
    margin = min((r.extra["min_margin"] for r in judged), default=math.nan)
    strict = all(r.extra["strict"] for r in judged)
    lines.insert(0, f"{len(reps)} step pairs, min normalised margin {margin:.6g}, strictly positive: {strict}")
    return CheckResult("lemma23", PASS if all(r.passed for r in reps) else VIOLATION, lines)


def run_lemma24(flow, params, out, tol, threads) -> CheckResult:
    hyp = nc.check_hypotheses(flow, params, tol, threads)
    reps = nc.lemma_scans(flow, params, tol, threads)
    nc.write_zscan_csv(reps, out / "lemma24_scan.csv")
    _write_dat(out / "lemma24_scan.dat", ["t", "min_Z", "violations"], [(r.time, r.min_Z, r.violations) for r in reps])
    viol = sum(r.violations for r in reps)
    lines = [_zscan_summary("Phi-form scan", reps)]
    if not hyp.passed:
        lines.append("hypotheses fail; scan not judged")
        return CheckResult("lemma24-scan", HYPOTHESIS, lines)
    return CheckResult("lemma24-scan", PASS if viol == 0 else VIOLATION, lines)


def run_alpha(sc: Scenario, slice_: Slice, out: Path) -> CheckResult:
    interior = slice_.interior_mask()
    idx = np.flatnonzero(interior & (slice_.mean_curvature > 0))
    alphas = nc.inscribed_alphas(slice_, idx)
    height = slice_.points[idx, 1] - slice_.points[:, 1].min()
    with open(out / "alpha.csv", "w") as fh:
        fh.write("sample,height,alpha\n")
        for i, hgt, a in zip(idx, height, alphas):
            fh.write(f"{int(i)},{float(hgt)!r},{float(a)!r}\n")
    _write_dat(out / "alpha.dat", ["height", "alpha"], zip(height, alphas))
    lines = [f"{len(idx)} samples, alpha in [{alphas.min():.6g}, {alphas.max():.6g}]"]
    model = model_from_surface(sc.surface) if "model" in sc.surface and sc.surface["model"] in MODEL_KINDS else None
    ok = True
    if isinstance(model, GrimReaper):
        bound = 1.1 * (math.pi / 2) * np.exp(-height)
        ok = bool(np.all(alphas <= bound))
        lines.append(f"reaper bound alpha <= 1.1 (pi/2) exp(-height): {'pass' if ok else 'FAIL'}")
    elif model is not None:
        exact = exact_alpha(model)
        if exact is not None and math.isfinite(exact):
            err = float(np.max(np.abs(alphas - exact)))
            ok = err <= 1e-2
            lines.append(f"exact alpha {exact:g}, max error {err:.3g}")
    return CheckResult("alpha", PASS if ok else VIOLATION, lines)


def run_corollary(sc: Scenario, out: Path, tol, threads) -> CheckResult:
    model = model_from_surface(sc.surface) if sc.surface.get("model") in MODEL_KINDS else None
    if not isinstance(model, (ShrinkingSphere, ShrinkingCylinder)):
        raise ConfigError("corollary check needs a sphere or cylinder model")
    co = sc.corollary
    rep = nc.check_corollary_ancient(model, co["times"], co["lambda"], co["resolution"], tolerance=tol, threads=threads)
    nc.write_zscan_csv(rep.hypothesis, out / "corollary_hypothesis.csv")
    nc.write_zscan_csv(rep.conclusion, out / "corollary_conclusion.csv")
    lines = [f"Lambda={co['lambda']:g}"]
    for r, p in zip(rep.hypothesis, rep.pinching_failures):
        lines.append(f"  hypothesis at t_j (rescaled): min_Z={r.min_Z:.6g} violations={r.violations} pinching_failures={p}")
    lines.append("  " + _zscan_summary("conclusion", rep.conclusion))
    if not rep.hypothesis_passed:
        return CheckResult("corollary", HYPOTHESIS, lines)
    return CheckResult("corollary", PASS if rep.conclusion_passed else VIOLATION, lines)


def run_scenario(sc: Scenario, out: Path, tolerance_scale: float = 1.0, threads: int = 1) -> tuple[int, list[CheckResult], list[str]]:
    out.mkdir(parents=True, exist_ok=True)
    header = [f"scenario {sc.name}"]
    try:
        params = nc.NoncollapseParams(sc.lam if isinstance(sc.lam, float) else 1.0, sc.R, sc.r, sc.n)
    except nc.HypothesisError as exc:
        return EXIT_HYPOTHESIS, [], header + [f"hypotheses not satisfied: {exc}"]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    first = initial_slice(sc)
    flow = None
    if sc.flow is not None:
        flow = evolve(first, sc.flow)
        if sc.save_flow:
            write_flow(flow, out / "flow")
        header.append(f"flow: {len(flow)} stored slices on [{flow.times[0]:.6g}, {flow.times[-1]:.6g}], status {flow.status}")
        if sc.r != 1.0:
            flow = flow.scaled(1.0 / sc.r)
        params = params.normalized()
        if sc.lam == "auto":
            params = params.with_lambda(nc.auto_lambda(flow, params.R))
        header.append(f"Lambda = {params.lam!r}")
    results = []
    ztol = nc.ZSCAN_TOLERANCE * tolerance_scale
    for check in sc.checks:
        if check == "theorem":
            results.append(run_theorem(flow, params, out, ztol, threads))
        elif check == "lemma21":
            slices_flow = flow if flow is not None else DiscreteFlow((first.time,), (first,))
            results.append(run_lemma21(slices_flow, params, out, nc.ALGEBRAIC_TOLERANCE * tolerance_scale))
        elif check == "lemma22":
            results.append(run_lemma22(flow, params, out, nc.DISCRETE_TOLERANCE * tolerance_scale))
        elif check == "lemma23":
            results.append(run_lemma23(flow, params, out, nc.DISCRETE_TOLERANCE * tolerance_scale))
        elif check == "lemma24-scan":
            results.append(run_lemma24(flow, params, out, ztol, threads))
        elif check == "alpha":
            results.append(run_alpha(sc, first, out))
        elif check == "corollary":
            results.append(run_corollary(sc, out, ztol, threads))
    statuses = {r.status for r in results}
    code = EXIT_VIOLATION if VIOLATION in statuses else EXIT_HYPOTHESIS if HYPOTHESIS in statuses else EXIT_PASS
    return code, results, header


def _summary_text(header, results, code) -> str:
    lines = list(header)
    for r in results:
        lines.append(f"[{r.name}] {r.status}")
        lines += ["  " + line for line in r.lines]
    lines.append(f"exit status {code}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    out = Path(args.output_dir) / sc.name if args.output_dir else (sc.output or Path("output") / sc.name)
    code, results, header = run_scenario(sc, out, args.tolerance_scale, args.threads)
    text = _summary_text(header, results, code)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return code


def cmd_convergence(args) -> int:
    if args.study not in STUDIES:
        raise ConfigError(f"unknown study {args.study!r}; valid: {', '.join(STUDIES)}")
    res = tuple(int(v) for v in args.resolutions.split(",")) if args.resolutions else DEFAULT_RESOLUTIONS
    result = STUDIES[args.study](res)
    out = Path(args.output_dir or "output")
    out.mkdir(parents=True, exist_ok=True)
    result.to_csv(out / f"convergence_{args.study}.csv")
    for N, h, v, e in zip(result.resolutions, result.spacings, result.values, result.errors):
        print(f"N={N} h={h:.6g} value={v:.8g} error={e:.6g}")
    print(f"slope {result.slope:.4f} (required >= {REQUIRED_ORDER})")
    return EXIT_PASS if result.slope >= REQUIRED_ORDER else EXIT_VIOLATION


def cmd_models(args) -> int:
    for kind, cls in MODEL_KINDS.items():
        defaults = ", ".join(f"{f.name}={f.default}" for f in dataclasses.fields(cls))
        alpha = exact_alpha(cls())
        print(f"{kind}: {defaults or 'no parameters'}; exact alpha {'numerical' if alpha is None else alpha}")
    print("ellipse: a, b, center_x, center_y (initial data only)")
    return EXIT_PASS


def parse_model_arg(arg: str):
    kind, _, rest = arg.partition(":")
    surface = {"model": kind}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"bad model parameter {item!r}")
        surface[key.strip()] = value.strip()
    return surface


def cmd_slice(args) -> int:
    surface = parse_model_arg(args.model)
    extent = float(surface.pop("extent", 3.0))
    if surface["model"] == "ellipse":
        sl = ellipse(float(surface.get("a", 2.0)), float(surface.get("b", 1.0)), args.N, t=args.t)
    else:
        try:
            sl = sample_model(model_from_surface(surface), args.t, args.N, extent)
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_slice(sl, out / f"{surface['model']}_t{args.t:g}_N{args.N}.txt")
    else:
        sys.stdout.write(write_slice(sl))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noncollapse-lab", description=__doc__.splitlines()[0])
    p.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every check tolerance")
    p.add_argument("--threads", type=int, default=1, help="worker threads for two-point scans")
    p.add_argument("--output-dir", default=None, help="directory for CSV, summary and plot data")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a scenario file")
    r.add_argument("scenario")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("convergence", help="refinement study with fitted order")
    c.add_argument("study", choices=sorted(STUDIES))
    c.add_argument("--resolutions", default=None, help="comma-separated N values")
    c.set_defaults(func=cmd_convergence)
    m = sub.add_parser("models", help="model solutions")
    m.add_argument("action", choices=["list"])
    m.set_defaults(func=cmd_models)
    s = sub.add_parser("slice", help="slice utilities")
    s.add_argument("action", choices=["dump"])
    s.add_argument("model", help="kind[:key=value,...], e.g. sphere:R0=1,n=2")
    s.add_argument("t", type=float)
    s.add_argument("N", type=int)
    s.set_defaults(func=cmd_slice)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, GeometryError, FlowError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
