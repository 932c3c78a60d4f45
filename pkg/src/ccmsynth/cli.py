"""Command-line front end: ``ccmsynth synth`` and ``ccmsynth analyze``.

Set ``CCMSYNTH_THREADS`` to cap the BLAS/OpenMP thread pools; it has to be
applied before numpy loads, hence the early environment handling below.
"""

import os

_threads = os.environ.get("CCMSYNTH_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import csv  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
import time  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .design import read_design, write_design  # noqa: E402
from .errors import CCMError, InvalidArgument, SpecError  # noqa: E402
from .fsd import length_deviation, write_path  # noqa: E402
from .optimizer import SearchConfig, build_continuum, evaluate_candidate, hill_climb  # noqa: E402
from .problem import Problem, format_spec, load_spec  # noqa: E402
from .smoothing import make_continuum  # noqa: E402
from .svg import deformation_svg, paths_svg, topology_svg  # noqa: E402

logger = logging.getLogger("ccmsynth")

STAGES = (("A", 1 / 3), ("B", 2 / 3), ("C", 1.0))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccmsynth", description="Synthesize and analyze contact-aided compliant mechanisms.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("spec", help="problem specification file")
        sp.add_argument("--out-dir", default="ccm_out", help="artifact directory (default: ccm_out)")
        sp.add_argument("--mesh-scale", type=int, default=1, help="refine the honeycomb k times per direction")
        sp.add_argument("--gauss-points", type=int, choices=(1, 3, 7, 25), help="points per fan triangle")
        sp.add_argument("--beta", type=int, help="boundary smoothing steps")
        sp.add_argument("-v", "--verbose", action="count", default=0)

    s = sub.add_parser("synth", help="run the hill-climbing synthesis")
    common(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--max-evals", type=int)
    s.add_argument("--dry-run", action="store_true", help="validate the spec file and draw the initial guess only")

    a = sub.add_parser("analyze", help="analyze one design with full diagnostics")
    common(a)
    a.add_argument("design", help="design file (mask lines 'x y r s f' and a final 'F value')")
    return p


def _effective_spec(args):
    spec = load_spec(args.spec)
    if args.mesh_scale != 1:
        spec = spec.scaled_mesh(args.mesh_scale)
    analysis = {}
    if args.gauss_points is not None:
        analysis["gauss_points"] = args.gauss_points
    if args.beta is not None:
        analysis["beta"] = args.beta
    search = {}
    if getattr(args, "seed", None) is not None:
        search["seed"] = args.seed
    if getattr(args, "max_evals", None) is not None:
        search["max_evals"] = args.max_evals
    return spec.with_overrides(analysis=analysis, search=search)


def _write_contact_report(path, ev) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "slave_point", "mode", "gap", "lambda"])
        if ev.solution is not None:
            for step, slave, mode, gap, lam in ev.solution.contact_rows:
                w.writerow([step, slave, mode, repr(gap), repr(lam)])


def _summary(ev, problem) -> dict:
    out = {
        "feasible": ev.feasible,
        "reason": ev.reason,
        "objective": ev.objective,
        "volume_fraction": ev.volume_fraction,
        "seconds": ev.seconds,
    }
    if ev.breakdown is not None:
        b = ev.breakdown
        out.update(A_err=b.A_err, B_err=b.B_err, L_err=b.L_err, theta_err=b.theta_err, volume_penalty=b.penalty)
    if ev.path is not None:
        L = float(np.linalg.norm(np.diff(ev.path, axis=0), axis=1).sum())
        out["path_length"] = L
        out["length_deviation_percent"] = length_deviation(problem.specified.L, L)
    if ev.solution is not None:
        out["newton_iterations"] = ev.solution.iterations
        out["max_active_contact_pairs"] = ev.solution.max_active
        out["contact_modes"] = sorted(ev.solution.active_modes)
    return out


def _write_artifacts(out: Path, ev, problem) -> None:
    """Path, topology, deformation stages and contact report for one evaluation."""
    path = ev.path if ev.path is not None else np.empty((0, 2))
    write_path(out / "path_actual.csv", path)
    write_design(ev.design, out / "design_evaluated.txt")
    _write_contact_report(out / "contact_report.csv", ev)
    cont = ev.continuum
    if cont is None:
        cont = make_continuum(problem.mesh, np.ones(problem.mesh.n_cells, bool))
    spec_pts = None
    if ev.path is not None:
        spec_pts = problem.specified_points - problem.specified_points[0] + ev.path[0]
    topology_svg(out / "topology.svg", cont, ev.design.masks, problem.direction, ev.design.force,
                 actual=ev.path, specified=spec_pts)
    if ev.solution is not None:
        hist = ev.solution.history
        n = len(hist) - 1
        for tag, frac in STAGES:
            k = max(1, int(round(frac * n)))
            deformation_svg(out / f"deformation_{tag}.svg", cont, cont.active_nodes, hist[k],
                            label=f"stage {tag}: load step {k}/{n}")
    (out / "summary.json").write_text(json.dumps(_summary(ev, problem), indent=1))


def _synth(args, out: Path) -> int:
    spec = _effective_spec(args)
    problem = Problem.from_spec(spec)
    v0 = problem.initial_design()
    if args.dry_run:
        try:
            cont = build_continuum(v0, problem)
        except CCMError as exc:
            logger.warning("initial guess does not build a continuum (%s); drawing the parent mesh", exc)
            cont = make_continuum(problem.mesh, np.ones(problem.mesh.n_cells, bool))
        topology_svg(out / "topology.svg", cont, v0.masks, problem.direction, v0.force)
        return 0
    (out / "effective.spec").write_text(format_spec(spec))
    cfg = SearchConfig.from_problem(problem)
    t0 = time.perf_counter()

    def progress(it, ev):
        if it % 25 == 0 or ev.objective < progress.best:
            logger.info("eval %d: %s objective %.6g (%.2fs)", it, ev.reason, ev.objective, ev.seconds)
        progress.best = min(progress.best, ev.objective)

    progress.best = np.inf
    result = hill_climb(v0, problem, cfg, checkpoint=out / "checkpoint.json", callback=progress)
    result.trace.write_csv(out / "convergence.csv")
    write_design(result.best, out / "best_design.txt")
    best = result.best_eval
    _write_artifacts(out, best, problem)
    summary = json.loads((out / "summary.json").read_text())
    summary.update(evaluations=len(result.trace.records), wall_seconds=time.perf_counter() - t0)
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    logger.info("best objective %.6g after %d evaluations", best.objective, len(result.trace.records))
    return 0


def _analyze(args, out: Path) -> int:
    base_spec = load_spec(args.spec)
    spec = _effective_spec(args)
    design = read_design(args.design)
    problem = Problem.from_spec(spec)
    (out / "effective.spec").write_text(format_spec(spec))
    ev = evaluate_candidate(design, problem, spec.search.penalty)
    _write_artifacts(out, ev, problem)
    logger.info("objective %.10g (%s) in %.2fs", ev.objective, ev.reason, ev.seconds)
    if spec.domain != base_spec.domain or spec.analysis != base_spec.analysis:
        base_problem = Problem.from_spec(base_spec)
        base = evaluate_candidate(design, base_problem, spec.search.penalty)
        _write_comparison(out / "comparison.csv", base, ev, base_spec, spec)
        curves = {label: e.path - e.path[0] for label, e in (("base", base), ("variant", ev)) if e.path is not None}
        paths_svg(out / "comparison.svg", curves)
    return 0


def _write_comparison(path, base, variant, base_spec, spec) -> None:
    """Per-load-step output positions of the spec file's own analysis against the overridden one."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "base_x", "base_y", "variant_x", "variant_y", "distance"])
        if base.path is not None and variant.path is not None and len(base.path) == len(variant.path):
            # align start points: refinement moves the nearest node slightly
            b = base.path - base.path[0]
            v = variant.path - variant.path[0]
            for k, (p, q) in enumerate(zip(b, v)):
                w.writerow([k, repr(p[0]), repr(p[1]), repr(q[0]), repr(q[1]), repr(float(np.linalg.norm(p - q)))])
        w.writerow([])
        w.writerow(["label", "cells", "gauss_points", "objective", "path_length", "seconds"])
        for label, ev, s in (("base", base, base_spec), ("variant", variant, spec)):
            L = "" if ev.path is None else repr(float(np.linalg.norm(np.diff(ev.path, axis=0), axis=1).sum()))
            w.writerow([label, s.domain.nx * s.domain.ny, s.analysis.gauss_points, repr(ev.objective), L,
                        f"{ev.seconds:.3f}"])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc.strerror}", file=sys.stderr)
        return 1
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    try:
        if args.command == "synth":
            return _synth(args, out)
        return _analyze(args, out)
    except (SpecError, InvalidArgument, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        failed.write_text(f"{type(exc).__name__}: {exc}\n")
        return 2
    except Exception as exc:  # leave a marker for any partial run
        failed.write_text(f"{type(exc).__name__}: {exc}\n")
        raise


if __name__ == "__main__":
    sys.exit(main())
