"""Command line interface: ``perturbatrix {check,trace,monodromy,limit}``.

Exit codes: 0 success, 1 bad input or usage, 2 hypothesis failure,
3 numerical failure.  ``PERTURBATRIX_THREADS`` caps compiled-kernel threads.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .curves import find_exceptional_angles, monodromy
from .errors import HypothesisError, InputError, NumericalError, PerturbatrixError
from .io_formats import (
    RunReport,
    csv_text,
    dumps,
    family_from_dict,
    load_json,
    parse_box,
    problem_from_dict,
    write_text,
)
from .limits import forbidden_region, mu_grid

TRACE_HEADER = ("theta_deg", "curve_id", "t", "re_lambda", "im_lambda", "end_class", "end_index")
MU_HEADER = ("re_gamma", "im_gamma", "mu", "lower_bound")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _apply_thread_cap():
    raw = os.environ.get("PERTURBATRIX_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError as exc:
        raise InputError(f"PERTURBATRIX_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise InputError("PERTURBATRIX_THREADS must be positive")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _angles(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad angle list {text!r}") from exc


def _emit(text: str, path: str | None, report: RunReport):
    if path:
        write_text(path, text, report)
    else:
        sys.stdout.write(text)


def _finish(report: RunReport, args) -> None:
    text = dumps(report.as_dict())
    if getattr(args, "report", None):
        with open(args.report, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif getattr(args, "out", None):
        sys.stdout.write(text)


def _gate(spec, report: RunReport, force: bool):
    hyp = spec.problem.hypotheses()
    report.hypotheses = hyp.as_dict()
    if not hyp.passed and not force:
        raise HypothesisError(f"hypotheses fail: {', '.join(hyp.failures)} (use --force to override)")
    return hyp


def cmd_check(args) -> int:
    spec = problem_from_dict(load_json(args.spec))
    report = RunReport("check")
    hyp = spec.problem.hypotheses()
    report.hypotheses = hyp.as_dict()
    if not hyp.passed:
        report.status = "hypothesis-failure"
        report.message = "failed: " + ", ".join(hyp.failures)
    text = dumps(report.as_dict())
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0 if hyp.passed else 2


def _ray_kwargs(spec, args) -> dict:
    kw = {}
    t_max = args.tmax if getattr(args, "tmax", None) is not None else spec.run.get("t_max")
    if t_max is not None:
        kw["t_max"] = float(t_max)
    if spec.run.get("t0") is not None:
        kw["t0"] = float(spec.run["t0"])
    return kw


def cmd_trace(args) -> int:
    spec = problem_from_dict(load_json(args.spec))
    report = RunReport("trace")
    _gate(spec, report, args.force)
    thetas = _angles(args.theta) if args.theta else [float(v) for v in spec.run.get("theta", [])]
    if not thetas:
        raise InputError("no angles given (--theta or run.theta)")
    kw = _ray_kwargs(spec, args)
    rows = []
    perms = []
    for deg in thetas:
        cs = monodromy(spec.problem, math.radians(deg), force=args.force, **kw)
        perms.append({"theta_deg": deg, "permutation": list(cs.permutation)})
        for r in range(cs.n):
            end = cs.end_class[r]
            for k in range(cs.t.size):
                z = cs.lam[k, r]
                rows.append((deg, r + 1, float(cs.t[k]), float(z.real), float(z.imag),
                             end.kind, int(cs.tau[r]) + 1))
    report.details = {"permutations": perms}
    _emit(csv_text(TRACE_HEADER, rows), args.out, report)
    _finish(report, args)
    return 0


def cmd_monodromy(args) -> int:
    spec = problem_from_dict(load_json(args.spec))
    report = RunReport("monodromy")
    _gate(spec, report, args.force)
    problem = spec.problem
    lo, hi = problem.sector.lower, problem.sector.upper
    n = args.theta_grid
    if n < 2:
        raise InputError("--theta-grid must be at least 2")
    kw = _ray_kwargs(spec, args)
    table = []
    lo_deg, hi_deg = math.degrees(lo), math.degrees(hi)
    for k in range(1, n):
        deg = lo_deg + (hi_deg - lo_deg) * k / n
        try:
            perm = list(monodromy(problem, math.radians(deg), force=args.force, **kw).permutation)
        except NumericalError as exc:
            perm = None
            report.message += f"theta {deg:.17g}: {exc}; "
        table.append({"theta_deg": deg, "permutation": perm})
    exc_angles = find_exceptional_angles(problem, resolution=math.radians(args.resolution),
                                         n_grid=n, force=args.force, **kw)
    brackets = []
    for br in exc_angles.brackets:
        brackets.append({
            "theta_lo_deg": math.degrees(br.theta_lo),
            "theta_hi_deg": math.degrees(br.theta_hi),
            "permutation_lo": list(br.tau_lo),
            "permutation_hi": list(br.tau_hi),
            "gamma_c": br.gamma_c,
            "lambda_c": br.lambda_c,
            "residual": br.residual,
            "converged": br.converged,
        })
    out = {"sector_deg": [lo_deg, hi_deg], "table": table, "brackets": brackets}
    _emit(dumps(out), args.out, report)
    _finish(report, args)
    return 0


def cmd_limit(args) -> int:
    fam = family_from_dict(load_json(args.spec))
    report = RunReport("limit")
    box = parse_box(args.grid) if args.grid else fam.box
    region = forbidden_region(fam.model, fam.epsilon, fam.r)
    if box is None:
        rad = region.disc_radius
        box = (-2.0 * rad, 2.0 * rad, rad / 20.0, 2.5 * rad, 41, 41)
    re_axis = np.linspace(box[0], box[1], box[4])
    im_axis = np.linspace(box[2], box[3], box[5])
    if im_axis[0] <= 0:
        raise InputError("grid must lie in the open upper half-plane")
    problem = fam.model.problem(fam.n)
    mu = mu_grid(problem, re_axis, im_axis)
    rows = []
    for j, y in enumerate(im_axis):
        for i, x in enumerate(re_axis):
            rows.append((float(x), float(y), float(mu[j, i]), float(y / fam.n)))
    g = re_axis[None, :] + 1j * im_axis[:, None]
    in_disc = region.in_disc(g)
    levels = []
    for lev in fam.levels:
        below = mu <= lev
        levels.append({"level": lev, "points_below": int(below.sum()),
                       "disc_inside_region": bool(np.all(below[in_disc]))})
    info = region.as_dict()
    info.update({
        "N": fam.n,
        "mass": fam.model.mass,
        "sup_norm": fam.model.sup,
        "divergent_endpoints": list(fam.model.divergence),
        "hausdorff_to_disc": region.hausdorff_to_disc(),
        "disc_violations": region.disc_violations(),
        "levels": levels,
        "lower_bound_violations": int(np.sum(mu < im_axis[:, None] / fam.n - 1e-12)),
    })
    os.makedirs(args.out, exist_ok=True)
    write_text(os.path.join(args.out, "mu_grid.csv"), csv_text(MU_HEADER, rows), report)
    write_text(os.path.join(args.out, "forbidden.json"), dumps(info), report)
    _finish(report, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="perturbatrix", description="Spectra of A + gamma B along rays in the coupling sector.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="hypothesis report")
    c.add_argument("spec")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)

    t = sub.add_parser("trace", help="per-ray eigenvalue curves as CSV")
    t.add_argument("spec")
    t.add_argument("--theta", help="comma-separated angles in degrees")
    t.add_argument("--tmax", type=float)
    t.add_argument("--out")
    t.add_argument("--report")
    t.add_argument("--force", action="store_true")
    t.set_defaults(func=cmd_trace)

    m = sub.add_parser("monodromy", help="permutation table and exceptional brackets as JSON")
    m.add_argument("spec")
    m.add_argument("--theta-grid", type=int, default=18)
    m.add_argument("--resolution", type=float, default=0.01, help="bracket width in degrees")
    m.add_argument("--tmax", type=float)
    m.add_argument("--out")
    m.add_argument("--report")
    m.add_argument("--force", action="store_true")
    m.set_defaults(func=cmd_monodromy)

    lim = sub.add_parser("limit", help="mu_N grid CSV and forbidden region JSON")
    lim.add_argument("spec")
    lim.add_argument("--grid", help="re0,re1,im0,im1[,nx[,ny]]")
    lim.add_argument("--out", default=".", help="output directory")
    lim.add_argument("--report")
    lim.set_defaults(func=cmd_limit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_thread_cap()
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"perturbatrix: error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"perturbatrix: input error: {exc}", file=sys.stderr)
        return 1
    except HypothesisError as exc:
        print(f"perturbatrix: hypothesis failure: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"perturbatrix: numerical failure: {exc}", file=sys.stderr)
        return 3
    except PerturbatrixError as exc:
        print(f"perturbatrix: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
