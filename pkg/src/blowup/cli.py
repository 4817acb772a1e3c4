"""Command-line interface: ``blowup <command> [flags]``.

Exit status is 0 on success, 2 if any diagnosis in the run is inconclusive
(or a quadrature fails to converge), and 1 on input or usage errors.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import analysis, cgw
from .expr import DomainError, ExprError
from .fields import (
    IncompatibleSamplesError, ScalarField, mcshane_extend, parse_domain,
    read_samples_csv,
)
from .quad import (
    INCONCLUSIVE, ExcisionFamily, QuadratureError, bbm_estimate, diagnose,
    excision_series,
)
from .report import (
    RunConfig, diagnosis_lines, emit, fmt, header_lines, read_series_csv,
    series_csv_lines,
)

__all__ = ["run", "main", "build_parser"]

COMMANDS = ("integrate", "diagnose", "critical-p", "sobolev", "rays", "lemma21",
            "ode-unique", "lemma22", "bbm", "cgw", "extend")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _point(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated point: {text!r}")


def _floats(text):
    return _point(text)


def build_parser():
    parser = _Parser(prog="blowup", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    common = _Parser(add_help=False)
    common.add_argument("--f", help="expression in x1..xn, e.g. 'norm()^2'")
    common.add_argument("--n", type=int, help="dimension")
    common.add_argument("--domain", help="box:lo1,..:hi1,.. or ball:c1,..:r")
    common.add_argument("--p", type=float, help="exponent")
    common.add_argument("--eps", type=float, default=1e-2, help="largest excision level")
    common.add_argument("--levels", type=int, default=5, help="number of excision levels")
    common.add_argument("--ratio", type=float, default=0.1, help="ratio between levels")
    common.add_argument("--a", type=_point, help="base point for sobolev")
    common.add_argument("--center", type=_point, help="center point (rays, ode-unique, lemma22)")
    common.add_argument("--rays", type=int, default=64, help="number of ray directions")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--tol", type=float, help="tolerance (bisection width, zero test)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "report"), default="csv")
    common.add_argument("--rtol", type=float, help="relative quadrature tolerance")
    common.add_argument("--zero-tol", type=float, default=1e-300, dest="zero_tol")
    extra = {
        "critical-p": [("--lo", float, None), ("--hi", float, None)],
        "cgw": [("--R", float, 1.0), ("--A", float, None), ("--B", float, None),
                ("--points", int, 2001)],
        "diagnose": [("--input", str, None)],
        "extend": [("--input", str, None), ("--L", float, None), ("--grid", int, 11)],
        "ode-unique": [("--h", float, 1e-3), ("--horizon", float, 1.0)],
        "lemma22": [("--h", _floats, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])],
        "bbm": [("--h", _floats, [2.0**-k for k in range(3, 8)]),
                ("--strata", int, 64)],
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        for flag, typ, default in extra.get(name, []):
            sp.add_argument(flag, type=typ, default=default, dest=flag.lstrip("-"))
    return parser


# Helpers ------------------------------------------------------------------------------

def _require(args, *names):
    missing = [f"--{k}" for k in names if getattr(args, k) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required flag(s) {', '.join(missing)}")


def _family(args):
    return ExcisionFamily(args.eps, args.ratio, args.levels)


def _field(args, n=None):
    _require(args, "f")
    n = args.n if n is None else n
    if n is None:
        raise UsageError(f"{args.command}: missing required flag --n")
    return ScalarField.from_source(args.f, n)


def _domain(args, n):
    _require(args, "domain")
    dom = parse_domain(args.domain)
    if dom.n != n:
        raise ValueError(f"domain has dimension {dom.n}, expected {n}")
    return dom


def _rtol(args, default):
    return default if args.rtol is None else args.rtol


def _config(args):
    known = {"command", "f", "n", "domain", "p", "eps", "levels", "ratio", "seed",
             "format", "out"}
    extra = {k: v for k, v in sorted(vars(args).items()) if k not in known}
    return RunConfig(args.command, args.f, args.n, args.domain, args.p, args.eps,
                     args.levels, args.ratio, args.seed, args.format, args.out, extra)


# Commands -----------------------------------------------------------------------------
# Each returns (csv_lines, report_lines, inconclusive).

def _cmd_integrate(args):
    _require(args, "p")
    f = _field(args)
    dom = _domain(args, f.n)
    s = excision_series(f, dom, args.p, _family(args), rtol=_rtol(args, 1e-5),
                        zero_tol=args.zero_tol)
    d = diagnose(s)
    report = diagnosis_lines(d) + [f"all_converged: {fmt(s.all_converged)}"]
    report += [f"I({fmt(e)}): {fmt(v)} +- {fmt(r)}" for e, v, r, _ in s.rows()]
    return series_csv_lines(s), report, d.classification == INCONCLUSIVE


def _cmd_diagnose(args):
    _require(args, "input")
    s = read_series_csv(args.input)
    d = diagnose(s)
    csv = ["classification,a,b,gamma,b_stderr",
           ",".join([d.classification] + [fmt(x) for x in (d.a, d.b, d.gamma, d.b_stderr)])]
    return csv, diagnosis_lines(d), d.classification == INCONCLUSIVE


def _cmd_critical_p(args):
    _require(args, "lo", "hi")
    f = _field(args)
    dom = _domain(args, f.n)
    tol = 0.05 if args.tol is None else args.tol
    res = analysis.critical_exponent(f, dom, args.lo, args.hi, tol, _family(args),
                                     rtol=_rtol(args, 1e-4))
    csv = ["p,classification"] + [f"{fmt(p)},{c}" for p, c in res.probes]
    report = [f"p_star: {fmt(res.p_star)}", f"lo: {fmt(res.lo)}", f"hi: {fmt(res.hi)}",
              f"clean: {fmt(res.clean)}"]
    report += [f"probe {fmt(p)}: {c}" for p, c in res.probes]
    return csv, report, not res.clean


def _cmd_sobolev(args):
    _require(args, "p")
    f = _field(args)
    dom = _domain(args, f.n)
    r = analysis.sobolev_check(f, args.a, args.p, dom, _family(args),
                               rtol=_rtol(args, 1e-5))
    csv = ["quantity,eps,value,err,converged"]
    for name, s in (("log", r.log_series), ("grad", r.grad_series)):
        csv += [f"{name},{fmt(e)},{fmt(v)},{fmt(er)},{fmt(c)}" for e, v, er, c in s.rows()]
    report = [f"verdict: {r.verdict}", f"p: {fmt(r.p)}", f"log_norm: {fmt(r.log_norm)}",
              f"zero_cells: {r.zero_cells} (probe resolution {r.probe_resolution})"]
    report += diagnosis_lines(r.log_diagnosis, "log_")
    report += diagnosis_lines(r.grad_diagnosis, "grad_")
    return csv, report, r.verdict == analysis.INCONCLUSIVE


def _cmd_rays(args):
    _require(args, "center")
    f = _field(args)
    dom = None if args.domain is None else _domain(args, f.n)
    r = analysis.ray_survey(f, args.center, args.rays, args.p, _family(args), dom,
                            args.seed, rtol=_rtol(args, 1e-10))
    n = f.n
    csv = [",".join(["ray"] + [f"w{k + 1}" for k in range(n)]
                    + ["classification", "b", "last_value"])]
    for k, (w, s, d) in enumerate(zip(r.directions, r.series, r.diagnoses)):
        csv.append(",".join([str(k)] + [fmt(x) for x in w]
                            + [d.classification, fmt(d.b), fmt(s.values[-1])]))
    report = [f"divergent: {r.divergent_count}/{len(r.diagnoses)}",
              f"fraction_divergent: {fmt(r.fraction_divergent)}",
              f"p: {fmt(r.p)}", f"radius: {fmt(r.radius)}"]
    report += [f"count_{k}: {v}" for k, v in sorted(r.counts().items())]
    return csv, report, INCONCLUSIVE in r.counts()


def _cmd_lemma21(args):
    _require(args, "p")
    phi = _field(args, 1)
    tol = 1e-12 if args.tol is None else args.tol
    r = analysis.minimal_multiplier(phi, args.p, _family(args), tol=tol,
                                    rtol=_rtol(args, 1e-10))
    return (series_csv_lines(r.series), diagnosis_lines(r.diagnosis),
            r.diagnosis.classification == INCONCLUSIVE)


def _cmd_ode_unique(args):
    V = _field(args, 1)
    x0 = 0.0 if args.center is None else args.center[0]
    n = 1 if args.p is None else int(args.p)
    r = analysis.ode_uniqueness_sim(V, x0, args.h, args.horizon, n, _family(args),
                                    rtol=_rtol(args, 1e-10))
    report = [f"sup_abs_f: {fmt(r.sup_abs_f)}", f"steps: {r.steps}",
              f"in_L_loc: {fmt(r.in_L_loc)}", f"note: {r.note}"]
    report += diagnosis_lines(r.integrability, "integrability_")
    return series_csv_lines(r.integrability_series), report, r.in_L_loc is None


def _cmd_lemma22(args):
    f = _field(args)
    x0 = np.zeros(f.n) if args.center is None else args.center
    tol = 1e-12 if args.tol is None else args.tol
    r = analysis.squared_gradient_at_zero(f, x0, args.h, tol)
    csv = ["h,norm,ratio"] + [f"{fmt(h)},{fmt(v)},{fmt(v / h)}"
                              for h, v in zip(r.hs, r.norms)]
    report = [f"order: {fmt(r.order)}",
              f"max_norm_over_h: {fmt(float(np.max(r.norms / r.hs)))}",
              f"bounded_by_2h: {fmt(r.bounded_by(2.0))}"]
    return csv, report, False


def _cmd_bbm(args):
    f = _field(args)
    dom = _domain(args, f.n)
    rows = [bbm_estimate(f, dom, h, args.strata, args.seed) for h in args.h]
    hs = np.asarray(args.h, dtype=float)
    vals = np.array([r.value for r in rows])
    slope = float(np.polyfit(np.log(1 / hs), vals, 1)[0]) if len(hs) >= 2 else math.nan
    csv = ["h,value,err,pairs,budget_ok"] + [
        f"{fmt(h)},{fmt(r.value)},{fmt(r.err)},{r.pairs},{fmt(r.budget_ok)}"
        for h, r in zip(hs, rows)]
    report = [f"slope_vs_log_inv_h: {fmt(slope)}",
              f"budget_ok: {fmt(all(r.budget_ok for r in rows))}"]
    return csv, report, False


def _cmd_cgw(args):
    _require(args, "n", "A", "B")
    prof = cgw.construct(args.n, args.R, args.A, args.B, args.eps)
    ver = cgw.verify(prof)
    report = [f"passed: {fmt(ver.passed)}", f"delta: {fmt(prof.delta)}"]
    report += [f"{name}: {fmt(v)} {'pass' if ok else 'FAIL'}"
               for name, (v, ok) in ver.entries.items()]
    if prof.note:
        report.append(f"note: {prof.note}")
    csv = [f"# verify {line}" for line in report] + cgw.profile_csv_lines(prof, args.points)
    return csv, report, False


def _cmd_extend(args):
    _require(args, "input", "L")
    samples = read_samples_csv(args.input)
    field = mcshane_extend(samples, args.L)
    n = field.n
    if args.domain is not None:
        lo, hi = _domain(args, n).bounds()
        axes = [np.linspace(lo[k], hi[k], args.grid) for k in range(n)]
        X = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    else:
        X = np.array([p for p, _ in samples], dtype=float)
    v, g = field.values_and_grads(X)
    csv = [",".join([f"x{k + 1}" for k in range(n)] + ["value"]
                    + [f"g{k + 1}" for k in range(n)])]
    for x, vi, gi in zip(X, v, g):
        csv.append(",".join([fmt(t) for t in x] + [fmt(vi)] + [fmt(t) for t in gi]))
    report = [f"samples: {len(samples)}", f"L: {fmt(args.L)}", f"points: {len(X)}"]
    return csv, report, False


_HANDLERS = {
    "integrate": _cmd_integrate, "diagnose": _cmd_diagnose,
    "critical-p": _cmd_critical_p, "sobolev": _cmd_sobolev, "rays": _cmd_rays,
    "lemma21": _cmd_lemma21, "ode-unique": _cmd_ode_unique, "lemma22": _cmd_lemma22,
    "bbm": _cmd_bbm, "cgw": _cmd_cgw, "extend": _cmd_extend,
}


def run(argv=None, stdout=None, stderr=None):
    """Run one command; returns the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
        config = _config(args)
        csv, report, inconclusive = _HANDLERS[args.command](args)
        body = csv if args.format == "csv" else report
        emit(header_lines(config) + body, args.out, stdout)
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return 1
    except (QuadratureError, FloatingPointError) as exc:
        stderr.write(f"error: numerical failure: {exc}\n")
        return 2
    except (ExprError, DomainError, IncompatibleSamplesError, ValueError, OSError,
            NotImplementedError) as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    return 2 if inconclusive else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
