"""Command-line surface.

Subcommands map one-to-one onto module operations; outputs are JSON
documents of decimal strings (optionally CSV for polynomial tables), byte
deterministic for fixed inputs.  Wall-clock timings go to a sidecar file,
never into the data.  Exit codes: 0 success, 1 verification failure,
2 spec parse error, 3 mathematical failure (e.g. a vanishing minor).
"""

import argparse
import csv
import io
import json
import sys
import time

from mpmath import mp, mpf

from .core import CD, CAUCHY, MIXED1, MIXED2, MeasureMatrix, SobolevSystem, assemble_moment_matrix, factorize
from .errors import NotFactorizable, SobPolyError, SpecFileError
from .linalg import Matrix
from .measures import raw_moments
from .opdeform import DiffOperator, invertible_lower_link, operator_matrices
from .perturb import CoherencePair, DiscreteSpec, additive_perturb, coherent_pair_sbps, discrete_sobolev
from .precision import set_precision
from .equivalence import reduce_to_diagonal
from .specfile import (
    decimal_digits,
    fmt,
    load_measure_matrix,
    load_transform,
    matrix_rows,
    poly_rows,
    serialize_measure_matrix,
)
from .toda import TimePoint, evolve
from .transforms import christoffel, geronimus, spectral
from .verify import ALL_ORDER, run_suite

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_SPEC = 2
EXIT_MATH = 3


def _parser():
    p = argparse.ArgumentParser(prog="sobpoly", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_, spec=True, transform=False, order=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--bits", type=int, default=None, help="working precision (default 256 or the spec file's)")
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        if spec:
            sp.add_argument("--spec", required=True, help="measure-matrix spec file")
        if transform:
            sp.add_argument("--transform", required=True, help="transform description file")
        if order:
            sp.add_argument("--order", type=int, required=True, help="truncation size k")
        sp.add_argument("--plot-data", action="store_true", help="emit (x, P_k(x)) sample tables")
        sp.add_argument("--csv", action="store_true", help="emit polynomial rows as CSV instead of JSON")
        return sp

    add("moments", "Sobolev moment matrix and raw entry moments")
    add("sbps", "bi-orthogonal families and norms")
    kp = add("kernel", "kernel evaluation at a point")
    kp.add_argument("--which", default="CD", choices=[CD, CAUCHY, MIXED1, MIXED2])
    kp.add_argument("--x", required=True)
    kp.add_argument("--y", required=True)
    kp.add_argument("--dx", type=int, default=0)
    kp.add_argument("--dy", type=int, default=0)
    sk = add("secondkind", "second-kind function values")
    sk.add_argument("--index", type=int, required=True)
    sk.add_argument("--y", required=True)
    pp = add("perturb", "additive perturbation by a second moment matrix")
    pp.add_argument("--gspec", required=True, help="spec file of the additive perturbation")
    cp = add("coherent", "coherent-pair Sobolev polynomials", transform=True)
    cp.add_argument("--spec2", required=True, help="spec file of the second measure")
    add("discrete", "discrete Sobolev perturbation", transform=True)
    add("reduce", "diagonal + discrete reduction of a symmetric measure matrix", order=False)
    add("christoffel", "Christoffel deformation", transform=True)
    add("geronimus", "Geronimus deformation", transform=True)
    add("spectral", "linear spectral deformation", transform=True)
    add("opdeform", "differential-operator deformation", transform=True)
    add("toda", "time-deformed factorization and Lax matrices", transform=True)
    vp = sub.add_parser("verify", help="run a named verification suite")
    vp.add_argument("--suite", required=True, choices=ALL_ORDER + ["all"])
    vp.add_argument("--bits", type=int, default=256)
    return p


def _resolve_bits(args, file_bits):
    if getattr(args, "bits", None) is not None:
        return args.bits
    if file_bits is not None:
        return file_bits
    return 256


def _standard_measure(w):
    if w.order != 0:
        raise SpecFileError("this subcommand needs an order-0 (single measure) spec")
    return w.entry(0, 0)


def _plot_table(polys, hull):
    lo, hi = (mpf(-1), mpf(1)) if hull is None else hull
    if lo == mpf("-inf"):
        lo = mpf(-2)
    if hi == mpf("inf"):
        hi = mpf(2)
    rows = []
    for t in range(33):
        x = lo + (hi - lo) * t / 32
        rows.append([fmt(x)] + [fmt(p(x)) for p in polys])
    return rows


def _result(args, doc, polys_for_csv=None, hull=None, plot_polys=None):
    doc.setdefault("metadata", {})
    doc["metadata"]["precisionBits"] = mp.prec
    doc["metadata"]["decimalDigits"] = decimal_digits()
    if getattr(args, "plot_data", False) and plot_polys is not None:
        doc["plot"] = _plot_table(plot_polys, hull)
    if getattr(args, "csv", False) and polys_for_csv is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in poly_rows(polys_for_csv):
            writer.writerow(row)
        payload = buf.getvalue()
    else:
        payload = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _timing_sidecar(args, seconds):
    if args.out:
        with open(args.out + ".timings.json", "w", encoding="utf-8") as fh:
            json.dump({"wallSeconds": seconds}, fh)


def _cmd_moments(args, w):
    k = args.order
    g = assemble_moment_matrix(w, k)
    entries = []
    for i in range(w.order + 1):
        for j in range(w.order + 1):
            m = w.entry(i, j)
            if m.is_zero():
                continue
            entries.append(
                {"row": i, "col": j, "moments": [fmt(v) for v in raw_moments(m, 2 * k - 1)]}
            )
    return {"momentMatrix": matrix_rows(g), "entryMoments": entries, "metadata": {"truncation": k}}, None


def _cmd_sbps(args, w):
    k = args.order
    fact = factorize(assemble_moment_matrix(w, k))
    doc = {
        "polynomials1": poly_rows(fact.family1()),
        "polynomials2": poly_rows(fact.family2()),
        "norms": [fmt(v) for v in fact.h],
        "metadata": {"truncation": k},
    }
    return doc, fact.family1()


def _cmd_kernel(args, w):
    s = SobolevSystem(w, args.order)
    val = (
        s.kernel_deriv(args.order, mpf(args.x), mpf(args.y), args.dx, args.dy)
        if (args.dx or args.dy)
        else s.kernel(args.which, args.order, mpf(args.x), mpf(args.y))
    )
    return {"kernel": {"which": args.which, "x": args.x, "y": args.y, "value": fmt(val)}}, None


def _cmd_secondkind(args, w):
    s = SobolevSystem(w, args.order)
    c1, c2, bound = s.second_kind_series(args.index, mpf(args.y))
    exact1 = s.second_kind_value(args.index, mpf(args.y), family=1)
    return {
        "secondKind": {
            "index": args.index,
            "y": args.y,
            "c1": fmt(c1),
            "c2": fmt(c2),
            "tailBound": fmt(bound),
            "c1Exact": fmt(exact1),
        }
    }, None


def _cmd_perturb(args, w):
    g2, _bits = load_measure_matrix(args.gspec)
    k = args.order
    base = SobolevSystem(w, k)
    g_pert = assemble_moment_matrix(g2, k)
    data, fam1, fam2 = additive_perturb(base, g_pert, k)
    doc = {
        "polynomials1": poly_rows(fam1),
        "polynomials2": poly_rows(fam2),
        "norms": [fmt(v) for v in data.new_norms],
        "metadata": {"truncation": k},
    }
    return doc, fam1


def _cmd_coherent(args, w, tr):
    mu1 = _standard_measure(w)
    w2, _ = load_measure_matrix(args.spec2)
    cp = CoherencePair(measure1=mu1, measure2=_standard_measure(w2), r_params=tr["rparams"])
    fam = coherent_pair_sbps(cp, tr.get("lambda", mpf(1)), args.order)
    return {"polynomials1": poly_rows(fam), "metadata": {"truncation": args.order}}, fam


def _cmd_discrete(args, w, tr):
    nodes, masses = tr["nodes"]
    spec = DiscreteSpec(nodes=nodes, masses=masses)
    base = SobolevSystem(w, args.order)
    fam1, fam2, norms, _ = discrete_sobolev(base, spec, args.order)
    doc = {
        "polynomials1": poly_rows(fam1),
        "polynomials2": poly_rows(fam2),
        "norms": [fmt(v) for v in norms],
        "metadata": {"truncation": args.order},
    }
    return doc, fam1


def _cmd_reduce(args, w):
    red = reduce_to_diagonal(w)
    return {
        "diagonal": serialize_measure_matrix(red.diagonal),
        "discrete": serialize_measure_matrix(red.discrete),
        "moves": len(red.trace),
    }, None


def _transform_result(res, k):
    return {
        "polynomials1": poly_rows(res.family1),
        "polynomials2": poly_rows(res.family2),
        "norms": [fmt(v) for v in res.norms],
        "resolvent": matrix_rows(res.resolvent),
        "metadata": {"truncation": k},
    }


def _cmd_christoffel(args, w, tr):
    res = christoffel(w, tr["R"], tr.get("side", "left"), args.order)
    return _transform_result(res, args.order), res.family1


def _cmd_geronimus(args, w, tr):
    res = geronimus(w, tr["Q"], args.order)
    return _transform_result(res, args.order), res.family1


def _cmd_spectral(args, w, tr):
    res = spectral(w, tr["R"], tr["Q"], tr.get("orientation", "RL"), args.order)
    return _transform_result(res, args.order), res.family1


def _cmd_opdeform(args, w, tr):
    op = DiffOperator.of(*tr["operator"])
    faces = operator_matrices(op, args.order)
    doc = {
        "momentFace": matrix_rows(faces.moment_side),
        "metadata": {"truncation": args.order},
    }
    fam = None
    try:
        fam = invertible_lower_link(op, _standard_measure(w), args.order)
        doc["polynomials1"] = poly_rows(fam)
    except SobPolyError:
        doc["note"] = "operator face not lower-invertible; faces only"
    return doc, fam


def _cmd_toda(args, w, tr):
    t = TimePoint.of(t1=tr.get("t1", ()), t2=tr.get("t2", ()))
    state = evolve(w, t, args.order)
    doc = {
        "lax1": matrix_rows(state.lax1),
        "lax2": matrix_rows(state.lax2),
        "norms": [fmt(v) for v in state.fact.h],
        "metadata": {"truncation": args.order},
    }
    return doc, None


def main(argv=None):
    args = _parser().parse_args(argv)
    start = time.monotonic()
    if args.command == "verify":
        set_precision(args.bits)
        try:
            ok = run_suite(args.suite, bits=args.bits)
        except SobPolyError as exc:
            print(f"[FAIL] suite aborted: {exc}")
            return EXIT_MATH if isinstance(exc, NotFactorizable) else EXIT_VERIFY
        return EXIT_OK if ok else EXIT_VERIFY

    try:
        w, file_bits = load_measure_matrix(args.spec) if hasattr(args, "spec") else (None, None)
    except SpecFileError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    set_precision(_resolve_bits(args, file_bits))
    tr = None
    if hasattr(args, "transform"):
        try:
            tr = load_transform(args.transform)
        except SpecFileError as exc:
            print(f"spec error: {exc}", file=sys.stderr)
            return EXIT_SPEC

    handlers = {
        "moments": lambda: _cmd_moments(args, w),
        "sbps": lambda: _cmd_sbps(args, w),
        "kernel": lambda: _cmd_kernel(args, w),
        "secondkind": lambda: _cmd_secondkind(args, w),
        "perturb": lambda: _cmd_perturb(args, w),
        "coherent": lambda: _cmd_coherent(args, w, tr),
        "discrete": lambda: _cmd_discrete(args, w, tr),
        "reduce": lambda: _cmd_reduce(args, w),
        "christoffel": lambda: _cmd_christoffel(args, w, tr),
        "geronimus": lambda: _cmd_geronimus(args, w, tr),
        "spectral": lambda: _cmd_spectral(args, w, tr),
        "opdeform": lambda: _cmd_opdeform(args, w, tr),
        "toda": lambda: _cmd_toda(args, w, tr),
    }
    try:
        doc, fam = handlers[args.command]()
    except NotFactorizable as exc:
        print(f"math error: vanishing leading minor of size {exc.minor}", file=sys.stderr)
        return EXIT_MATH
    except SpecFileError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except SobPolyError as exc:
        print(f"math error: {exc}", file=sys.stderr)
        return EXIT_MATH
    _result(args, doc, polys_for_csv=fam, hull=w.hull() if w else None, plot_polys=fam)
    _timing_sidecar(args, time.monotonic() - start)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
