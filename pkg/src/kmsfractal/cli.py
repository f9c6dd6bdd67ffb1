"""Command line front end: ``kmsf attractor``, ``kmsf kms`` and ``kmsf basis``.

Exit codes: 0 success, 1 a check failed, 2 configuration error (reported as
JSON on stderr). Outputs depend only on the arguments, so reruns are
byte-identical apart from the version banner in the SVG.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import exact as ex
from .basis import (build_patched_basis, order_independence, standard_algebra, standard_elements,
                    verify_reconstruction, verify_sum_identity, write_profile_csv)
from .branching import branch_values
from .errors import ConfigurationError, KmsfError
from .ifs_core import IfsSystem, attractor_approx, check_self_similar, load_ifs, write_cloud_csv
from .io import SCHEMA_VERSION, atomic_writer, write_json
from .kms import classify, decompose, min_beta, random_weights, standard_family
from .measures import Mixture, measure_json, write_measure_csv
from .presets import PRESETS, get_preset

FORMATS = ("json", "csv", "svg")
SVG_SIZE = 1000
SVG_MARGIN = 20


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # noqa: BLE001 - running from a source tree
        return "unknown"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kmsf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--preset", choices=sorted(PRESETS))
        src.add_argument("--system", metavar="FILE", help="IFS description in JSON")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", default="json,csv,svg", help="comma-separated subset of json,csv,svg")
        p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("attractor", help="attractor point cloud and self-similarity check")
    common(p)
    p.add_argument("--depth", type=int, required=True)

    p = sub.add_parser("kms", help="classify the KMS simplex at an inverse temperature")
    common(p)
    p.add_argument("--beta", required=True, help="inverse temperature, e.g. 1.5, ln4 or log(3)")
    p.add_argument("--depth", type=int, default=None, help="orbit depth (default from the target defect)")
    p.add_argument("--steps", type=int, default=None, help="Hutchinson iterations at lambda = N")
    p.add_argument("--seed", type=int, default=0, help="seed for the test family and the mixture weights")

    p = sub.add_parser("basis", help="patched basis reconstruction and sum identity")
    common(p)
    p.add_argument("--terms", type=int, default=200)
    return parser


def _formats(text: str) -> set[str]:
    out = {f.strip() for f in text.split(",") if f.strip()}
    bad = out - set(FORMATS)
    if bad or not out:
        raise ConfigurationError(f"unknown format(s) {sorted(bad)}; choose from {','.join(FORMATS)}")
    return out


def _system(args) -> IfsSystem:
    if args.preset:
        return get_preset(args.preset).ifs
    path = Path(args.system)
    if not path.is_file():
        raise ConfigurationError(f"system file {path} not found")
    return load_ifs(path)


def _system_doc(args, ifs: IfsSystem) -> dict:
    return {"preset": args.preset, "name": ifs.name, "N": ifs.N, "dim": ifs.dim, "exact": ifs.exact}


def write_svg(path: str | Path, points: np.ndarray, lo: Sequence[float], hi: Sequence[float]) -> None:
    """Scatter plot of a point cloud in a fixed square viewport."""
    pts = np.asarray(points, float)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    span = SVG_SIZE - 2 * SVG_MARGIN
    scale = span / float(np.max(hi - lo)) if np.max(hi - lo) > 0 else 1.0
    xs = SVG_MARGIN + (pts[:, 0] - lo[0]) * scale
    ys = SVG_SIZE - SVG_MARGIN - (pts[:, 1] - lo[1]) * scale if pts.shape[1] > 1 else np.full(len(pts), SVG_SIZE / 2)
    with atomic_writer(path) as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">\n')
        fh.write(f"<!-- kmsfractal {_version()} -->\n")
        fh.write(f'<rect width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>\n')
        for x, y in zip(xs, ys):
            fh.write(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1"/>\n')
        fh.write("</svg>\n")


def cmd_attractor(args) -> tuple[int, dict]:
    fmts = _formats(args.format)
    if args.depth is None or args.depth < 1:
        raise ConfigurationError("--depth must be a positive integer")
    ifs = _system(args)
    cloud = attractor_approx(ifs, args.depth)
    eps = 1e-9 if args.tol is None else args.tol
    verdict = check_self_similar(ifs, cloud, eps)
    out = Path(args.out)
    report = {"schema": SCHEMA_VERSION, "command": "attractor", "system": _system_doc(args, ifs),
              "depth": args.depth, "points": len(cloud), "resolution": cloud.resolution,
              "self_similar": {"passed": verdict.passed, "defect": verdict.defect, "eps": verdict.eps,
                               "resolution": verdict.resolution}}
    if "csv" in fmts:
        write_cloud_csv(out / "points.csv", cloud)
    if "svg" in fmts:
        write_svg(out / "attractor.svg", cloud.points, [float(v) for v in ifs.box_lo], [float(v) for v in ifs.box_hi])
    if "json" in fmts:
        write_json(out / "report.json", report)
    return (0 if verdict.passed else 1), report


def _write_residuals(path: Path, vertices) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", "check", "member", "value", "allowed", "passed"])
        for v in vertices:
            for name, rep in sorted(v.checks.items()):
                for tag, value, allowed in rep.rows:
                    ok = value >= allowed if name == "condition4" else value <= allowed
                    w.writerow([v.label, name, tag, format(float(value), ".17g"), format(float(allowed), ".17g"),
                                "PASS" if ok else "FAIL"])


def cmd_kms(args) -> tuple[int, dict]:
    fmts = _formats(args.format)
    ifs = _system(args)
    report = branch_values(ifs)
    family = standard_family(ifs, report, args.seed)
    cls = classify(ifs, report, args.beta, family=family, seed=args.seed, depth=args.depth,
                   steps=args.steps, tol=args.tol)
    out = Path(args.out)
    mb = min_beta(ifs)
    doc = {"schema": SCHEMA_VERSION, "command": "kms", "system": _system_doc(args, ifs),
           "branch_report": report.to_json(), "min_beta": {"value": mb.value, "interpretation": mb.interpretation},
           "classification": cls.to_json(), "measures": {}, "decomposition": None}
    ok = cls.passed
    for v in cls.vertices:
        name = f"vertex_{v.label}.csv"
        doc["measures"][v.label] = measure_json(v.candidate.measure, file=name if "csv" in fmts else None)
        if "csv" in fmts:
            write_measure_csv(out / name, v.candidate.measure)
    if cls.regime == "simplex" and cls.vertices:
        weights = random_weights(len(cls.vertices), args.seed)
        mix = Mixture(weights, [v.candidate.measure for v in cls.vertices])
        dec = decompose(mix, cls.lam, report, ifs, family=family, seed=args.seed)
        if dec.weights:
            got = [dec.weight_at(v.candidate.y) for v in cls.vertices]
            err = max(abs(float(a - b)) if ex.is_exact(a) and ex.is_exact(b) else abs(float(a) - float(b))
                      for a, b in zip(weights, got))
        else:
            err = float("inf")
        roundtrip = err <= 1e-9 and dec.passed
        doc["decomposition"] = {"seed": args.seed, "weights": [ex.render(w) for w in weights],
                                "recovered": dec.to_json(), "weight_error": err, "passed": roundtrip}
        ok &= roundtrip
    if "csv" in fmts:
        _write_residuals(out / "residuals.csv", cls.vertices)
    if "json" in fmts:
        write_json(out / "simplex.json", doc)
    return (0 if ok else 1), doc


def cmd_basis(args) -> tuple[int, dict]:
    fmts = _formats(args.format)
    if args.terms < 1:
        raise ConfigurationError("--terms must be positive")
    ifs = _system(args)
    report = branch_values(ifs)
    basis = build_patched_basis(ifs, report)
    tol = 1e-2 if args.tol is None else args.tol
    rows, recon = [], {}
    ok = True
    for f in standard_elements(ifs, report):
        entry = {}
        for order in ("forward", "reversed"):
            res = verify_reconstruction(basis, f, args.terms, order=order)
            rows += [{"function": f.name, "order": order, "M": m, "error": e} for m, e in res.profile]
            entry[order] = {"error": res.error, "monotone_after_saturation": res.monotone_after_saturation}
            ok &= res.error < tol
        delta = order_independence(basis, f, args.terms)
        entry["order_delta"] = delta
        ok &= delta < 1e-9
        recon[f.name] = entry
    sums = {}
    for a in standard_algebra(ifs):
        s = verify_sum_identity(basis, a, args.terms)
        sums[a.name] = {"max_residual": s.max_residual, "saturated_residual": s.saturated_residual,
                        "at_branch_values": [{"y": ex.render_point(y), "residual": ex.render(r)
                                              if ex.is_exact(r) else float(r)} for y, r in s.exact_residuals],
                        "exact_zero": s.exact_zero}
        ok &= s.exact_zero
    doc = {"schema": SCHEMA_VERSION, "command": "basis", "system": _system_doc(args, ifs),
           "terms": args.terms, "tolerance": tol, "basis": basis.to_json(), "reconstruction": recon,
           "sum_identity": sums, "passed": bool(ok)}
    out = Path(args.out)
    if "csv" in fmts:
        write_profile_csv(out / "error_profile.csv", rows)
    if "json" in fmts:
        write_json(out / "report.json", doc)
    return (0 if ok else 1), doc


COMMANDS = {"attractor": cmd_attractor, "kms": cmd_kms, "basis": cmd_basis}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        code, doc = COMMANDS[args.command](args)
    except (KmsfError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "schema": SCHEMA_VERSION}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2
    summary = {"command": args.command, "exit": code, "passed": code == 0}
    print(json.dumps(summary, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
