"""Command-line front door.

Exit status: 0 when every hard check passes, 1 when a check fails, 2 on bad
input. Reports are deterministic; wall time is only written with ``--timing``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from fractions import Fraction

from . import kernels
from .corpus import CORPUS_EPS, CORPUS_NAMES, CORPUS_R, corpus_curve
from .curves import ConvexCurve
from .errors import CheckFailure, EpsilonError, InputError, NonPositiveScale, UnknownReportKind

DEFAULT_EPS = "1/4"


# ---------------------------------------------------------------------------
# argument parsing

def parse_eps(text) -> float:
    """``1/n`` or a decimal; ``1/eps`` must be a positive integer."""
    try:
        value = float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise EpsilonError(f"cannot read epsilon {text!r}") from None
    if not 0 < value <= 1:
        raise EpsilonError(f"epsilon must lie in (0, 1], got {value}")
    inv = 1.0 / value
    if abs(inv - round(inv)) > 1e-9:
        raise EpsilonError(f"1/eps must be an integer, got 1/{inv:.6g}")
    return 1.0 / round(inv)


def parse_list(text, conv=float) -> list:
    """Comma list with optional ``a-b`` integer ranges."""
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if conv is int and "-" in item[1:]:
            lo, hi = item.split("-", 1) if not item.startswith("-") else item[1:].split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(conv(item))
    return out


def parse_R(text) -> list:
    vals = parse_list(text, float)
    if not vals or any(v < 1 for v in vals):
        raise NonPositiveScale(f"R must be at least 1, got {text!r}")
    return [int(v) if float(v).is_integer() else v for v in vals]


def read_config(path) -> dict:
    """Key-value text: ``key = value`` per line, ``#`` starts a comment."""
    if not os.path.exists(path):
        raise InputError(f"config file {path} does not exist")
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_").lower()] = value
    return out


def load_curve(ref, R: float | None = None) -> tuple[str, ConvexCurve]:
    """A JSON curve file or a corpus name."""
    if ref is None:
        raise InputError("--curve is required")
    if os.path.exists(ref):
        with open(ref) as fh:
            try:
                spec = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{ref}: {exc}") from None
        return os.path.splitext(os.path.basename(ref))[0], ConvexCurve.from_spec(spec)
    if ref in CORPUS_NAMES:
        return ref, corpus_curve(ref, R if R is not None else 2 ** 12)
    raise InputError(f"--curve {ref!r} is neither a file nor one of {', '.join(CORPUS_NAMES)}")


# ---------------------------------------------------------------------------
# output

def _clean(obj):
    """JSON-safe copy: tuples to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def to_csv(rows, fields) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in fields})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def emit(args, text: str, summary: str):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        print(summary)
    else:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)


def _failures(report) -> list:
    found = []

    def walk(node):
        if isinstance(node, dict):
            if node.get("failures"):
                label = ", ".join(f"{k}={node[k]}" for k in ("curve", "R", "eps") if k in node)
                found.extend(f"{label}: {f}" if label else f for f in node["failures"])
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)

    walk(report)
    return found


# ---------------------------------------------------------------------------
# subcommands

def cmd_decompose(args) -> int:
    from .decomposition import coarse_partition, multi_scale, rescale_piece
    from .suites import decomposition_case

    R, eps = _one_R(args), parse_eps(args.eps)
    name, curve = load_curve(args.curve, R)
    case = decomposition_case(name, curve, R, eps)
    records = []
    for piece in coarse_partition(curve, R, eps):
        rec_piece = {"record": "piece", "piece": piece.index, "interval": list(piece.interval),
                     "class": piece.cls, "tail": piece.tail}
        records.append(rec_piece)
        if piece.cls != "P2":
            continue
        gp, sim = rescale_piece(curve, piece, R, eps)
        rec_piece["similarity"] = list(sim.as_tuple())
        tree = multi_scale(gp, R, eps, args.N, strict=False)
        for rec in tree.records():
            rec["record"] = "box"
            rec["piece"] = piece.index
            records.append(rec)
        for cert in tree.certificates:
            records.append({"record": "certificate", "piece": piece.index, **cert})
    records.append({"record": "summary", "curve": name, "R": R, "eps": eps,
                    "passed": case["passed"], "failures": case["failures"]})
    if args.format == "csv":
        boxes = [r for r in records if r["record"] == "box"]
        text = to_csv(boxes, ["piece", "level", "index", "parent", "kind", "interval", "anchor",
                              "frame_angle", "len", "wid", "bending"])
    else:
        text = "".join(json.dumps(_clean(r), sort_keys=True) + "\n" for r in records)
    status = "passed" if case["passed"] else "FAILED: " + "; ".join(case["failures"])
    emit(args, text, f"decompose {name} R={R} eps={eps:g}: {case['pieces']} pieces, "
                     f"{case['boxes']} boxes, certificates {status}")
    return 0 if case["passed"] else 1


def cmd_ideal_partition(args) -> int:
    from .decomposition import certify_partition, ideal_partition

    R, eps = _one_R(args), parse_eps(args.eps)
    name, curve = load_curve(args.curve, R)
    part = ideal_partition(curve, R, eps)
    cert = certify_partition(curve, part, R, eps)
    rows = list(part.rows(curve))
    if args.format == "json":
        text = dumps({"kind": "ideal-partition", "curve": name, "R": R, "eps": eps,
                      "regime_ok": part.regime_ok, "intervals": rows, "certificate": cert})
    else:
        text = to_csv(rows, ["t", "v", "case_tag", "j1_value", "length"])
    status = "passed" if cert["passed"] else "FAILED: " + "; ".join(
        f"{f['check']} on {f['interval']}" for f in cert["failures"]) or "cover"
    emit(args, text, f"ideal-partition {name} R={R} eps={eps:g}: {cert['count']} intervals, {status}")
    return 0 if cert["passed"] else 1


def cmd_affine_dim(args) -> int:
    from .covering import affine_dimension_estimate
    from .suites import CANTOR_SCALES, PARABOLA_SCALES

    if args.deltas:
        scales = parse_list(args.deltas, float)
    else:
        scales = CANTOR_SCALES if args.curve == "cantor" else PARABOLA_SCALES
    if any(d <= 0 for d in scales):
        raise NonPositiveScale("scales must be positive")
    name, curve = load_curve(args.curve, 1.0 / min(scales))
    est = affine_dimension_estimate(curve, scales)
    rows = list(est.rows())
    if args.format == "json":
        text = dumps({"kind": "affine-dim", "curve": name, "slope": est.slope,
                      "intercept": est.intercept, "rows": rows})
    else:
        text = to_csv(rows, ["delta", "count", "residual"])
    emit(args, text, f"affine-dim {name}: slope {est.slope:.4f} over {len(rows)} scales")
    return 0


def cmd_branches(args) -> int:
    from .branches import branch_report
    from .decomposition import piece_trees

    R, eps = _one_R(args), parse_eps(args.eps)
    name, curve = load_curve(args.curve, R)
    reports = []
    for piece, tree in piece_trees(curve, R, eps, args.N):
        rep = branch_report(tree, full_bijection=args.bijection)
        rep["piece"] = piece.index
        reports.append(rep)
    failures = []
    for rep in reports:
        if not rep["count_ok"]:
            failures.append(f"branch count (piece {rep['piece']})")
        for b in rep["branches"]:
            for key in ("absolute_ok", "relative_ok", "window_ok", "separation_ok"):
                if not b[key]:
                    failures.append(f"{key[:-3]} for {b['lambdas']} (piece {rep['piece']})")
            if not b["exceptional"]["passed"]:
                failures.append(f"exceptional chains for {b['lambdas']} (piece {rep['piece']})")
            if args.bijection and not b["bijection_ok"]:
                failures.append(f"rescaling bijection for {b['lambdas']} (piece {rep['piece']})")
    out = {"kind": "branches", "curve": name, "R": R, "eps": eps, "trees": reports,
           "failures": failures, "passed": not failures}
    if args.format == "csv":
        rows = [{"piece": r["piece"], "lambdas": " ".join(repr(x) for x in b["lambdas"]),
                 "counts": " ".join(str(c) for c in b["counts"]),
                 "separation_min_ratio": b["separation_min_ratio"],
                 "passed": all(b[k] for k in ("absolute_ok", "relative_ok", "window_ok", "separation_ok"))}
                for r in reports for b in r["branches"]]
        text = to_csv(rows, ["piece", "lambdas", "counts", "separation_min_ratio", "passed"])
    else:
        text = dumps(out)
    total = sum(r["count"] for r in reports)
    emit(args, text, f"branches {name} R={R} eps={eps:g}: {total} branches over {len(reports)} trees, "
                     + ("passed" if not failures else "FAILED: " + "; ".join(failures[:5])))
    return 0 if not failures else 1


def cmd_decouple(args) -> int:
    from . import fieldlab as fl
    from .decomposition import ideal_partition

    cfg = read_config(args.config) if args.config else {}

    def pick(attr, key, default):
        val = getattr(args, attr)
        return val if val is not None else cfg.get(key, default)

    curve_ref = pick("curve", "curve", None)
    Rs = parse_R(pick("R", "r", "64,128,256"))
    ps = parse_list(pick("p", "p", "6"), float)
    seeds = parse_list(pick("seeds", "seeds", "0"), int)
    eps = parse_eps(pick("eps", "eps", DEFAULT_EPS))
    model = pick("coeff_model", "coeff_model", "unimodular")
    budget = int(float(pick("grid_budget", "grid_budget", fl.DEFAULT_GRID_BUDGET)))
    if not seeds:
        raise InputError("decouple needs at least one seed")
    for p in ps:
        fl._check_exponent(p)
    name, _ = load_curve(curve_ref, max(Rs))
    curves = {R: load_curve(curve_ref, R)[1] for R in Rs}
    rows = []
    for R in Rs:
        part = ideal_partition(curves[R], R, eps)
        for seed in seeds:
            t0 = time.perf_counter()
            f, parts = fl.synth_wavepackets(curves[R], part, R, seed, model, grid_budget=budget)
            if args.export_raw:
                os.makedirs(args.export_raw, exist_ok=True)
                fl.export_raw(f, os.path.join(args.export_raw, f"{name}_R{R}_seed{seed}.c64"))
            for p in ps:
                row = {"R": R, "p": p, "seed": seed, "ratio": fl.decoupling_ratio(f, parts, p)}
                if args.timing:
                    row["runtime"] = time.perf_counter() - t0
                rows.append(row)
    fields = ["R", "p", "seed", "ratio"] + (["runtime"] if args.timing else [])
    if args.format == "json":
        text = dumps({"kind": "decouple", "curve": name, "eps": eps, "coeff_model": model,
                      "seeds": seeds, "rows": rows})
    else:
        text = to_csv(rows, fields)
    worst = {}
    for r in rows:
        worst[(r["R"], r["p"])] = max(worst.get((r["R"], r["p"]), 0.0), r["ratio"])
    summary = ", ".join(f"R={R} p={p:g}: {v:.4f}" for (R, p), v in sorted(worst.items()))
    emit(args, text, f"decouple {name} ({len(seeds)} seeds, max ratio) {summary}")
    return 0


def cmd_verify(args) -> int:
    from .suites import verify

    names = [args.curve] if args.curve else list(CORPUS_NAMES)
    for n in names:
        if n not in CORPUS_NAMES:
            raise InputError(f"verify runs on the corpus; unknown curve {n!r}")
    Rs = parse_R(args.R) if args.R else list(CORPUS_R)
    epss = [parse_eps(e) for e in str(args.eps).split(",")] if args.eps else list(CORPUS_EPS)
    seeds = parse_list(args.seeds, int) if args.seeds else [0]
    report = verify(names, Rs, epss, seed=seeds[0], fields=not args.no_fields)
    report["failures"] = _failures(report)
    if args.format == "csv":
        rows = [{"suite": s["suite"], "curve": r.get("curve", r.get("check")), "R": r.get("R"),
                 "eps": r.get("eps"), "passed": r.get("passed"),
                 "failures": "; ".join(r.get("failures", []))}
                for s in report["suites"] for r in s["rows"]]
        text = to_csv(rows, ["suite", "curve", "R", "eps", "passed", "failures"])
    else:
        text = dumps(report)
    lines = [f"  {s['suite']}: {'passed' if s['passed'] else 'FAILED'} ({len(s['rows'])} cases)"
             for s in report["suites"]]
    lines += [f"  failure: {f}" for f in report["failures"][:20]]
    emit(args, text, "verify (" + kernels.BACKEND + " kernels)\n" + "\n".join(lines))
    return 0 if report["passed"] else 1


def plot_series(text: str):
    """``(header, rows)`` of the plot series for a decouple or affine-dim report."""
    stripped = text.strip()
    if not stripped:
        return ["x", "y"], []
    if stripped.startswith("{"):
        data = json.loads(stripped)
        kind = data.get("kind")
        rows = data.get("rows", [])
    else:
        reader = csv.DictReader(io.StringIO(stripped))
        fields = set(reader.fieldnames or [])
        rows = list(reader)
        if {"R", "p", "seed", "ratio"} <= fields:
            kind = "decouple"
        elif {"delta", "count"} <= fields:
            kind = "affine-dim"
        else:
            kind = None
    if kind == "decouple":
        best: dict = {}
        for r in rows:
            key = (float(r["p"]), float(r["R"]))
            best[key] = max(best.get(key, 0.0), float(r["ratio"]))
        ps = sorted({p for p, _ in best})
        header = ["log2_R", "log2_ratio"] + (["p"] if len(ps) > 1 else [])
        out = []
        for p, R in sorted(best):
            row = [math.log2(R), math.log2(best[(p, R)])]
            if len(ps) > 1:
                row.append(p)
            out.append(row)
        return header, out
    if kind == "affine-dim":
        return ["log_inv_delta", "log_count"], [
            [math.log(1.0 / float(r["delta"])), math.log(float(r["count"]))] for r in rows]
    raise UnknownReportKind(f"cannot plot report of kind {kind!r}")


def cmd_emit_plot_data(args) -> int:
    if not os.path.exists(args.report):
        raise InputError(f"report {args.report} does not exist")
    with open(args.report) as fh:
        text = fh.read()
    header, rows = plot_series(text)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    emit(args, buf.getvalue(), f"emit-plot-data: {len(rows)} rows")
    return 0


def _one_R(args):
    Rs = parse_R(args.R if args.R is not None else 2 ** 10)
    if len(Rs) != 1:
        raise InputError("this command takes a single R")
    return Rs[0]


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convdec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt="json"):
        p.add_argument("--curve", help="curve JSON file or corpus name")
        p.add_argument("--R", help="scale (decouple and verify accept a comma list)")
        p.add_argument("--eps", default=None, help="epsilon as 1/n")
        p.add_argument("--N", type=int, default=None, help="number of levels")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
        return p

    p = common(sub.add_parser("decompose", help="coarse partition and multi-scale trees"))
    p.set_defaults(func=cmd_decompose)
    p = common(sub.add_parser("ideal-partition", help="interval partition with certificates"), "csv")
    p.set_defaults(func=cmd_ideal_partition)
    p = common(sub.add_parser("affine-dim", help="cap covering numbers and dimension slope"), "csv")
    p.add_argument("--deltas", help="comma list of scales")
    p.set_defaults(func=cmd_affine_dim)
    p = common(sub.add_parser("branches", help="dyadic branches and their checks"))
    p.add_argument("--bijection", action="store_true", help="also run the rescaling bijection")
    p.set_defaults(func=cmd_branches)
    p = common(sub.add_parser("decouple", help="empirical decoupling ratios"), "csv")
    p.add_argument("--p", help="comma list of exponents")
    p.add_argument("--seeds", help="comma list or a-b range")
    p.add_argument("--grid-budget", dest="grid_budget", help="bytes")
    p.add_argument("--coeff-model", dest="coeff_model", choices=("unimodular", "gaussian"))
    p.add_argument("--config", help="key-value experiment file")
    p.add_argument("--export-raw", dest="export_raw", help="directory for raw complex64 fields")
    p.add_argument("--timing", action="store_true", help="add a runtime column")
    p.set_defaults(func=cmd_decouple)
    p = common(sub.add_parser("verify", help="lemma suites over the corpus"))
    p.add_argument("--seeds", help="seed for the randomized field checks")
    p.add_argument("--no-fields", action="store_true", help="skip the field identities")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("emit-plot-data", help="CSV series from a decouple or affine-dim report")
    p.add_argument("report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_emit_plot_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "eps", None) is None and args.command not in ("verify", "emit-plot-data"):
        args.eps = DEFAULT_EPS
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except CheckFailure as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
