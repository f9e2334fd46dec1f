"""Command-line entry point: ``qubound {verify,angles,zeno,decode,hunt}``."""

import argparse
import csv
import datetime
import io
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bounds
from .config import DEFAULT_TOL, ResourceCaps
from .errors import QuboundError, ValidationError
from .hunt import CHECKERS, DEFAULT_GENERATORS, hunt_violations
from .qstate import Projector, PureState, instance_from_json, random_pure_state, rng_stream, zeno_family
from .seqchain import MeasurementChain, VanishingBranchError, run_chain, sandwich_success
from .seqdecode import CSV_COLUMNS, CqChannel, decoding_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RESOURCE = 4
EXIT_VIOLATION = 5

DISTRIBUTIONS = {"states": "haar/hilbert-schmidt", "projectors": "haar", "zeno": "rotated-plane"}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _resolved_config(args, **extra):
    caps = ResourceCaps.from_env(max_dim=getattr(args, "max_dim", None))
    cfg = {
        "command": args.command,
        "seed": getattr(args, "seed", None),
        "tolerances": replace(DEFAULT_TOL, violation=args.tol).to_dict(),
        "caps": caps.to_dict(),
        "distributions": DISTRIBUTIONS,
        "format": args.format,
    }
    cfg.update(extra)
    return cfg


def _document(args, body, **extra):
    doc = {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
           "config": _resolved_config(args, **extra)}
    doc.update(body)
    return _clean(doc)


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: JSON parse error at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from None


# -- verify / hunt ------------------------------------------------------------

def cmd_verify(args):
    ids = args.bounds.split(",") if args.bounds else list(bounds.BOUND_IDS)
    results, violations = {}, []
    for b in ids:
        if args.trials == 0:
            results[b] = {"trials": 0, "evaluated": 0, "violations": []}
            continue
        s = hunt_violations(b, args.trials, args.seed, tol=args.tol, workers=args.workers)
        results[b] = s.to_json()
        violations += [{"bound": b, "seed": args.seed, **v} for v in s.violations]
    doc = _document(args, {"results": results, "violationCount": len(violations),
                           "ok": not violations}, trials=args.trials, bounds=ids,
                    generators={b: DEFAULT_GENERATORS[b].to_json() for b in ids})
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["bound", "trials", "evaluated", "skipped", "min_margin", "violations"])
        for b, r in doc["results"].items():
            w.writerow([b, r["trials"], r["evaluated"], r.get("skipped", 0),
                        r.get("minMargin"), len(r["violations"])])
        _emit(buf.getvalue(), args.out)
    else:
        _emit(_dump(doc), args.out)
    if violations:
        repro = Path(args.repro or ((args.out + ".violations.json") if args.out not in (None, "-")
                                    else "qubound-violations.json"))
        repro.write_text(_dump(_clean({"seed": args.seed, "violations": violations})))
        print(f"{len(violations)} violation(s); reproduction data in {repro}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_hunt(args):
    base = DEFAULT_GENERATORS[args.bound]
    overrides = {k: v for k, v in {
        "family": args.family, "d_max": args.d_max, "n_max": args.n_max,
        "eps_total": args.eps_total}.items() if v is not None}
    cfg = replace(base, **overrides)
    s = hunt_violations(args.bound, args.trials, args.seed, cfg, tol=args.tol, workers=args.workers)
    _emit(_dump(_document(args, {"summary": s.to_json()}, trials=args.trials)), args.out)
    return EXIT_OK if s.ok else EXIT_VIOLATION


# -- zeno / angles ------------------------------------------------------------

def equiangular_chain(n):
    """Qubit ``|0>`` measured along real directions at angles ``iπ/(2n)``."""
    projs = []
    for i in range(1, n + 1):
        phi = i * math.pi / (2 * n)
        projs.append(Projector.from_vectors(np.array([math.cos(phi), math.sin(phi)])))
    return MeasurementChain(tuple(projs), PureState(np.array([1.0, 0.0])))


def _chain_margins(trace):
    reps = [bounds.check_t1a(trace), bounds.check_t1b(trace), bounds.check_sen(trace)]
    if trace.has_angles:
        reps += bounds.check_lemma1(trace) + bounds.check_lemma2(trace)
    return [r.to_json() for r in reps]


def zeno_report(n, eps_max=None, dim=2, seed=0):
    chain = equiangular_chain(n)
    success = sandwich_success(chain.projectors, chain.initial)
    closed = math.cos(math.pi / (2 * n)) ** (2 * n)
    out = {"n": n, "success": success, "closedForm": closed,
           "absError": abs(success - closed)}
    try:
        trace = run_chain(chain)
        out["margins"] = _chain_margins(trace)
        out["traceDistance"] = trace.trace_distance
    except VanishingBranchError as exc:
        out["margins"] = None
        out["note"] = str(exc)
    if eps_max is not None:
        rng = rng_stream(seed, n)
        psi = random_pure_state(dim, rng)
        projs, eps = zeno_family(psi, n, eps_max, rng)
        trace = run_chain(MeasurementChain(tuple(projs), psi))
        out["family"] = {"d": dim, "epsMax": eps_max, "epsilons": eps,
                         "success": trace.success_probability,
                         "margins": _chain_margins(trace)}
    return out


def cmd_zeno(args):
    ns = [int(x) for x in str(args.n).split(",")]
    runs = [zeno_report(n, args.eps_max, args.dim, args.seed) for n in ns]
    _emit(_dump(_document(args, {"runs": runs})), args.out)
    return EXIT_OK


def angle_residuals(trace):
    rows = []
    beta_prev = 0.0
    for t, a, b, g in zip(trace.thetas, trace.alphas, trace.betas, trace.gammas):
        rows.append({
            "cosBetaIdentity": math.cos(b) - math.cos(a) * math.cos(g),
            "prevBetaSlack": (math.cos(t) * math.cos(a) * math.cos(g)
                              + math.sin(t) * math.sin(a) - math.cos(beta_prev)),
        })
        beta_prev = b
    return rows


def cmd_angles(args):
    rho, projectors = instance_from_json(_load_json(args.instance))
    chain = MeasurementChain(tuple(projectors), rho)
    if rho.is_pure():
        chain = MeasurementChain(tuple(projectors), rho.to_pure())
    elif args.purify:
        chain = chain.purified()
    else:
        raise ValidationError("angles: the initial state is mixed; rerun with --purify to "
                              "extract angles of the purified chain")
    trace = run_chain(chain)
    body = trace.to_json()
    body["residuals"] = angle_residuals(trace)
    body["purified"] = bool(args.purify and not rho.is_pure())
    _emit(_dump(_document(args, body, instance=str(args.instance))), args.out)
    return EXIT_OK


# -- decode -------------------------------------------------------------------

def cmd_decode(args):
    ch = CqChannel.from_json(_load_json(args.channel))
    caps = ResourceCaps.from_env(max_dim=args.max_dim)
    notes = []
    if args.rate > math.log2(max(ch.alphabet_size, 1)) + 1e-12:
        msg = (f"rate {args.rate} exceeds log2(J) = {math.log2(ch.alphabet_size):.4g}; "
               "unreachable even classically")
        warnings.warn(msg, stacklevel=1)
        notes.append(msg)
    stats = decoding_experiment(ch, args.n, args.rate, args.delta, args.trials, args.seed,
                                mode=args.mode, pgm=args.pgm, caps=caps)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
    w.writeheader()
    for row in stats.rows:
        w.writerow(row)
    _emit(buf.getvalue(), args.out)
    summary = _document(args, {"summary": stats.summary_json(), "warnings": notes},
                        channel=str(args.channel), n=args.n, rate=args.rate, delta=args.delta,
                        trials=args.trials, mode=args.mode)
    if args.summary:
        Path(args.summary).write_text(_dump(summary))
    elif args.out not in (None, "-"):
        sys.stdout.write(_dump(summary))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="unsigned 64-bit master seed")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL.violation,
                        help="violation threshold on margins")
    common.add_argument("--max-dim", type=int, default=None,
                        help="Hilbert dimension cap (env QUBOUND_MAX_DIM)")
    common.add_argument("--trials", type=int, default=10_000)

    p = argparse.ArgumentParser(prog="qubound", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the full inequality suite")
    v.add_argument("--bounds", default=None, help="comma-separated subset of bound ids")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--repro", default=None, help="where to write violation reproduction data")
    v.set_defaults(func=cmd_verify)

    h = sub.add_parser("hunt", parents=[common], help="falsification search for one bound")
    h.add_argument("--bound", required=True, choices=sorted(CHECKERS))
    h.add_argument("--family", choices=("random", "zeno", "mixed"), default=None)
    h.add_argument("--d-max", type=int, default=None)
    h.add_argument("--n-max", type=int, default=None)
    h.add_argument("--eps-total", type=float, default=None)
    h.add_argument("--workers", type=int, default=1)
    h.set_defaults(func=cmd_hunt)

    a = sub.add_parser("angles", parents=[common], help="angle record of one instance")
    a.add_argument("--instance", required=True)
    a.add_argument("--purify", action="store_true", help="purify a mixed initial state")
    a.set_defaults(func=cmd_angles)

    z = sub.add_parser("zeno", parents=[common], help="equiangular qubit chain and Zeno families")
    z.add_argument("--n", default="1,10,100", help="chain length(s), comma-separated")
    z.add_argument("--eps-max", type=float, default=None,
                   help="also run a random Zeno family with this per-step failure budget")
    z.add_argument("--dim", type=int, default=2)
    z.set_defaults(func=cmd_zeno)

    d = sub.add_parser("decode", parents=[common], help="sequential decoding experiment")
    d.add_argument("--channel", required=True)
    d.add_argument("--n", type=int, default=8)
    d.add_argument("--rate", type=float, default=0.3)
    d.add_argument("--delta", type=float, default=0.1)
    d.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    d.add_argument("--pgm", action="store_true", help="also evaluate the square-root measurement")
    d.add_argument("--summary", default=None, help="summary JSON path")
    d.set_defaults(func=cmd_decode, trials=500)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", 0) < 0 or args.seed >= 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    if args.trials < 0:
        parser.error("--trials must be >= 0")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"qubound: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QuboundError as exc:
        print(f"qubound: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
