"""Command-line front end: output formats, checkpointing, parallel orchestration.

Results are deterministic for a fixed configuration: chunks are merged in
index order no matter how many workers computed them, integers are emitted
as exact decimal strings, and reals are formatted at a declared precision.
Long scans checkpoint at chunk boundaries; resuming a killed run produces
byte-identical output to an uninterrupted one.  A checkpoint refuses to
resume under a configuration whose semantic fingerprint differs (worker
count, chunk size and checkpoint cadence are deliberately not part of the
fingerprint).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Optional

import mpmath as mp

from . import equidist, exactseq, minimax, moments

SCHEMA_VERSION = 1
REAL_DIGITS = 30  # significant decimal digits of every serialized real
ENV_WORKERS = "CANNONBALL_WORKERS"
ENV_CHECKPOINT_DIR = "CANNONBALL_CHECKPOINT_DIR"


class CheckpointMismatch(RuntimeError):
    """Checkpoint fingerprint does not match the requested configuration."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    x: Optional[int] = None
    lo: Optional[int] = None
    hi: Optional[int] = None
    k: Optional[int] = None
    L: Optional[int] = None
    K: Optional[int] = None
    bins: Optional[int] = None
    m_max: Optional[int] = None
    bits: int = exactseq.DEFAULT_BITS
    xs: Optional[tuple] = None
    expr: Optional[str] = None
    var: Optional[str] = None
    preset: Optional[str] = None
    workers: int = 1
    chunk: int = 1 << 16
    out_format: str = "csv"
    output: Optional[str] = None
    checkpoint_path: Optional[str] = None
    checkpoint_every: int = 1 << 20

    def fingerprint(self) -> str:
        """Hash of the semantic configuration only.

        Worker count, chunk size, checkpoint cadence and file locations do
        not change results, so they are excluded: a run may be resumed with
        different parallelism.
        """
        sem = {
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "x": self.x, "lo": self.lo, "hi": self.hi,
            "k": self.k, "L": self.L, "K": self.K,
            "bins": self.bins, "m_max": self.m_max, "bits": self.bits,
            "xs": list(self.xs) if self.xs else None,
            "expr": self.expr, "var": self.var, "preset": self.preset,
            "out_format": self.out_format,
        }
        blob = json.dumps(sem, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _real(v) -> str:
    """Deterministic decimal rendering of a real at REAL_DIGITS digits."""
    if isinstance(v, float):
        return repr(v)
    return mp.nstr(v, REAL_DIGITS)


def _fraction_str(fr) -> str:
    with mp.workprec(4 * REAL_DIGITS):
        return mp.nstr(mp.mpf(fr.numerator) / fr.denominator, REAL_DIGITS)


def emit(rows: list[dict], out_format: str, destination=None, fieldnames=None):
    """Write rows as RFC-4180 CSV or a JSON array with stable field order."""
    buf = io.StringIO()
    if out_format == "csv":
        if fieldnames is None:
            if not rows:
                raise ValueError("empty row set needs explicit fieldnames")
            fieldnames = list(rows[0].keys())
        writer = csv.DictWriter(buf, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    elif out_format == "json":
        json.dump(rows, buf, indent=2)
        buf.write("\n")
    else:
        raise ValueError(f"unknown output format {out_format!r}")
    data = buf.getvalue()
    if destination is None:
        sys.stdout.write(data)
    else:
        tmp = str(destination) + ".tmp"
        with open(tmp, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, destination)


def _write_checkpoint(path: str, fingerprint: str, last_n: int, accumulators):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "fingerprint": fingerprint,
        "last_n": last_n,
        "accumulators": [[name, str(value)] for name, value in accumulators],
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def _read_checkpoint(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointMismatch(
            f"checkpoint schema {doc.get('schema_version')} unsupported")
    return doc


def _pool_map_ordered(fn, items, workers):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with get_context().Pool(min(workers, len(items))) as pool:
            yield from pool.imap(fn, items)
    else:
        for item in items:
            yield fn(item)


# ---------------------------------------------------------------------------
# command handlers


def _cmd_terms(cfg: RunConfig):
    spec = exactseq.RangeSpec(cfg.lo, cfg.hi, cfg.chunk)
    rows = []
    for block in _pool_map_ordered(_terms_block, list(spec.chunks()), cfg.workers):
        for t in block:
            rows.append({
                "n": t.n, "p": str(t.p), "f": str(t.f), "y": str(t.y),
                "a": str(t.a), "side": t.side.value,
            })
    return rows, ["n", "p", "f", "y", "a", "side"]


def _terms_block(block):
    return exactseq.terms_block(*block)


def _moment_row(summary) -> dict:
    return {
        "x": summary.x,
        "k": summary.k,
        "exact": str(summary.exact),
        "main": _real(summary.main),
        "residual": _real(summary.residual),
        "normalized": _real(summary.normalized),
        "prec_bits": moments.WORK_PREC,
    }


def _cmd_moments(cfg: RunConfig):
    fingerprint = cfg.fingerprint()
    start_n, init = 1, None
    ckpt = cfg.checkpoint_path
    if ckpt and os.path.exists(ckpt):
        doc = _read_checkpoint(ckpt)
        if doc["fingerprint"] != fingerprint:
            raise CheckpointMismatch(
                "checkpoint was written by a different configuration; refusing to resume")
        start_n = int(doc["last_n"]) + 1
        init = [int(v) for _, v in doc["accumulators"]]
    if init is not None and start_n > cfg.x:
        exact = init[0]
    else:
        progress = None
        if ckpt:
            state = {"written": start_n - 1}

            def progress(last_n, sums):
                if last_n - state["written"] >= cfg.checkpoint_every and last_n < cfg.x:
                    _write_checkpoint(ckpt, fingerprint, last_n,
                                      [(f"m{cfg.k}", sums[0])])
                    state["written"] = last_n

        table = moments.power_sums_at([cfg.x], (cfg.k,), workers=cfg.workers,
                                      chunk=cfg.chunk, start_n=start_n,
                                      init=init, progress=progress)
        exact = table[cfg.x][0]
    summary = moments.summary_from_exact(cfg.x, cfg.k, exact)
    return [_moment_row(summary)], None


def _cmd_average(cfg: RunConfig):
    s = moments.average(cfg.x, workers=cfg.workers, chunk=cfg.chunk)
    m1 = s.exact * s.x  # A(x) * x is the exact first moment again
    row = {
        "x": s.x,
        "m1": str(m1.numerator),
        "average": f"{s.exact.numerator}/{s.exact.denominator}",
        "value": _real(s.value),
        "main": _real(s.main),
        "prec_bits": moments.WORK_PREC,
    }
    return [row], None


def _cmd_sandwich(cfg: RunConfig):
    r = moments.sandwich(cfg.x, cfg.k, cfg.L)
    row = {
        "x": r.x, "k": r.k, "L": r.L,
        "lower": _fraction_str(r.lower),
        "upper": _fraction_str(r.upper),
        "exact": str(r.exact),
        "rel_width": repr(r.rel_width),
        "prec_digits": REAL_DIGITS,
    }
    return [row], None


def _cmd_discrepancy(cfg: RunConfig):
    pts = equidist.sqrt_frac_points(cfg.x, cfg.bits)
    if cfg.K:
        r = equidist.erdos_turan(pts, cfg.K, cfg.bits)
    else:
        r = equidist.star_discrepancy(pts)
    row = {
        "N": r.N,
        "d_unnormalized": repr(r.d_unnormalized),
        "d_star": repr(r.d_star),
        "K": r.K if r.K is not None else "",
        "et_bound": repr(r.et_bound) if r.et_bound is not None else "",
        "slack": repr(r.slack) if r.slack is not None else "",
        "prec_bits": 53,
    }
    return [row], None


def _cmd_weyl(cfg: RunConfig):
    rows = [{"m": m, "ratio": repr(ratio), "prec_bits": 53}
            for m, ratio in equidist.weyl_profile(cfg.x, cfg.m_max, cfg.bits)]
    return rows, ["m", "ratio", "prec_bits"]


def _cmd_knbound(cfg: RunConfig):
    rows = []
    for m in range(1, cfg.m_max + 1):
        s = equidist.exp_sum(1, cfg.x, m, cfg.bits)
        bound = equidist.kn_bound(1, cfg.x, m)
        rows.append({
            "m": m,
            "modulus": repr(s.modulus),
            "bound": repr(bound),
            "ok": s.modulus <= bound,
            "prec_bits": 53,
        })
    return rows, ["m", "modulus", "bound", "ok", "prec_bits"]


def _cmd_exceptional(cfg: RunConfig):
    members = exactseq.exceptional_indices(cfg.x)
    row = {
        "x": cfg.x,
        "count": len(members),
        "members": ";".join(str(n) for n in members),
        "window_checked": all(exactseq.half_window_check(n) for n in members),
    }
    return [row], None


def _cmd_nearhalf(cfg: RunConfig):
    count, borderline = exactseq.near_half_count(cfg.x, cfg.bits)
    return [{"x": cfg.x, "count": count, "borderline": borderline,
             "bits": cfg.bits}], None


def _cmd_histogram(cfg: RunConfig):
    h = equidist.half_distance_histogram(cfg.x, cfg.bins)
    rows = [{"x": h.x, "bins": h.bins, "bin": j + 1, "count": c,
             "flagged_total": h.flagged}
            for j, c in enumerate(h.counts)]
    return rows, ["x", "bins", "bin", "count", "flagged_total"]


def _monomial_json(m: minimax.Monomial) -> dict:
    return {"monomial": m.format(),
            "exponents": {v: str(e) for v, e in m.exponents.items()}}


def _cmd_optimize(cfg: RunConfig):
    if cfg.preset:
        if cfg.preset != "moment-residual":
            raise ValueError(f"unknown preset {cfg.preset!r}")
        r = minimax.balance_moment_residual(cfg.k or 1)
        doc = {
            "preset": cfg.preset,
            "k": r.k,
            "segment_choice": _monomial_json(r.segment_choice),
            "truncation_choice": _monomial_json(r.truncation_choice),
            "residual_exponent": str(r.residual_exponent),
        }
        return [doc], None
    if not cfg.expr or not cfg.var:
        raise ValueError("optimize needs --expr and --var (or --preset)")
    F = None
    gs = []
    for part in cfg.expr.split(";"):
        name, _, body = part.partition("=")
        name = name.strip()
        if name == "F":
            F = minimax.Monomial.parse(body)
        elif name == "G":
            gs.append(minimax.Monomial.parse(body))
        else:
            raise ValueError(f"expected F=... or G=... in --expr, got {part!r}")
    if F is None or not gs:
        raise ValueError("--expr must define one F and at least one G")
    sol = minimax.solve_exponents(F, gs, cfg.var)
    doc = {
        "var": cfg.var,
        "argmin": _monomial_json(sol.argmin),
        "value": _monomial_json(sol.value),
        "crossings": [_monomial_json(c) for c in sol.crossings],
    }
    return [doc], None


def _cmd_fit(cfg: RunConfig):
    report = moments.fit_residual(cfg.xs, cfg.k, workers=cfg.workers, chunk=cfg.chunk)
    rows = [{
        "x": x, "k": cfg.k,
        "abs_residual": repr(v),
        "slope": repr(report.slope),
        "intercept": repr(report.intercept),
        "prec_bits": 53,
    } for x, v in zip(report.xs, report.values)]
    return rows, ["x", "k", "abs_residual", "slope", "intercept", "prec_bits"]


_HANDLERS = {
    "terms": _cmd_terms,
    "moments": _cmd_moments,
    "average": _cmd_average,
    "sandwich": _cmd_sandwich,
    "discrepancy": _cmd_discrepancy,
    "weyl": _cmd_weyl,
    "knbound": _cmd_knbound,
    "exceptional": _cmd_exceptional,
    "nearhalf": _cmd_nearhalf,
    "histogram": _cmd_histogram,
    "optimize": _cmd_optimize,
    "fit": _cmd_fit,
}


def run(config: RunConfig) -> int:
    """Execute one command and write its artifact; returns the exit status."""
    handler = _HANDLERS.get(config.command)
    if handler is None:
        print(f"unknown command {config.command!r}", file=sys.stderr)
        return 2
    try:
        rows, fieldnames = handler(config)
        fmt = "json" if config.command == "optimize" else config.out_format
        emit(rows, fmt, config.output, fieldnames)
    except CheckpointMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    try:
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--range expects LO:HI, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cannonball",
        description="Exact nearest-square distances of square pyramidal numbers: "
                    "sequence terms, moments, equidistribution and balancing tools.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", choices=["csv", "json"], default="csv",
                        dest="out_format", help="output format (default csv)")
    common.add_argument("--output", help="write to this path instead of stdout")
    common.add_argument("--workers", type=int, default=None,
                        help=f"worker processes (default ${ENV_WORKERS} or 1)")
    common.add_argument("--chunk", type=int, default=1 << 16,
                        help="index-range granularity for work splitting")
    common.add_argument("--bits", type=int, default=exactseq.DEFAULT_BITS,
                        help="fixed-point precision of fractional parts")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("terms", parents=[common], help="resolved sequence elements")
    p.add_argument("--range", type=_parse_range, required=True, metavar="LO:HI")

    p = sub.add_parser("moments", parents=[common], help="exact k-th moment")
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--checkpoint", help="checkpoint file for kill-resume")
    p.add_argument("--checkpoint-every", type=int, default=1 << 20,
                   help="indices between checkpoints")

    p = sub.add_parser("average", parents=[common], help="exact average A(x)")
    p.add_argument("--x", type=int, required=True)

    p = sub.add_parser("sandwich", parents=[common], help="rigorous moment bracketing")
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--L", type=int, required=True, help="even bin count")

    p = sub.add_parser("discrepancy", parents=[common],
                       help="star discrepancy of the fractional parts")
    p.add_argument("--x", type=int, required=True, help="number of points N")
    p.add_argument("--K", type=int, help="also compute the truncated sum bound")

    p = sub.add_parser("weyl", parents=[common], help="normalized Weyl sums")
    p.add_argument("--x", type=int, required=True, help="number of points N")
    p.add_argument("--m-max", type=int, default=5)

    p = sub.add_parser("knbound", parents=[common],
                       help="second-derivative bounds against computed sums")
    p.add_argument("--x", type=int, required=True, help="range end N")
    p.add_argument("--m-max", type=int, default=5)

    p = sub.add_parser("exceptional", parents=[common],
                       help="scan for nearest-square/nearest-integer disagreement")
    p.add_argument("--x", type=int, required=True)

    p = sub.add_parser("nearhalf", parents=[common],
                       help="count fractional parts within x^(-3/4) of 1/2")
    p.add_argument("--x", type=int, required=True)

    p = sub.add_parser("histogram", parents=[common],
                       help="distance histogram over [0, 1/2]")
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--bins", type=int, default=20)

    p = sub.add_parser("optimize", parents=[common],
                       help="balance a decreasing monomial against increasing ones")
    p.add_argument("--expr", help='e.g. "F=x:5/2,K:-1/2;G=x:19/8,K:1/4"')
    p.add_argument("--var", help="variable to balance")
    p.add_argument("--preset", choices=["moment-residual"],
                   help="built-in balancing chain")
    p.add_argument("--k", type=int, default=1)

    p = sub.add_parser("fit", parents=[common],
                       help="log-log slope of moment residuals")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--xs", required=True,
                   help="comma-separated snapshot points, e.g. 1000,10000,100000")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get(ENV_WORKERS, "1"))
    lo = hi = None
    if getattr(args, "range", None):
        lo, hi = args.range
    xs = None
    if getattr(args, "xs", None):
        xs = tuple(int(s) for s in args.xs.split(","))
    checkpoint = getattr(args, "checkpoint", None)
    if checkpoint and not os.path.isabs(checkpoint):
        ckdir = os.environ.get(ENV_CHECKPOINT_DIR)
        if ckdir:
            checkpoint = os.path.join(ckdir, checkpoint)
    return RunConfig(
        command=args.command,
        x=getattr(args, "x", None),
        lo=lo, hi=hi,
        k=getattr(args, "k", None),
        L=getattr(args, "L", None),
        K=getattr(args, "K", None),
        bins=getattr(args, "bins", None),
        m_max=getattr(args, "m_max", None),
        bits=args.bits,
        xs=xs,
        expr=getattr(args, "expr", None),
        var=getattr(args, "var", None),
        preset=getattr(args, "preset", None),
        workers=workers,
        chunk=args.chunk,
        out_format=args.out_format,
        output=args.output,
        checkpoint_path=checkpoint,
        checkpoint_every=getattr(args, "checkpoint_every", 1 << 20),
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
