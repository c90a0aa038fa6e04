"""Command-line front end: one subcommand per operation, one report per run.

JSON reports are written with sorted keys; non-finite numbers appear as
the strings "inf", "-inf" and "nan".  Curve commands (gurarii, clarkson)
default to CSV with a header row:

  gurarii   theta,beta,bound[,delta]
  clarkson  theta,delta,beta_search

Exit codes: 0 computed (any verdict), 2 invalid input, 3 unsupported
space pair.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import duals, geometry, matrix_classes, taylor_ops
from . import sequences as sq
from .numerics_core import PreconditionError, TruncationBudget, as_params
from .sequences import SpaceId

EXIT_OK, EXIT_INVALID, EXIT_UNSUPPORTED = 0, 2, 3

CSV_COMMANDS = ("gurarii", "clarkson")

CSV_HELP = """CSV columns:
  gurarii   theta,beta,bound   (plus delta with --delta)
  clarkson  theta,delta,beta_search
"""


@dataclass
class RunConfig:
    command: str
    r: float | None = None
    p: float = 2.0
    trunc: int | None = None
    rows: int | None = None
    tol: float | None = None
    seed: int = 0
    fmt: str = "json"
    dps: int | None = None
    extra: dict = field(default_factory=dict)

    def budget(self) -> TruncationBudget:
        kw = {}
        if self.tol is not None:
            kw["abs_tol"] = self.tol
        if self.dps is not None:
            kw["dps"] = self.dps
        if self.rows is not None:
            kw["max_row"] = self.rows
        if self.trunc is not None:
            return TruncationBudget.with_cutoff(self.trunc, **kw)
        return TruncationBudget(**kw)

    def validate(self) -> None:
        if self.r is not None:
            as_params(self.r)
        if not (self.p >= 1.0):
            raise PreconditionError(f"--p must be >= 1, got {self.p}")
        if self.trunc is not None and self.trunc < 1:
            raise PreconditionError("--trunc must be >= 1")
        if self.rows is not None and self.rows < 0:
            raise PreconditionError("--rows must be >= 0")
        if self.tol is not None and not (self.tol > 0):
            raise PreconditionError("--tol must be positive")
        if self.fmt == "csv" and self.command not in CSV_COMMANDS:
            raise PreconditionError(f"--format csv is only available for {', '.join(CSV_COMMANDS)}")
        self.budget()

    def echo(self) -> dict:
        out = {"command": self.command, "r": self.r, "p": self.p, "trunc": self.trunc,
               "rows": self.rows, "tol": self.tol, "seed": self.seed, "dps": self.dps}
        out.update(self.extra)
        return out


# --------------------------------------------------------------------------
# serialization


def _clean(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _clean(obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    try:
        return _clean(float(obj))
    except (TypeError, ValueError):
        return str(obj)


def dump_json(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def _read_arg(text: str) -> str:
    if text.startswith("@"):
        try:
            with open(text[1:], encoding="utf-8") as fh:
                return fh.read()
        except OSError as exc:
            raise PreconditionError(f"cannot read {text[1:]}: {exc}") from exc
    return text


def _seq(text: str | None, what: str = "--seq"):
    if text is None:
        raise PreconditionError(f"{what} is required")
    return sq.loads(_read_arg(text))


def _need_r(cfg: RunConfig) -> float:
    if cfg.r is None:
        raise PreconditionError("--r is required")
    return cfg.r


def _space(name: str, cfg: RunConfig) -> SpaceId:
    try:
        return SpaceId.parse(name, cfg.p, cfg.r)
    except PreconditionError:
        raise
    except (TypeError, ValueError) as exc:
        raise PreconditionError(f"bad space {name!r}: {exc}") from exc


# --------------------------------------------------------------------------
# commands


def cmd_transform(cfg, args, inverse=False):
    x = _seq(args.seq)
    cfg.extra["seq"] = sq.to_json_obj(x)
    op = taylor_ops.apply_inverse if inverse else taylor_ops.apply_taylor
    return {"result": op(_need_r(cfg), x, cfg.budget()).to_dict()}


def cmd_roundtrip(cfg, args):
    x = _seq(args.seq)
    cfg.extra["seq"] = sq.to_json_obj(x)
    b = cfg.budget()
    d = taylor_ops.roundtrip_defect(_need_r(cfg), x, b)
    tol = args.check_tol
    return {"defect": d, "tolerance": tol, "within_tolerance": d <= tol,
            "certified": math.isfinite(d)}


def cmd_compose(cfg, args):
    s = args.s
    if s is None:
        raise PreconditionError("--s is required")
    grid = args.k if args.k is not None else 40
    cfg.extra.update({"s": s, "grid": grid})
    d_comp, d_claim = taylor_ops.compose_defect(_need_r(cfg), s, cfg.budget(), grid)
    r = cfg.r
    return {"composed_r": r + s - r * s, "defect_vs_composed": d_comp,
            "euler_q": (1 - r) * (1 - s), "defect_vs_euler_transpose": d_claim,
            "exact_window": True}


def cmd_norm(cfg, args):
    x = _seq(args.seq)
    sp = _space(args.space or "tp", cfg)
    cfg.extra.update({"seq": sq.to_json_obj(x), "space": sp.label()})
    if sp.is_taylor:
        res = taylor_ops.space_norm(x, sp, cfg.budget())
    else:
        if sp.tag not in ("lp", "linf"):
            raise PreconditionError("norm supports tp, tinf, lp, l1 and linf")
        res = sq.p_norm(x, sp.exponent, cfg.budget())
    return {"norm": res.to_dict()}


def cmd_basis(cfg, args):
    x = _seq(args.seq)
    K = args.k
    if K is None:
        raise PreconditionError("--k is required")
    cfg.extra.update({"seq": sq.to_json_obj(x), "k": K})
    ex = taylor_ops.basis_expand(_need_r(cfg), x, K, cfg.p, cfg.budget())
    return {"expansion": dataclasses.asdict(ex)}


def cmd_dual(cfg, args):
    a = _seq(args.seq)
    name = args.space or "tp"
    if name != "t1" and name not in ("tp", "tinf"):
        raise PreconditionError("dual-check needs --space tp, t1 or tinf")
    r = _need_r(cfg)
    sp = _space(name, cfg)
    cfg.extra.update({"seq": sq.to_json_obj(a), "space": sp.label(), "kind": args.kind})
    q = duals.DualQuery(a, as_params(r), sp, args.kind, budget=cfg.budget(),
                        subset_budget=duals.SubsetBudget(seed=cfg.seed))
    rep = duals.run_query(q)
    return {"report": rep.to_dict()}


def cmd_class(cfg, args):
    if args.matrix is None:
        raise PreconditionError("--matrix is required")
    A = matrix_classes.matrix_loads(_read_arg(args.matrix))
    if args.source is None or args.target is None:
        raise PreconditionError("--from and --to are required")
    src, tgt = _space(args.source, cfg), _space(args.target, cfg)
    cfg.extra.update({"matrix": A.to_json_obj(), "from": src.label(), "to": tgt.label()})
    q = matrix_classes.ClassQuery(A, src, tgt, as_params(cfg.r) if cfg.r is not None else None,
                                  cfg.budget(), duals.SubsetBudget(seed=cfg.seed))
    return {"report": matrix_classes.class_check(q).to_dict()}


def _thetas(args) -> list[float]:
    if args.theta is not None:
        return [args.theta]
    return geometry.parse_grid(args.theta_grid or "0.1:2.0:0.1")


def cmd_gurarii(cfg, args):
    r = _need_r(cfg)
    thetas = _thetas(args)
    cfg.extra.update({"thetas": thetas, "delta": args.delta})
    reps = geometry.gurarii_grid(r, cfg.p, thetas, with_delta=args.delta, dim=args.dim,
                                 samples=args.samples, seed=cfg.seed, budget=cfg.budget())
    if cfg.fmt == "csv":
        return geometry.modulus_csv(reps, args.delta)
    return {"reports": [m.to_dict() for m in reps]}


def cmd_clarkson(cfg, args):
    thetas = _thetas(args)
    cfg.extra.update({"thetas": thetas, "dim": args.dim, "samples": args.samples})
    res = [geometry.clarkson_search(cfg.p, t, args.dim, args.samples, cfg.r, cfg.seed)
           for t in thetas]
    if cfg.fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "delta", "beta_search"])
        for c in res:
            w.writerow([repr(c.theta), repr(c.delta_estimate), repr(c.beta_search)])
        return buf.getvalue()
    return {"estimates": [c.to_dict() for c in res], "upper_bound": True}


def cmd_banach_saks(cfg, args):
    r = _need_r(cfg)
    n = args.k if args.k is not None else 64
    fam = geometry.orthogonal_image_family(r, n + 1)
    conf = geometry.BanachSaksConfig(geometry.default_eps(n + 1), fam, cfg.p, r, cfg.budget())
    sel = geometry.banach_saks_select(conf)
    chk = geometry.banach_saks_check(sel, conf)
    wn = geometry.weak_null_check(fam, r, budget=cfg.budget())
    cfg.extra.update({"family": "T^-1 e^(n)", "n": n})
    return {"selection": sel.to_dict(), "check": chk.to_dict(), "weak_null": wn.to_dict()}


def cmd_gfc(cfg, args):
    r = _need_r(cfg)
    probes = [_seq(t) for t in args.probe] if args.probe else None
    n_max = args.n_max
    cfg.extra.update({"n_max": n_max,
                      "probes": [sq.to_json_obj(x) for x in probes] if probes else "default"})
    rep = geometry.garcia_falset_estimate(r, cfg.p, n_max, probes, cfg.budget())
    return {"report": rep.to_dict()}


COMMANDS = {
    "transform": cmd_transform,
    "inverse": lambda c, a: cmd_transform(c, a, inverse=True),
    "roundtrip": cmd_roundtrip,
    "compose-check": cmd_compose,
    "norm": cmd_norm,
    "basis": cmd_basis,
    "dual-check": cmd_dual,
    "class-check": cmd_class,
    "gurarii": cmd_gurarii,
    "clarkson": cmd_clarkson,
    "banach-saks": cmd_banach_saks,
    "gfc": cmd_gfc,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--r", type=float, help="Taylor order r")
    common.add_argument("--p", type=float, default=2.0, help="exponent p (default 2)")
    common.add_argument("--trunc", type=int, help="column cutoff (ladder up to this value)")
    common.add_argument("--rows", type=int, help="row cutoff")
    common.add_argument("--tol", type=float, help="absolute tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)
    common.add_argument("--dps", type=int, help="force mpmath precision (decimal digits)")

    ap = argparse.ArgumentParser(prog="taylorspace", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog=CSV_HELP)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], epilog=CSV_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        if name in ("transform", "inverse", "roundtrip", "norm", "basis", "dual-check"):
            sp.add_argument("--seq", help="sequence JSON or @file")
        if name == "roundtrip":
            sp.add_argument("--check-tol", type=float, default=1e-10)
        if name == "compose-check":
            sp.add_argument("--s", type=float)
        if name in ("compose-check", "basis", "banach-saks"):
            sp.add_argument("--k", type=int, help="grid size / cutoff K / family length")
        if name in ("norm", "dual-check"):
            sp.add_argument("--space", help="space name: tp, t1, tinf, lp, l1, linf")
        if name == "dual-check":
            sp.add_argument("--kind", choices=("alpha", "beta", "gamma"), default="beta")
        if name == "class-check":
            sp.add_argument("--matrix", help="matrix JSON or @file")
            sp.add_argument("--from", dest="source")
            sp.add_argument("--to", dest="target")
        if name in ("gurarii", "clarkson"):
            sp.add_argument("--theta-grid", help="a:b:step (default 0.1:2.0:0.1)")
            sp.add_argument("--theta", type=float)
            sp.add_argument("--dim", type=int, default=4)
            sp.add_argument("--samples", type=int, default=2000)
        if name == "gurarii":
            sp.add_argument("--delta", action="store_true", help="add Clarkson estimates")
        if name == "gfc":
            sp.add_argument("--n-max", type=int, default=512)
            sp.add_argument("--probe", action="append", help="probe JSON or @file (repeatable)")
    return ap


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    fmt = args.fmt or ("csv" if args.command in CSV_COMMANDS else "json")
    cfg = RunConfig(args.command, args.r, args.p, args.trunc, args.rows, args.tol,
                    args.seed, fmt, args.dps)
    try:
        cfg.validate()
        body = COMMANDS[args.command](cfg, args)
    except matrix_classes.UnsupportedPairError as exc:
        print(f"unsupported pair: {exc}", file=sys.stderr)
        out.write(dump_json({"inputs": cfg.echo(), "error": "unsupported_pair", "message": str(exc)}))
        return EXIT_UNSUPPORTED
    except PreconditionError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        out.write(dump_json({"inputs": cfg.echo(), "error": "invalid_input", "message": str(exc)}))
        return EXIT_INVALID
    if isinstance(body, str):
        out.write(body)
    else:
        out.write(dump_json({"inputs": cfg.echo(), **body}))
    return EXIT_OK


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
