"""Command-line driver.

Every output starts with a reproducibility block: ``# run: {...}`` holds
all parameters that determine the result, and ``enhperc replay FILE``
regenerates the file byte for byte. Worker count and output path are not
part of the block; results never depend on them.

Exit codes: 0 success, 2 when an inequality check is violated, 1 on usage,
parse or margin errors.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from . import bond_config, continuum, mc_estimator, renormalizer
from .enhancement import FamilyError, MarginError, enhance, load_family, match_activations
from .events import crossing_event, gk_event, jkl_event, ln_event, one_arm_event
from .families import builtin
from .lattice import Box, GeometryError, Torus

EXIT_OK, EXIT_USAGE, EXIT_VIOLATED = 0, 1, 2
_NOT_RECORDED = {"workers", "out", "func", "replay_file"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    text = text.strip()
    if ":" in text:
        a, b, n = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in str(text).split(",") if x]


def get_family(spec, symmetrize=False):
    if spec is None:
        return None
    if spec.startswith("builtin:"):
        return builtin(spec.split(":", 1)[1])
    return load_family(spec, symmetrize)


def run_block(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_RECORDED}
    cfg["version"] = __version__
    return "run: " + json.dumps(cfg, sort_keys=True)


def _header(args):
    return f"# {run_block(args)}\n"


# -- event construction ----------------------------------------------------

EVENTS = ("H", "V", "one_arm", "G", "J", "L")


def build_event(args, family):
    ev = args.event
    dim = args.dim
    if family is not None and family.dim != dim:
        raise UsageError(f"family has dim {family.dim}, --dim is {dim}")
    if ev in ("H", "V"):
        if args.rect is None:
            raise UsageError("H/V need --rect half-widths, e.g. --rect 6,2")
        rect = Box.centered(tuple(_ints(args.rect)))
        if rect.dim != dim:
            raise UsageError("--rect must give one half-width per dimension")
        domain = rect.expand(args.margin) if args.margin is not None else None
        return crossing_event(rect, ev, family, args.k_max, domain)
    if ev == "one_arm":
        _need(args, "k")
        domain = Box.cube(args.k, dim).expand(args.margin) if args.margin is not None else None
        return one_arm_event(args.k, dim, family, args.k_max, domain)
    if family is None:
        raise UsageError(f"event {ev} needs --family")
    if ev == "G":
        _need(args, "k")
        domain = Box.cube(args.margin, dim) if args.margin is not None else None
        return gk_event(family, args.k, args.relaxed_anchor_scale, domain)
    if ev == "J":
        _need(args, "k", "l")
        return jkl_event(family, args.k, args.l)
    if ev == "L":
        _need(args, "n")
        domain = Box.cube(args.margin, dim) if args.margin is not None else None
        return ln_event(family, args.n, domain)
    raise UsageError(f"unknown event {ev!r}; choose from {', '.join(EVENTS)}")


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"--{n} is required here")


def _write(args, text):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_reports(args, reports, extra=None):
    if args.format == "csv":
        buf = ["# schema=1\n", _header(args), "name,relation,lhs,rhs_value,slack,pooled_se,verdict\n"]
        for r in reports:
            buf.append(f"{r.name},{r.relation},{r.lhs.p_hat!r},{r.rhs_value!r},{r.slack!r},{r.pooled_se!r},{r.verdict}\n")
        text = "".join(buf)
    else:
        doc = {"reports": [r.to_json() for r in reports]}
        if extra:
            doc.update(extra)
        text = _header(args) + json.dumps(doc, indent=1, sort_keys=True, default=_jsonable) + "\n"
    _write(args, text)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


# -- commands --------------------------------------------------------------

def cmd_sample(args):
    family = get_family(args.family, args.symmetrize)
    if args.torus is not None:
        domain = Torus(args.dim, args.torus)
    else:
        domain = Box.cube(args.box, args.dim)
    config = bond_config.sample(domain, args.p, args.seed, args.trial)
    out = [_header(args), bond_config.dumps(config)]
    if family is not None:
        acts = match_activations(config, family, args.k_max)
        graph = enhance(config, family, args.k_max, activations=acts)
        out.append(f"# activations {len(acts)}\n")
        for a in acts:
            out.append(f"# act {a.member} {a.rotation} {' '.join(map(str, a.anchor))}\n")
        extra = sorted(graph.new_edges)
        out.append(f"# extra_edges {len(extra)}\n")
        for u, v in extra:
            out.append(f"# extra {' '.join(map(str, u))} {' '.join(map(str, v))}\n")
    _write(args, "".join(out))
    return EXIT_OK


def _estimate_rows(args, ests):
    return mc_estimator.csv_text(ests, [run_block(args)])


def cmd_estimate(args):
    family = get_family(args.family, args.symmetrize)
    event = build_event(args, family)
    est = mc_estimator.estimate(event, args.p, args.trials, args.seed, workers=args.workers)
    if args.format == "csv":
        _write(args, _estimate_rows(args, [est]))
    else:
        doc = est.row() | {"params": est.params, "successes": est.successes}
        _write(args, _header(args) + json.dumps(doc, indent=1, sort_keys=True, default=_jsonable) + "\n")
    return EXIT_OK


def cmd_sweep(args):
    family = get_family(args.family, args.symmetrize)
    event = build_event(args, family)
    grid = _floats(args.p_grid)
    ests = mc_estimator.sweep(event, grid, args.trials, args.seed, workers=args.workers)
    if args.format == "csv":
        _write(args, _estimate_rows(args, ests))
    else:
        doc = {"sweep": [e.row() for e in ests]}
        _write(args, _header(args) + json.dumps(doc, indent=1, sort_keys=True, default=_jsonable) + "\n")
    return EXIT_OK


def cmd_verify(args):
    which = ["symcomp", "onearm", "occupancy"] if args.check == "all" else [args.check]
    reports = []
    for check in which:
        if check == "symcomp":
            fam = get_family(args.family or "builtin:two-level", args.symmetrize)
            reports += mc_estimator.verify_symcomp(fam, args.k or 1, args.l or 3, args.p, args.trials, args.seed,
                                                   args.relaxed_anchor_scale, args.reverse_inequality,
                                                   args.workers)
        elif check == "onearm":
            fam = get_family(args.family, args.symmetrize) if args.check == "onearm" else None
            reports.append(mc_estimator.verify_onearm(args.p, args.k or 2, args.j or 2, args.trials, args.seed,
                                                      fam, args.k_max, args.method, args.reverse_inequality,
                                                      args.workers))
        elif check == "occupancy":
            fam = get_family(args.family or "builtin:rotund", args.symmetrize)
            reports.append(mc_estimator.verify_occupancy(fam, args.n or 8, args.p, args.trials, args.seed,
                                                         not args.base_graph, args.reverse_inequality,
                                                         args.workers))
        elif check == "short-long":
            fam = get_family(args.family, args.symmetrize)
            s, l = mc_estimator.short_long_crossings(args.n or 8, args.rho, args.p, args.trials, args.seed,
                                                     fam, args.k_max)
            _emit_reports(args, [], {"short_way": s.row(), "long_way": l.row(),
                                     "note": "qualitative only: no homeomorphism is computed"})
            return EXIT_OK
    _emit_reports(args, reports)
    return EXIT_VIOLATED if any(r.verdict == "violated" for r in reports) else EXIT_OK


def cmd_renorm(args):
    fam = get_family(args.family or "builtin:plaquette", args.symmetrize)
    rep = renormalizer.renorm_field(args.p, args.k or 1, fam, args.grid, args.trials, args.seed, args.workers)
    if args.format == "csv":
        _write(args, _header(args) + rep.grid_csv())
    else:
        dom = renormalizer.domination_probe(rep.samples, rep.range_sets)
        doc = {"renorm": rep.summary(), "domination": {"r_max": dom.r_max, "label": dom.label,
                                                       "functionals": {str(b): v for b, v in dom.functionals.items()}}}
        _write(args, _header(args) + json.dumps(doc, indent=1, sort_keys=True, default=_jsonable) + "\n")
    return EXIT_OK


def _source(args, mu):
    if args.source == "block":
        return continuum.BlockResampledPoisson(mu, args.block)
    if args.source == "hardcore":
        return continuum.HardcorePoisson(mu, args.hardcore)
    return continuum.FullSource()


def _positive_list(text, flag):
    try:
        vals = _floats(str(text))
    except ValueError:
        raise UsageError(f"{flag} must be a number or comma list, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise UsageError(f"{flag} values must be positive")
    return vals


def _coupling_doc(args, shape, lam, mu):
    src = _source(args, mu)
    run = continuum.coupling_run(src, lam, args.trials, args.seed, shape, args.grid_step)
    rep = continuum.marginal_check(run["counts"], lam, (0, 1))
    doc = {k: v for k, v in run.items() if k not in ("counts", "runs")}
    doc.update(lam=lam, mu=mu, certified_lower_bound=src.certified_lower_bound(len(shape)))
    doc["marginal"] = rep.__dict__
    return doc


COUPLING_COLUMNS = ("lam", "mu", "N", "failures", "failure_rate", "certified_successes", "successes",
                    "occupancy", "certified_lower_bound")


def cmd_continuum(args):
    shape = tuple(_ints(args.tiles))
    lams, mus = _positive_list(args.lam, "--lam"), _positive_list(args.mu, "--mu")
    if args.mode != "coupling" and len(lams) > 1:
        raise UsageError("a --lam list is only accepted with --mode coupling")
    if args.mode == "points":
        region = continuum.TileGrid(shape).region
        s = continuum.sample_poisson(region, lams[0], args.seed, args.trial)
        _write(args, _header(args) + s.to_csv())
        return EXIT_OK
    if args.mode == "coupling":
        docs = [_coupling_doc(args, shape, lam, mu) for lam in lams for mu in mus]
        if len(docs) == 1:
            text = json.dumps(docs[0], indent=1, sort_keys=True, default=_jsonable) + "\n"
        elif args.format == "csv":
            # failure rates over the (lam, mu) grid
            rows = [",".join(str(d[c]) for c in COUPLING_COLUMNS) for d in docs]
            text = "# schema=1 coupling\n" + ",".join(COUPLING_COLUMNS) + "\n" + "\n".join(rows) + "\n"
        else:
            text = json.dumps(docs, indent=1, sort_keys=True, default=_jsonable) + "\n"
        _write(args, _header(args) + text)
        return EXIT_OK
    if args.mode == "disk":
        region = continuum.Region((0.0,) * len(shape), tuple(float(x) for x in shape))
        hits = continuum.disk_percolation_probe(lams[0], args.radius, region, args.trials, args.seed)
        lam_c = args.lambda_c if args.lambda_c is not None else continuum.lambda_c_placeholder(len(shape), args.radius)
        f = float(hits.mean())
        doc = {"crossing_freq": f, "se": float(np.sqrt(f * (1 - f) / args.trials)), "N": args.trials,
               "lambda_c_reference": lam_c, "lambda_c_is_placeholder": args.lambda_c is None}
        _write(args, _header(args) + json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return EXIT_OK
    raise UsageError(f"unknown mode {args.mode}")


def cmd_replay(args):
    with open(args.replay_file) as fh:
        for line in fh:
            if line.startswith("# run: "):
                cfg = json.loads(line[len("# run: "):])
                break
        else:
            raise UsageError(f"{args.replay_file}: no reproducibility block")
    if cfg.pop("version", __version__) != __version__:
        print("warning: produced by a different version", file=sys.stderr)
    ns = argparse.Namespace(**cfg)
    ns.workers = args.workers
    ns.out = args.out
    return COMMANDS[ns.command](ns)


COMMANDS = {"sample": cmd_sample, "estimate": cmd_estimate, "sweep": cmd_sweep, "verify": cmd_verify,
            "renorm": cmd_renorm, "continuum": cmd_continuum}


def make_parser():
    common = _Parser(add_help=False)
    common.add_argument("--family", help="family JSON file or builtin:NAME")
    common.add_argument("--symmetrize", action="store_true", help="symmetrize an unsymmetrized family file")
    common.add_argument("--dim", type=int, default=2)
    common.add_argument("--p", type=float, default=0.5)
    common.add_argument("--k", type=int)
    common.add_argument("--k-max", type=int, help="truncation level for crossings")
    common.add_argument("--l", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--j", type=int)
    common.add_argument("--rho", type=float, default=2.0)
    common.add_argument("--trials", type=int, default=10000)
    common.add_argument("--seed", type=int, default=20261014)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "text"), default="csv")
    common.add_argument("--margin", type=int, help="override the window (half-width or expansion)")
    common.add_argument("--relaxed-anchor-scale", type=float, default=1.0,
                        help="anchor box Lambda_{floor(c 2^k)} for G_k")

    p = _Parser(prog="enhperc", description="Enhancement percolation experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("sample", parents=[common], help="dump one configuration")
    s.add_argument("--box", type=int, default=4)
    s.add_argument("--torus", type=int)
    s.add_argument("--trial", type=int, default=0)

    for name in ("estimate", "sweep"):
        e = sub.add_parser(name, parents=[common])
        e.add_argument("--event", required=True)
        e.add_argument("--rect")
        if name == "sweep":
            e.add_argument("--p-grid", required=True, help="a,b,c or start:stop:count")

    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--check", choices=("symcomp", "onearm", "occupancy", "short-long", "all"), default="all")
    v.add_argument("--method", choices=("mc", "exact"), default="mc")
    v.add_argument("--base-graph", action="store_true", help="read the occupancy crossing in the base graph")
    v.add_argument("--reverse-inequality", action="store_true", help=argparse.SUPPRESS)

    r = sub.add_parser("renorm", parents=[common])
    r.add_argument("--grid", type=int, default=5)

    c = sub.add_parser("continuum", parents=[common])
    c.add_argument("--mode", choices=("points", "coupling", "disk"), default="coupling")
    c.add_argument("--lam", default="1.0", help="intensity; a comma list sweeps it in coupling mode")
    c.add_argument("--mu", default="32.0", help="source intensity; a comma list sweeps it in coupling mode")
    c.add_argument("--block", type=int, default=2)
    c.add_argument("--hardcore", type=float, default=0.02)
    c.add_argument("--source", choices=("block", "hardcore", "full"), default="block")
    c.add_argument("--tiles", default="8,8")
    c.add_argument("--grid-step", type=float, default=0.1)
    c.add_argument("--radius", type=float, default=1.0)
    c.add_argument("--lambda-c", type=float)
    c.add_argument("--trial", type=int, default=0)

    rp = sub.add_parser("replay", help="rerun the command recorded in a file")
    rp.add_argument("replay_file")
    rp.add_argument("--out")
    rp.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.command == "replay":
            return cmd_replay(args)
        if getattr(args, "trials", 1) <= 0:
            raise UsageError("--trials must be positive")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"enhperc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FamilyError, MarginError, GeometryError, ValueError, OSError) as exc:
        print(f"enhperc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
