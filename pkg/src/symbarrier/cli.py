"""Command-line front end.

Exit codes: 0 when every requested check passes, 1 when a verification or
search fails (the JSON report is still printed), 2 on usage errors.
"""

import argparse
import json
import sys
from math import pi

import numpy as np

from . import __version__
from .capacity import barrier_bound, ellipsoid_capacity, find_barrier, stretched_domain
from .config import RunConfig
from .ellipsoid import Ellipsoid, slice_area, slice_area_monte_carlo, slice_area_scan, slice_area_sup
from .ellipsoid import width_min
from .embedding import EmbeddingMap, verify_displacement, verify_embedding
from .errors import SearchError, SymbarrierError
from .gridflow import FlowSettings, LemmaMap, build_cell_field, divergence_check
from .gridflow import export_field_csv, verify_cell_field
from .linalg import polterovich_matrix

SCHEMA_VERSION = "1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _nonnegative(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print a JSON document")
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--out", help="override run.output_dir")
    common.add_argument("--workers", type=int, help="override run.workers")

    p = _Parser(prog="symbarrier", description="Symplectic barrier toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, text in [("capacity", "capacity of A^L M_alpha B^4"),
                       ("lambda", "smallest width of A^L M_alpha B^4")]:
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--alpha", type=_positive, required=True)
        s.add_argument("--L", type=float, required=True)

    s = sub.add_parser("slice-area", parents=[common], help="slice area of M_alpha B^4")
    s.add_argument("--alpha", type=_positive, required=True)
    s.add_argument("--b", type=float, nargs=2, default=(0.0, 0.0), metavar=("BX", "BY"))
    s.add_argument("--scan", action="store_true", help="write a CSV scan over offsets")
    s.add_argument("--grid", type=int, default=41)
    s.add_argument("--mc", action="store_true", help="add a Monte Carlo estimate")

    s = sub.add_parser("bound", parents=[common], help="grid-barrier capacity bound")
    s.add_argument("--alpha", type=_positive, required=True)
    s.add_argument("--L", type=float, required=True)
    s.add_argument("--eps", type=_nonnegative, required=True)

    s = sub.add_parser("search", parents=[common], help="search for a barrier certificate")
    s.add_argument("--delta", type=_positive, required=True)
    s.add_argument("--emit-planes", action="store_true")

    s = sub.add_parser("flow", parents=[common], help="build or verify the cell field")
    s.add_argument("action", choices=["build", "verify"])
    s.add_argument("--resolution", type=_positive)
    s.add_argument("--samples", type=int)
    s.add_argument("--refine", action="store_true", help="also check divergence at h/2")

    s = sub.add_parser("embed", parents=[common], help="verify the embedding")
    s.add_argument("action", choices=["verify"])
    s.add_argument("--alpha", type=_positive, required=True)
    s.add_argument("--L", type=float, required=True)
    s.add_argument("--eps", type=_positive, required=True)
    s.add_argument("--samples", type=int)
    s.add_argument("--resolution", type=_positive)

    s = sub.add_parser("displace", parents=[common], help="verify the displacement flow")
    s.add_argument("action", choices=["verify"])
    s.add_argument("--t", type=_nonnegative, nargs="+", default=[0.5, 1.0, 2.0])
    s.add_argument("--r", type=float, default=0.9)
    s.add_argument("--samples", type=int)

    s = sub.add_parser("export-field", parents=[common], help="write the cell field CSV")
    s.add_argument("--resolution", type=_positive)
    s.add_argument("--path", help="CSV path (default: <out>/cell_field.csv)")
    return p


def _config(args):
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "resolution", None) is not None:
        cfg.cell["resolution"] = args.resolution
    cfg.validate()
    return cfg


def _cell_field(cfg, resolution=None):
    c = cfg.cell
    return build_cell_field(
        resolution=resolution or c["resolution"],
        puncture_radius=c["puncture_radius"],
        blend_radius=c["blend_radius"],
        samples_per_edge=int(c["samples_per_edge"]),
        tol_edge=cfg.tolerances["edge"],
        tol_vertex=cfg.tolerances["vertex"],
        settings=FlowSettings(base_step=c["base_step"]),
    )


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True)


def _write(cfg, name, obj):
    path = cfg.output_path(name)
    path.write_text(_dump(obj) + "\n", encoding="utf-8")
    return path


def _value(args, command, value, **parameters):
    if args.json:
        print(_dump({"schema_version": SCHEMA_VERSION, "command": command,
                     "value": value, "parameters": parameters}))
    else:
        print(f"{value:.12g}")
    return 0


def _report(args, cfg, name, report):
    report = dict(report, schema_version=SCHEMA_VERSION, config_hash=cfg.digest())
    path = _write(cfg, name, report)
    if args.json:
        print(_dump(report))
    else:
        state = "PASS" if report["failures"] == 0 else "FAIL"
        print(f"{report['check']}: {state}  failures={report['failures']}  "
              f"seed={report['seed']}  report={path}")
    return 0 if report["failures"] == 0 else 1


def cmd_capacity(args, cfg):
    E = stretched_domain(args.alpha, args.L)
    return _value(args, "capacity", ellipsoid_capacity(E), alpha=args.alpha, L=args.L)


def cmd_lambda(args, cfg):
    E = stretched_domain(args.alpha, args.L)
    return _value(args, "lambda", width_min(E), alpha=args.alpha, L=args.L)


def cmd_bound(args, cfg):
    value = barrier_bound(args.alpha, args.L, args.eps)
    return _value(args, "bound", value, alpha=args.alpha, L=args.L, eps=args.eps)


def cmd_slice_area(args, cfg):
    E = Ellipsoid(polterovich_matrix(args.alpha))
    b = np.asarray(args.b, dtype=float)
    params = {"alpha": args.alpha, "b": b.tolist()}
    if args.scan:
        rows = slice_area_scan(E, args.grid)
        path = cfg.output_path(f"slice_scan_alpha{args.alpha:g}.csv")
        np.savetxt(path, rows, delimiter=",", header="b_x,b_y,area", comments="", fmt="%.17g")
        best = slice_area_sup(E)
        params["scan"] = str(path)
        params["sup_offset"] = best.offset.tolist()
        params["sup_area"] = best.area
        if not args.json:
            print(f"scan written to {path}")
    if args.mc:
        n = cfg.samples["monte_carlo"]
        params["monte_carlo"] = slice_area_monte_carlo(E, b, n, seed=cfg.seed, workers=cfg.workers)
        params["monte_carlo_samples"] = n
        params["seed"] = cfg.seed
        if not args.json:
            print(f"monte carlo ({n} samples, seed {cfg.seed}): {params['monte_carlo']:.6g}")
    params["reference_closed_form"] = pi * args.alpha / (args.alpha**2 + 1)
    return _value(args, "slice-area", slice_area(E, b), **params)


def cmd_search(args, cfg):
    try:
        cert = find_barrier(args.delta)
    except SearchError as exc:
        report = {"schema_version": SCHEMA_VERSION, "error": str(exc), "best": exc.best,
                  "target_delta": args.delta}
        _write(cfg, f"certificate_delta{args.delta:g}.json", report)
        print(_dump(report))
        return 1
    doc = cert.to_dict(config_hash=cfg.digest(), emit_planes=args.emit_planes)
    doc["schema_version"] = SCHEMA_VERSION
    _write(cfg, f"certificate_delta{args.delta:g}.json", doc)
    print(_dump(doc))
    return 0 if cert.valid else 1


def cmd_flow(args, cfg):
    cf = _cell_field(cfg)
    if args.action == "build":
        report = {
            "check": "cell_field_build",
            "samples": 0,
            "failures": 0,
            "max_residual": divergence_check(cf),
            "seed": cfg.seed,
            "parameters": {"resolution": cf.resolution, "puncture_radius": cf.puncture_radius},
        }
        return _report(args, cfg, "flow_build.json", report)
    report = verify_cell_field(cf, cfg.samples["flow"], cfg.seed, tolerances=cfg.tolerances)
    if args.refine:
        fine = divergence_check(_cell_field(cfg, cf.resolution / 2))
        ratio = report["checks"]["divergence"]["value"] / fine
        ok = ratio >= cfg.tolerances["refinement_ratio"]
        report["checks"]["divergence_refinement_ratio"] = {"value": ratio, "passed": ok}
        report["failures"] += int(not ok)
    return _report(args, cfg, "flow_report.json", report)


def cmd_embed(args, cfg):
    cf = _cell_field(cfg)
    emb = EmbeddingMap(Ellipsoid(polterovich_matrix(args.alpha)), LemmaMap(args.eps, args.L, cf))
    report = verify_embedding(
        emb,
        samples=args.samples or cfg.samples["embed"],
        jacobian_points=cfg.samples["jacobian"],
        seed=cfg.seed,
        slack=cfg.tolerances["membership_slack"],
        symplectic_tol=cfg.tolerances["symplectic"],
    )
    report["parameters"]["alpha"] = args.alpha
    return _report(args, cfg, "embed_report.json", report)


def cmd_displace(args, cfg):
    report = verify_displacement(
        t_values=tuple(args.t), r=args.r, samples=args.samples or cfg.samples["positivity"],
        seed=cfg.seed,
    )
    return _report(args, cfg, "displace_report.json", report)


def cmd_export_field(args, cfg):
    cf = _cell_field(cfg)
    path = args.path or cfg.output_path("cell_field.csv")
    rows = export_field_csv(cf, path)
    if args.json:
        print(_dump({"schema_version": SCHEMA_VERSION, "command": "export-field",
                     "value": rows, "parameters": {"path": str(path),
                                                   "resolution": cf.resolution}}))
    else:
        print(f"wrote {rows} rows to {path}")
    return 0


COMMANDS = {
    "capacity": cmd_capacity,
    "lambda": cmd_lambda,
    "slice-area": cmd_slice_area,
    "bound": cmd_bound,
    "search": cmd_search,
    "flow": cmd_flow,
    "embed": cmd_embed,
    "displace": cmd_displace,
    "export-field": cmd_export_field,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"symbarrier: bad config: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cfg)
    except SymbarrierError as exc:
        print(f"symbarrier: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1


if __name__ == "__main__":
    sys.exit(main())
