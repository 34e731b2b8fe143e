"""Command-line interface: run, sweep, verify, gen-graph, export-heatmaps.

Exit codes: 0 ok, 1 verification failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, MODES, RunConfig, TOPOLOGIES, WORKLOAD_NAMES
from .graphs import attach_random_weights, generate_rmat, load_edge_list, write_csr
from .harness import (SWEEP_AXES, export_heatmaps, run_simulation, run_sweep,
                      verify_artifacts, write_artifacts)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG_ERROR = 2


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--workload", choices=WORKLOAD_NAMES)
    p.add_argument("--mode", help=f"execution mode, one of {', '.join(MODES)}")
    p.add_argument("--grid", help="grid size as WxH, e.g. 32x32")
    p.add_argument("--topology", choices=TOPOLOGIES)
    p.add_argument("--graph", dest="graph_path", help="binary CSR dataset file")
    p.add_argument("--rmat-scale", type=int)
    p.add_argument("--rmat-edge-factor", type=int)
    p.add_argument("--rmat-seed", type=int)
    p.add_argument("--region-width", type=int, help="proxy region width W; 0 = auto")
    p.add_argument("--pcache-budget", type=int, dest="pcache_budget_elems",
                   help="per-tile cache capacity in elements; 0 = auto")
    p.add_argument("--epochs", type=int, dest="pagerank_epochs")
    p.add_argument("--source", type=int, dest="source_vertex")
    p.add_argument("--seed", type=int)
    p.add_argument("--heatmap-window", type=int)
    p.add_argument("--sample-window", type=int)
    p.add_argument("--large", action="store_true", dest="allow_large",
                   help="lift the desk-scale grid/dataset guards")


def _config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        with open(args.config) as f:
            data.update(json.load(f))
    for key in ("workload", "mode", "topology", "graph_path", "rmat_scale",
                "rmat_edge_factor", "rmat_seed", "region_width",
                "pcache_budget_elems", "pagerank_epochs", "source_vertex",
                "seed", "heatmap_window", "sample_window"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if getattr(args, "grid", None):
        w, _, h = args.grid.partition("x")
        data["grid_width"] = int(w)
        data["grid_height"] = int(h or w)
    if getattr(args, "allow_large", False):
        data["allow_large"] = True
    return RunConfig.from_dict(data).check()


def cmd_run(args):
    cfg = _config_from_args(args)
    rr = run_simulation(cfg)
    out = write_artifacts(rr, args.out)
    s = rr.summary
    teps = f"{s['teps']:.3e}" if s["teps"] is not None else "n/a"
    print(f"workload={cfg.workload} mode={cfg.mode} grid={cfg.grid_width}x"
          f"{cfg.grid_height} W={s['resolved']['region_width']} "
          f"cycles={s['cycles']} flit_hops={s['counters']['flit_hops']} "
          f"teps={teps}")
    print(f"artifacts: {out}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config_from_args(args)
    values = args.values.split(",")
    record = run_sweep(cfg, args.axis, values, args.out)
    for row in record["rows"]:
        print(f"{args.axis}={row['point']:>20}  cycles={row['cycles']:>10} "
              f"speedup={row['speedup']:.3f} traffic_red={row['traffic_reduction']:.3f} "
              f"energy_eff={row['energy_efficiency']:.3f}")
    if record["failure"]:
        print(f"sweep aborted at {record['failure']['point']}: "
              f"{record['failure']['error']}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print(f"artifacts: {args.out}")
    return EXIT_OK


def cmd_verify(args):
    report = verify_artifacts(args.artifacts)
    for name, entry in report["arrays"].items():
        line = f"{name}: {entry['status']} (len {entry['length']})"
        if entry["status"] == "mismatch":
            line += (f" first divergence at index {entry['first_divergence']}: "
                     f"got {entry['actual']}, expected {entry['expected']}")
        print(line)
    if report["pass"]:
        print("verification PASS")
        return EXIT_OK
    print("verification FAIL")
    return EXIT_VERIFY_FAIL


def cmd_gen_graph(args):
    if args.from_edgelist:
        g = load_edge_list(args.from_edgelist)
    else:
        g = generate_rmat(args.scale, args.edge_factor, args.seed)
    if args.weights:
        g = attach_random_weights(g, args.seed)
    write_csr(g, args.out)
    print(f"wrote {args.out}: V={g.num_vertices} E={g.num_edges} "
          f"weighted={g.weights is not None}")
    return EXIT_OK


def cmd_export_heatmaps(args):
    paths = export_heatmaps(args.artifacts, args.out, render_png=not args.no_png)
    print(f"wrote {len(paths)} heatmap files under "
          f"{args.out or args.artifacts + '/heatmaps'}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="proxysim",
        description="Deterministic tiled-manycore simulator with proxy regions, "
                    "proxy caches, and selective cascading reduction trees.")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run one simulation and write artifacts")
    _add_config_flags(pr)
    pr.add_argument("--out", default="out/run", help="artifacts directory")
    pr.set_defaults(func=cmd_run)

    ps = sub.add_parser("sweep", help="run a sweep over one axis")
    _add_config_flags(ps)
    ps.add_argument("--axis", required=True, choices=SWEEP_AXES)
    ps.add_argument("--values", required=True,
                    help="comma-separated axis values")
    ps.add_argument("--out", default="out/sweep")
    ps.set_defaults(func=cmd_sweep)

    pv = sub.add_parser("verify", help="compare run artifacts with the "
                                       "sequential oracle")
    pv.add_argument("--artifacts", required=True)
    pv.set_defaults(func=cmd_verify)

    pg = sub.add_parser("gen-graph", help="generate or convert a CSR dataset")
    pg.add_argument("--scale", type=int, default=10)
    pg.add_argument("--edge-factor", type=int, default=16)
    pg.add_argument("--seed", type=int, default=1)
    pg.add_argument("--from-edgelist", help="convert a 'src dst [w]' text file")
    pg.add_argument("--weights", action="store_true",
                    help="attach seeded uniform weights in [1,255]")
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=cmd_gen_graph)

    ph = sub.add_parser("export-heatmaps", help="render PGM/CSV/PNG activity "
                                                "frames from run artifacts")
    ph.add_argument("--artifacts", required=True)
    ph.add_argument("--out", default=None)
    ph.add_argument("--no-png", action="store_true")
    ph.set_defaults(func=cmd_export_heatmaps)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error:\n" + "\n".join(f"  {e}" for e in exc.errors),
              file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
