"""Experiment orchestration: single runs with artifact output, sweeps with
normalized comparison tables and figures, and oracle verification."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from . import apps, metrics
from .config import ConfigError, RunConfig
from .engine import GridEngine, load_dataset
from .metrics import ENERGY_PROFILES, compute_energy, compute_teps


@dataclass
class RunResult:
    config: RunConfig
    engine: GridEngine
    results: dict
    summary: dict


def _result_bytes(values):
    return np.array(values, dtype=np.uint64).astype("<u8").tobytes()


def run_simulation(cfg: RunConfig, graph=None) -> RunResult:
    eng = GridEngine(cfg, graph)
    cycles = eng.run()
    results = eng.results()
    led = eng.ledger
    led.edges_traversed = eng.frontier_edges(results)

    model = ENERGY_PROFILES.get(cfg.energy_profile)
    if model is None:
        raise ConfigError([f"energy_profile: unknown profile "
                           f"{cfg.energy_profile!r}"])
    energy = compute_energy(led, model)
    teps = (compute_teps(led.edges_traversed, cycles, cfg.frequency_hz)
            if cycles > 0 else None)
    watts = (energy["total_joules"] / (cycles / cfg.frequency_hz)
             if cycles > 0 else None)
    summary = {
        "config": cfg.to_dict(),
        "resolved": {
            "region_width": eng.region_w,
            "pcache_capacity": eng.pcache_capacity,
            "num_vertices": eng.workload.graph.num_vertices,
            "num_edges": eng.workload.graph.num_edges,
        },
        "cycles": cycles,
        "edges_traversed": led.edges_traversed,
        "teps": teps,
        "teps_per_watt": (teps / watts if teps is not None and watts else None),
        "energy": energy,
        "counters": led.totals(),
        "results_sha256": {name: hashlib.sha256(_result_bytes(vals)).hexdigest()
                           for name, vals in sorted(results.items())},
    }
    return RunResult(cfg, eng, results, summary)


def write_artifacts(rr: RunResult, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(rr.config.to_dict(), f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(rr.summary, f, indent=2, sort_keys=True)
    for name, vals in sorted(rr.results.items()):
        with open(os.path.join(out_dir, f"result_{name}.bin"), "wb") as f:
            f.write(_result_bytes(vals))
    _write_metrics_csv(rr, os.path.join(out_dir, "metrics.csv"))
    eng = rr.engine
    if eng.recorder is not None:
        pu, rt = eng.recorder.finish(rr.summary["cycles"])
        np.savez(os.path.join(out_dir, "heatmap_frames.npz"),
                 pu_active=pu, router_active=rt,
                 window=np.int64(rr.config.heatmap_window))
    return out_dir


def _write_metrics_csv(rr: RunResult, path):
    eng = rr.engine
    rows = eng.samples if eng.samples else []
    final = {"cycle": rr.summary["cycles"]}
    final.update({k: v for k, v in rr.summary["counters"].items()
                  if isinstance(v, int)})
    cols = sorted({k for row in rows for k in row} | set(final))
    with open(path, "w", newline="") as f:
        wr = csv.DictWriter(f, fieldnames=cols)
        wr.writeheader()
        for row in rows:
            wr.writerow(row)
        wr.writerow(final)


def export_heatmaps(artifacts_dir, out_dir=None, render_png=True):
    npz_path = os.path.join(artifacts_dir, "heatmap_frames.npz")
    if not os.path.exists(npz_path):
        raise FileNotFoundError(f"{npz_path}: run with heatmap_window > 0 first")
    data = np.load(npz_path)
    out_dir = out_dir or os.path.join(artifacts_dir, "heatmaps")
    return metrics.export_heatmap_frames(data["pu_active"], data["router_active"],
                                         int(data["window"]), out_dir,
                                         render_png=render_png)


# -- verification -------------------------------------------------------------


def oracle_results_for(cfg: RunConfig, graph=None):
    if graph is None:
        graph = load_dataset(cfg)
    wl = apps.build_workload(cfg.workload, graph, cfg.workload_params())
    return wl.oracle_results()


def compare_results(actual: dict, expected: dict):
    """Element-wise exact comparison; reports the first divergence."""
    report = {"pass": True, "arrays": {}}
    for name in sorted(expected):
        exp = expected[name]
        act = actual.get(name)
        entry = {"length": len(exp)}
        if act is None:
            entry.update(status="missing")
            report["pass"] = False
        elif len(act) != len(exp):
            entry.update(status="length_mismatch", actual_length=len(act))
            report["pass"] = False
        else:
            diverge = -1
            for i, (a, b) in enumerate(zip(act, exp)):
                if a != b:
                    diverge = i
                    break
            if diverge >= 0:
                entry.update(status="mismatch", first_divergence=diverge,
                             actual=int(act[diverge]), expected=int(exp[diverge]))
                report["pass"] = False
            else:
                entry.update(status="match")
        report["arrays"][name] = entry
    return report


def verify_artifacts(artifacts_dir):
    """Recompute the sequential oracle from the stored config and compare it
    with the stored result arrays."""
    with open(os.path.join(artifacts_dir, "config.json")) as f:
        cfg = RunConfig.from_dict(json.load(f))
    expected = oracle_results_for(cfg)
    actual = {}
    for name in expected:
        path = os.path.join(artifacts_dir, f"result_{name}.bin")
        if os.path.exists(path):
            actual[name] = np.fromfile(path, dtype="<u8").tolist()
    return compare_results(actual, expected)


# -- sweeps ---------------------------------------------------------------------

SWEEP_AXES = ("mode", "region_width", "pcache_budget", "grid_size")


def _apply_axis(base: RunConfig, axis, value) -> RunConfig:
    d = base.to_dict()
    if axis == "mode":
        d["mode"] = value
    elif axis == "region_width":
        d["region_width"] = int(value)
    elif axis == "pcache_budget":
        d["pcache_budget_elems"] = int(value)
    elif axis == "grid_size":
        if isinstance(value, str):
            w, _, h = value.partition("x")
            d["grid_width"], d["grid_height"] = int(w), int(h or w)
        else:
            d["grid_width"] = d["grid_height"] = int(value)
    else:
        raise ConfigError([f"axis: unknown sweep axis {axis!r}; "
                           f"expected one of {SWEEP_AXES}"])
    return RunConfig.from_dict(d)


def run_sweep(base: RunConfig, axis, values, out_dir=None, graph=None):
    """Run every point with the identical dataset/seed; emit a normalized
    comparison table (baseline = first point). A failing point aborts the
    sweep but earlier rows are preserved in the returned record."""
    if graph is None:
        graph = load_dataset(base)
    rows = []
    failure = None
    for value in values:
        cfg = _apply_axis(base, axis, value).check()
        try:
            rr = run_simulation(cfg, graph)
        except Exception as exc:  # keep partial results
            failure = {"point": str(value), "error": f"{type(exc).__name__}: {exc}"}
            break
        led = rr.engine.ledger
        rows.append({
            "point": str(value),
            "cycles": rr.summary["cycles"],
            "flit_hops": led.flit_hops,
            "energy_joules": rr.summary["energy"]["total_joules"],
            "teps": rr.summary["teps"],
            "messages_injected": led.messages_injected,
            "messages_captured": led.messages_captured,
            "updates_filtered": int(led.updates_filtered.sum()),
            "updates_coalesced": int(led.updates_coalesced.sum()),
        })
        if out_dir:
            write_artifacts(rr, os.path.join(out_dir, f"point_{value}"))
    if rows:
        base_row = rows[0]
        for row in rows:
            row["speedup"] = (base_row["cycles"] / row["cycles"]
                              if row["cycles"] else float("nan"))
            row["traffic_reduction"] = (base_row["flit_hops"] / row["flit_hops"]
                                        if row["flit_hops"] else float("nan"))
            row["energy_efficiency"] = (
                base_row["energy_joules"] / row["energy_joules"]
                if row["energy_joules"] else float("nan"))
    record = {"axis": axis, "baseline": rows[0]["point"] if rows else None,
              "rows": rows, "failure": failure}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_sweep_csv(record, os.path.join(out_dir, "sweep_summary.csv"))
        with open(os.path.join(out_dir, "sweep_summary.json"), "w") as f:
            json.dump(record, f, indent=2, sort_keys=True)
        if rows:
            _render_sweep_figure(record, os.path.join(out_dir, "sweep_figure.png"))
    return record


def _write_sweep_csv(record, path):
    rows = record["rows"]
    cols = ["point", "cycles", "speedup", "flit_hops", "traffic_reduction",
            "energy_joules", "energy_efficiency", "teps",
            "messages_injected", "messages_captured", "updates_filtered",
            "updates_coalesced"]
    with open(path, "w", newline="") as f:
        wr = csv.DictWriter(f, fieldnames=cols)
        wr.writeheader()
        for row in rows:
            wr.writerow({c: row.get(c) for c in cols})


def _render_sweep_figure(record, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = record["rows"]
    points = [r["point"] for r in rows]
    panels = [("speedup", "speedup vs baseline"),
              ("traffic_reduction", "traffic reduction vs baseline"),
              ("energy_efficiency", "energy efficiency vs baseline")]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    for ax, (key, title) in zip(axes, panels):
        ax.bar(range(len(rows)), [r[key] for r in rows], color="#31688e")
        ax.axhline(1.0, color="grey", lw=0.8, ls="--")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(points, rotation=30, ha="right", fontsize=8)
        ax.set_title(title, fontsize=9)
        ax.set_xlabel(record["axis"], fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
