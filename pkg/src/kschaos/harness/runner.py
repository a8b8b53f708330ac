"""Drive one experiment spec end to end and write its artifacts.

Every kind writes plot-ready CSV files into the output directory and then,
last, ``manifest.json`` via write-to-temp plus atomic rename.  A killed run
therefore leaves either no manifest or a complete one.  Per-run results are
cached under ``.cache/<spec hash>/`` so that ``resume`` can skip finished work;
particle trajectories resume from their own checkpoint files.
"""

import datetime
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .. import __version__
from ..diagnostics import chaos
from ..diagnostics.balance import entropy_balance_series
from ..diagnostics.entropy import entropy_grid, entropy_knn, fisher_grid
from ..diagnostics.moments import interaction_integral, moment
from ..diagnostics.report import REPORT_COLUMNS, DiagnosticsReport, csv_text, report_rows
from ..errors import ConfigError
from ..kernel import KernelParams
from ..meanfield.gridio import write_frames
from ..meanfield.solver import pde_solve
from ..particles import COLLISION_THRESHOLD, ParticleState, log_distance_stat, min_pairwise_distance, simulate
from .config import build_pde, canonical_json

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    path: str
    data: dict

    @property
    def artifacts(self):
        return {a["path"]: a["sha256"] for a in self.data["artifacts"]}


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="milliseconds")


def _write_text(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class _Cache:
    """One JSON file per finished unit of work, keyed by spec hash."""

    def __init__(self, out, spec_hash, enabled):
        self.dir = os.path.join(out, ".cache", spec_hash[:16])
        self.enabled = enabled
        os.makedirs(self.dir, exist_ok=True)

    def _path(self, key):
        return os.path.join(self.dir, key + ".json")

    def get(self, key):
        p = self._path(key)
        if not self.enabled or not os.path.exists(p):
            return None
        try:
            with open(p) as fh:
                return json.load(fh)
        except ValueError:
            return None

    def put(self, key, value):
        _write_text(self._path(key), json.dumps(value))


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def _cached_map(fn, tasks, keys, cache, jobs):
    """Run the tasks whose key is not cached yet; results come back in task order."""
    results = [cache.get(k) for k in keys]
    todo = [i for i, r in enumerate(results) if r is None]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(todo))) as ex:
            futs = {i: ex.submit(fn, tasks[i]) for i in todo}
            for i, f in futs.items():
                results[i] = f.result()
                cache.put(keys[i], results[i])
    else:
        for i in todo:
            results[i] = fn(tasks[i])
            cache.put(keys[i], results[i])
    return results


# ---- particle_run ---------------------------------------------------------


def _cloud_report(state, p, seed, k):
    pos = state.positions
    n = pos.shape[0]
    try:
        inter = interaction_integral(pos, p.alpha + 1.0)
        s_stat = log_distance_stat(state)
        h = entropy_knn(pos, k)
    except ValueError:
        inter = s_stat = h = None
    return DiagnosticsReport(
        time=state.time,
        entropy=h,
        m1=moment(pos, 1.0),
        s_stat=s_stat,
        min_dist=min_pairwise_distance(state),
        interaction=inter,
        n=n,
        seed=seed,
    )


def _particle_task(args):
    cfg, path, resume, k = args
    traj = simulate(cfg, checkpoint=path, resume=resume)
    reports = [_cloud_report(ParticleState(x, t), cfg.params, cfg.seed, k) for t, x in zip(traj.times, traj.positions)]
    events = [[cfg.seed, e.time, e.kind, None if math.isnan(e.threshold) else e.threshold] for e in traj.events]
    return [list(r) for r in report_rows(reports)], events


def _particle_run(spec, out, jobs, resume, cache):
    opts = spec.options
    tasks = []
    for s in spec.seeds:
        path = os.path.join(out, f"trajectory_seed{s}.kstraj") if opts["write_trajectory"] else None
        tasks.append((spec.sim.replace(seed=s), path, resume, opts["knn_k"]))
    results = _map(_particle_task, tasks, jobs)
    rows = [r for res in results for r in res[0]]
    events = [e for res in results for e in res[1]]
    rows.sort(key=lambda r: (r[2], r[0]))
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    _write_text(os.path.join(out, "particles.csv"), csv_text(REPORT_COLUMNS, rows))
    _write_text(os.path.join(out, "events.csv"), csv_text(("seed", "time", "kind", "threshold"), events))
    arts = ["particles.csv", "events.csv"]
    if opts["write_trajectory"]:
        for s in spec.seeds:
            arts += [f"trajectory_seed{s}.kstraj", f"trajectory_seed{s}.kstraj.events.jsonl"]
    return arts


# ---- pde_run --------------------------------------------------------------


def grid_report(f, p):
    return DiagnosticsReport(
        time=f.time,
        entropy=entropy_grid(f),
        fisher=fisher_grid(f),
        m1=moment(f, 1.0),
        interaction=interaction_integral(f, p.alpha + 1.0),
    )


def _pde_run(spec, out, jobs, resume, cache):
    cfg = spec.pde
    sol = pde_solve(cfg)
    p = cfg.params
    _write_text(os.path.join(out, "pde.csv"), csv_text(REPORT_COLUMNS, report_rows(grid_report(f, p) for f in sol)))
    _write_text(os.path.join(out, "events.csv"), csv_text(("time", "kind", "value"), [list(e) for e in sol.events]))
    arts = ["pde.csv", "events.csv"]
    if spec.options["write_frames"]:
        paths = write_frames(os.path.join(out, "frames"), sol.frames)
        arts += [os.path.relpath(q, out) for q in paths]
    return arts


# ---- chaos_table ----------------------------------------------------------


def _chaos_task(args):
    return asdict(chaos.chaos_run(*args))


def _chaos_table(spec, out, jobs, resume, cache):
    t = spec.options["t"]
    n_list = sorted(spec.options["n_list"])
    seeds = sorted(spec.seeds)
    pc = spec.pde.replace(t_end=t)
    pc = pc.replace(record_stride=max(1, pc.n_steps))
    sol = pde_solve(pc)
    f_t = sol.at(t)
    cfgs = chaos.chaos_configs(spec.sim, n_list, seeds, t)
    keys = [f"chaos_n{c.n_particles}_seed{c.seed}" for c in cfgs]
    res = _cached_map(_chaos_task, [(f_t, c) for c in cfgs], keys, cache, jobs)
    table = chaos.tabulate(t, [chaos.ChaosRun(**r) for r in res])
    _write_text(os.path.join(out, "chaos_table.csv"), csv_text(chaos.CHAOS_COLUMNS, chaos.chaos_rows(table)))
    return ["chaos_table.csv"]


# ---- entropy_balance ------------------------------------------------------

BALANCE_COLUMNS = (
    "n", "time", "entropy", "fisher", "interaction", "fisher_integral",
    "interaction_integral", "residual", "relative_residual",
)
BALANCE_SUMMARY_COLUMNS = ("n", "h", "time", "residual", "relative_residual", "shrink_factor")


def _balance_task(args):
    doc, n, dt, frame_dt = args
    cfg = build_pde(doc, n=n, dt=dt)
    cfg = cfg.replace(record_stride=max(1, int(round(frame_dt / cfg.step))))
    sol = pde_solve(cfg)
    s = entropy_balance_series(sol.frames, cfg.params)
    h0 = abs(s.entropy[0])
    rows = [
        [cfg.grid.nx, float(s.times[i]), float(s.entropy[i]), float(s.fisher[i]), float(s.interaction[i]),
         float(s.fisher_integral[i]), float(s.interaction_integral[i]), float(s.residual[i]), float(s.residual[i] / h0)]
        for i in range(len(s.times))
    ]
    return {"n": cfg.grid.nx, "h": cfg.grid.h, "rows": rows}


def _entropy_balance(spec, out, jobs, resume, cache):
    doc = spec.document["pde"]
    res = spec.options["resolutions"] or [{"n": doc["grid"]["n"], "dt": doc["dt"]}]
    tasks = [(doc, r["n"], r["dt"], spec.options["frame_dt"]) for r in res]
    keys = [f"balance_n{r['n']}_dt{r['dt']!r}" for r in res]
    results = sorted(_cached_map(_balance_task, tasks, keys, cache, jobs), key=lambda r: (r["n"], r["h"]))
    rows = [row for r in results for row in r["rows"]]
    summary, prev = [], None
    for r in results:
        last = r["rows"][-1]
        shrink = prev / last[7] if prev is not None and last[7] > 0 else None
        summary.append([r["n"], r["h"], last[1], last[7], last[8], shrink])
        prev = last[7]
    _write_text(os.path.join(out, "entropy_balance.csv"), csv_text(BALANCE_COLUMNS, rows))
    _write_text(os.path.join(out, "entropy_balance_summary.csv"), csv_text(BALANCE_SUMMARY_COLUMNS, summary))
    return ["entropy_balance.csv", "entropy_balance_summary.csv"]


# ---- coupling_check -------------------------------------------------------

COUPLING_COLUMNS = (
    "seed", "eps", "first_crossing", "records", "records_compared",
    "records_identical", "coupled", "max_diff_after",
)


def coupling_result(cfg, eps):
    """Compare an exact-kernel run with its eps-regularized twin driven by the same noise."""
    exact = simulate(cfg)
    reg_cfg = cfg.replace(params=KernelParams(cfg.params.alpha, cfg.params.chi, eps))
    reg = simulate(reg_cfg)
    tc = reg.first_crossing(eps)
    te = exact.first_crossing(COLLISION_THRESHOLD)
    times = exact.times
    before = times < tc if tc is not None else np.ones(len(times), bool)
    same = np.array([np.array_equal(a, b) for a, b in zip(exact.positions, reg.positions)])
    after = ~before
    max_after = float(np.max(np.abs(exact.positions[after] - reg.positions[after]))) if after.any() else None
    return {
        "seed": cfg.seed,
        "eps": eps,
        "first_crossing": tc,
        "records": int(len(times)),
        "records_compared": int(before.sum()),
        "records_identical": int(same[before].sum()),
        "coupled": bool(same[before].all()),
        "max_diff_after": max_after,
        "exact_below_1e-6": te,
    }


def _coupling_task(args):
    return coupling_result(*args)


def _coupling_check(spec, out, jobs, resume, cache):
    eps = spec.options["eps"]
    seeds = sorted(spec.seeds)
    keys = [f"coupling_seed{s}" for s in seeds]
    res = _cached_map(_coupling_task, [(spec.sim.replace(seed=s), eps) for s in seeds], keys, cache, jobs)
    rows = [[r[c] for c in COUPLING_COLUMNS] for r in res]
    _write_text(os.path.join(out, "coupling.csv"), csv_text(COUPLING_COLUMNS, rows))
    return ["coupling.csv"]


# ---- collision_scan -------------------------------------------------------

SCAN_COLUMNS = ("eps", "seed", "first_below_eps", "first_below_1e-6", "run_min_dist", "first_taming")


def scan_result(cfg):
    traj = simulate(cfg)
    eps = cfg.params.eps
    tame = [e.time for e in traj.events if e.kind == "taming_activated"]
    return {
        "eps": eps,
        "seed": cfg.seed,
        "first_below_eps": traj.first_crossing(eps) if eps > 0 else None,
        "first_below_1e-6": traj.first_crossing(COLLISION_THRESHOLD),
        "run_min_dist": traj.min_distance,
        "first_taming": tame[0] if tame else None,
    }


def _scan_task(cfg):
    return scan_result(cfg)


def _collision_scan(spec, out, jobs, resume, cache):
    eps_list = sorted(spec.options["eps_list"], reverse=True)
    seeds = sorted(spec.seeds)
    p = spec.sim.params
    cfgs = [spec.sim.replace(seed=s, params=KernelParams(p.alpha, p.chi, e)) for e in eps_list for s in seeds]
    keys = [f"scan_eps{c.params.eps!r}_seed{c.seed}" for c in cfgs]
    res = _cached_map(_scan_task, cfgs, keys, cache, jobs)
    rows = [[r[c] for c in SCAN_COLUMNS] for r in res]
    _write_text(os.path.join(out, "collision_scan.csv"), csv_text(SCAN_COLUMNS, rows))
    return ["collision_scan.csv"]


KIND_RUNNERS = {
    "particle_run": _particle_run,
    "pde_run": _pde_run,
    "chaos_table": _chaos_table,
    "entropy_balance": _entropy_balance,
    "coupling_check": _coupling_check,
    "collision_scan": _collision_scan,
}


def run_experiment(spec, *, out_dir=None, jobs=1, resume=False):
    """Run ``spec`` and return its manifest; artifacts land in out_dir (default spec.output_dir)."""
    out = os.path.abspath(out_dir or spec.output_dir)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", "/output_dir") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError("output directory is not writable", "/output_dir")
    manifest = os.path.join(out, MANIFEST)
    if os.path.exists(manifest):
        os.remove(manifest)
    digest = spec.spec_hash
    cache = _Cache(out, digest, enabled=resume)
    started, t0 = _now(), time.perf_counter()
    artifacts = KIND_RUNNERS[spec.kind](spec, out, max(1, int(jobs)), resume, cache)
    data = {
        "tool": "kschaos",
        "tool_version": __version__,
        "schema_version": spec.document["schema_version"],
        "kind": spec.kind,
        "spec_hash": digest,
        "spec": spec.document,
        "started": started,
        "finished": _now(),
        "wall_seconds": time.perf_counter() - t0,
        "jobs": int(jobs),
        "artifacts": [
            {"path": a, "sha256": sha256_file(os.path.join(out, a)), "bytes": os.path.getsize(os.path.join(out, a))}
            for a in artifacts
        ],
    }
    _write_text(manifest, json.dumps(data, indent=1, sort_keys=True) + "\n")
    return RunManifest(manifest, data)


def canonical_spec_text(spec):
    return canonical_json(spec.document)
