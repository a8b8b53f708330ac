"""Strict JSON experiment specs: parsing, defaults and range checks.

Every error carries a JSON pointer to the offending field.  Unknown keys,
duplicate keys, NaN/Infinity literals and booleans posing as numbers are all
rejected.  The fully defaulted form of a spec is what gets hashed into the
run manifest.
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass

from ..errors import ConfigError, InvalidParamsError
from ..kernel import KernelParams
from ..meanfield.grid import GridSpec
from ..meanfield.solver import PdeConfig
from ..particles import BACKENDS, InitialCondition, SimConfig

SCHEMA_VERSION = 1
KINDS = ("particle_run", "pde_run", "chaos_table", "entropy_balance", "coupling_check", "collision_scan")

# which config sections each experiment kind consumes
SECTIONS = {
    "particle_run": ("sim",),
    "pde_run": ("pde",),
    "chaos_table": ("sim", "pde"),
    "entropy_balance": ("pde",),
    "coupling_check": ("sim",),
    "collision_scan": ("sim",),
}

ALPHA_MESSAGE = (
    "alpha must lie in the open interval (0, 1): the attraction kernel x/|x|^(alpha+1) "
    "is only handled in the sub-critical range; alpha = 1 is the critical Keller-Segel "
    "case, which the method does not cover"
)

INITIAL_DEFAULTS = {
    "gaussian": {"mean": [0.0, 0.0], "std": 1.0},
    "uniform_disk": {"center": [0.0, 0.0], "radius": 1.0},
    "two_clusters": {"centers": [[-1.0, 0.0], [1.0, 0.0]], "std": 0.5},
    "from_file": {"path": None},
}

SIM_DEFAULTS = {
    "n_particles": 64,
    "alpha": 0.5,
    "chi": 1.0,
    "eps": 0.0,
    "dt": 1e-3,
    "t_end": 0.1,
    "initial": {"kind": "gaussian"},
    "record_stride": 1,
    "taming": 0.0,
    "force_backend": "direct",
    "cell_cutoff": 0.1,
}

PDE_DEFAULTS = {
    "alpha": 0.5,
    "chi": 1.0,
    "grid": {"n": 128, "half_width": 6.0, "center": [0.0, 0.0]},
    "dt": 8e-4,
    "t_end": 0.5,
    "initial": {"kind": "gaussian"},
    "cfl_safety": 0.5,
    "record_stride": 1,
}

OPTION_DEFAULTS = {
    "particle_run": {"write_trajectory": True, "knn_k": 4},
    "pde_run": {"write_frames": True},
    "chaos_table": {"n_list": [128, 512, 2048], "t": 0.5},
    "entropy_balance": {"resolutions": [], "frame_dt": 0.005},
    "coupling_check": {"eps": 1e-3},
    "collision_scan": {"eps_list": [1e-2, 1e-3, 1e-4]},
}

TOP_KEYS = ("schema_version", "kind", "output_dir", "seeds", "sim", "pde", "options")


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError(f"duplicate key {k!r}", "")
        seen[k] = v
    return seen


def _no_constant(name):
    raise ConfigError(f"non-standard JSON literal {name}", "")


def parse_json(text):
    try:
        return json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_no_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}", "") from exc


def _ptr(base, key):
    key = str(key).replace("~", "~0").replace("/", "~1")
    return f"{base}/{key}"


def _object(v, ptr):
    if not isinstance(v, dict):
        raise ConfigError("expected an object", ptr)
    return v


def _merge(v, defaults, ptr):
    """Defaults filled in; unknown keys rejected."""
    v = _object(v, ptr)
    for k in v:
        if k not in defaults:
            raise ConfigError(f"unknown key {k!r}", _ptr(ptr, k))
    out = copy.deepcopy(defaults)
    out.update(v)
    return out


def _number(d, key, ptr, lo=None, hi=None, lo_open=False, hi_open=False, msg=None):
    p = _ptr(ptr, key)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError("expected a finite number", p)
    v = float(v)
    bad = (
        (lo is not None and (v < lo or (lo_open and v == lo)))
        or (hi is not None and (v > hi or (hi_open and v == hi)))
    )
    if bad:
        if msg is None:
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            msg = f"value {v!r} outside {lb}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}{rb}"
        raise ConfigError(msg, p)
    d[key] = v
    return v


def _integer(d, key, ptr, lo=None, hi=None):
    p = _ptr(ptr, key)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("expected an integer", p)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"value {v} outside [{lo}, {hi if hi is not None else 'inf'}]", p)
    return v


def _vec2(d, key, ptr):
    p = _ptr(ptr, key)
    v = d[key]
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError("expected a pair [x, y]", p)
    for i, c in enumerate(v):
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise ConfigError("expected a finite number", _ptr(p, i))
    d[key] = [float(c) for c in v]
    return d[key]


def _int_list(d, key, ptr, lo, nonempty=True):
    p = _ptr(ptr, key)
    v = d[key]
    if not isinstance(v, list) or (nonempty and not v):
        raise ConfigError("expected a non-empty list of integers", p)
    for i, c in enumerate(v):
        if isinstance(c, bool) or not isinstance(c, int) or c < lo or c >= 2**64:
            raise ConfigError(f"expected an integer in [{lo}, 2^64)", _ptr(p, i))
    if len(set(v)) != len(v):
        raise ConfigError("entries must be distinct", p)
    return v


def _initial(v, ptr):
    v = _object(v, ptr)
    kind = v.get("kind")
    if kind not in INITIAL_DEFAULTS:
        raise ConfigError(f"kind must be one of {sorted(INITIAL_DEFAULTS)}", _ptr(ptr, "kind"))
    d = _merge(v, {"kind": kind, **INITIAL_DEFAULTS[kind]}, ptr)
    if kind == "gaussian":
        _vec2(d, "mean", ptr)
        _number(d, "std", ptr, lo=0.0, lo_open=True)
    elif kind == "uniform_disk":
        _vec2(d, "center", ptr)
        _number(d, "radius", ptr, lo=0.0, lo_open=True)
    elif kind == "two_clusters":
        c = d["centers"]
        if not isinstance(c, list) or len(c) != 2:
            raise ConfigError("expected two centers", _ptr(ptr, "centers"))
        cp = _ptr(ptr, "centers")
        for i in range(2):
            _vec2(c, i, cp)
        _number(d, "std", ptr, lo=0.0, lo_open=True)
    else:
        if not isinstance(d["path"], str) or not d["path"]:
            raise ConfigError("expected a file path", _ptr(ptr, "path"))
    return d


def _kernel_fields(d, ptr):
    _number(d, "alpha", ptr, lo=0.0, hi=1.0, lo_open=True, hi_open=True, msg=ALPHA_MESSAGE)
    _number(d, "chi", ptr, lo=0.0)


def _sim(v, ptr):
    d = _merge(v, SIM_DEFAULTS, ptr)
    _integer(d, "n_particles", ptr, lo=2)
    _kernel_fields(d, ptr)
    _number(d, "eps", ptr, lo=0.0)
    _number(d, "dt", ptr, lo=0.0, lo_open=True)
    _number(d, "t_end", ptr, lo=0.0)
    d["initial"] = _initial(d["initial"], _ptr(ptr, "initial"))
    _integer(d, "record_stride", ptr, lo=1)
    _number(d, "taming", ptr, lo=0.0)
    if d["force_backend"] not in BACKENDS:
        raise ConfigError(f"must be one of {list(BACKENDS)}", _ptr(ptr, "force_backend"))
    _number(d, "cell_cutoff", ptr, lo=0.0, lo_open=True)
    return d


def _grid(v, ptr):
    d = _merge(v, PDE_DEFAULTS["grid"], ptr)
    _integer(d, "n", ptr, lo=16)
    _number(d, "half_width", ptr, lo=0.0, lo_open=True)
    _vec2(d, "center", ptr)
    return d


def _pde(v, ptr):
    d = _merge(v, PDE_DEFAULTS, ptr)
    _kernel_fields(d, ptr)
    d["grid"] = _grid(d["grid"], _ptr(ptr, "grid"))
    _number(d, "dt", ptr, lo=0.0, lo_open=True)
    _number(d, "t_end", ptr, lo=0.0)
    d["initial"] = _initial(d["initial"], _ptr(ptr, "initial"))
    _number(d, "cfl_safety", ptr, lo=0.0, hi=1.0, lo_open=True)
    _integer(d, "record_stride", ptr, lo=1)
    return d


def _options(kind, v, ptr):
    d = _merge(v, OPTION_DEFAULTS[kind], ptr)
    if kind == "particle_run":
        if not isinstance(d["write_trajectory"], bool):
            raise ConfigError("expected true or false", _ptr(ptr, "write_trajectory"))
        _integer(d, "knn_k", ptr, lo=1)
    elif kind == "pde_run":
        if not isinstance(d["write_frames"], bool):
            raise ConfigError("expected true or false", _ptr(ptr, "write_frames"))
    elif kind == "chaos_table":
        _int_list(d, "n_list", ptr, lo=2)
        _number(d, "t", ptr, lo=0.0, lo_open=True)
    elif kind == "entropy_balance":
        res = d["resolutions"]
        rp = _ptr(ptr, "resolutions")
        if not isinstance(res, list):
            raise ConfigError("expected a list of {n, dt} objects", rp)
        for i, r in enumerate(res):
            r = _merge(r, {"n": None, "dt": None}, _ptr(rp, i))
            _integer(r, "n", _ptr(rp, i), lo=16)
            _number(r, "dt", _ptr(rp, i), lo=0.0, lo_open=True)
            res[i] = r
        _number(d, "frame_dt", ptr, lo=0.0, lo_open=True)
    elif kind == "coupling_check":
        _number(d, "eps", ptr, lo=0.0, lo_open=True)
    elif kind == "collision_scan":
        p = _ptr(ptr, "eps_list")
        v = d["eps_list"]
        if not isinstance(v, list) or not v:
            raise ConfigError("expected a non-empty list of numbers", p)
        for i in range(len(v)):
            _number(v, i, p, lo=0.0)
        if len(set(v)) != len(v):
            raise ConfigError("entries must be distinct", p)
    return d


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    output_dir: str
    seeds: tuple
    sim: SimConfig = None
    pde: PdeConfig = None
    options: dict = None
    document: dict = None  # fully defaulted JSON form

    @property
    def spec_hash(self):
        return spec_hash(self.document)


def canonical_json(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def spec_hash(doc):
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def _initial_condition(d):
    return InitialCondition.from_dict({k: (tuple(map(tuple, v)) if k == "centers" else v) for k, v in d.items()})


def build_sim(d, ptr="/sim"):
    try:
        return SimConfig(
            n_particles=d["n_particles"],
            params=KernelParams(d["alpha"], d["chi"], d["eps"]),
            dt=d["dt"],
            t_end=d["t_end"],
            initial=_initial_condition(d["initial"]),
            record_stride=d["record_stride"],
            taming=d["taming"],
            force_backend=d["force_backend"],
            cell_cutoff=d["cell_cutoff"],
        )
    except InvalidParamsError as exc:
        raise ConfigError(str(exc), ptr) from exc


def build_pde(d, ptr="/pde", n=None, dt=None):
    g = d["grid"]
    try:
        grid = GridSpec.square(n or g["n"], g["half_width"], tuple(g["center"]))
        return PdeConfig(
            params=KernelParams(d["alpha"], d["chi"]),
            grid=grid,
            dt=dt or d["dt"],
            t_end=d["t_end"],
            initial=_initial_condition(d["initial"]),
            cfl_safety=d["cfl_safety"],
            record_stride=d["record_stride"],
        )
    except InvalidParamsError as exc:
        raise ConfigError(str(exc), ptr) from exc


def validate_document(raw):
    """Validate an already-parsed JSON document; returns an ExperimentSpec."""
    raw = _object(raw, "")
    for k in raw:
        if k not in TOP_KEYS:
            raise ConfigError(f"unknown key {k!r}", _ptr("", k))
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {list(KINDS)}", "/kind")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if isinstance(version, bool) or version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (this build reads {SCHEMA_VERSION})", "/schema_version")
    out_dir = raw.get("output_dir", f"ks_out/{kind}")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("expected a directory path", "/output_dir")
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "output_dir": out_dir}
    doc["seeds"] = raw.get("seeds", [0])
    _int_list(doc, "seeds", "", lo=0)
    for sec in ("sim", "pde"):
        if sec in raw and sec not in SECTIONS[kind]:
            raise ConfigError(f"section not used by kind {kind!r}", f"/{sec}")
    sim = pde = None
    if "sim" in SECTIONS[kind]:
        doc["sim"] = _sim(raw.get("sim", {}), "/sim")
        sim = build_sim(doc["sim"])
    if "pde" in SECTIONS[kind]:
        doc["pde"] = _pde(raw.get("pde", {}), "/pde")
        pde = build_pde(doc["pde"])
    doc["options"] = _options(kind, raw.get("options", {}), "/options")
    _cross_checks(kind, doc, sim, pde)
    return ExperimentSpec(kind, out_dir, tuple(doc["seeds"]), sim, pde, doc["options"], doc)


def _cross_checks(kind, doc, sim, pde):
    opts = doc["options"]
    if kind == "chaos_table":
        # the PDE reference is integrated to t itself; pde.t_end is not used here
        t = opts["t"]
        n = round(t / sim.dt)
        if abs(n * sim.dt - t) > 1e-9 * t:
            raise ConfigError("t must be an integer multiple of the particle dt", "/options/t")
        for i, n in enumerate(opts["n_list"]):
            if 2 * n > 4096:
                raise ConfigError("N particles plus an N-point reference must fit the exact W1 cap of 4096", f"/options/n_list/{i}")
    if kind == "coupling_check" and sim.params.eps != 0.0:
        raise ConfigError("the coupling check starts from the exact kernel; set eps to 0", "/sim/eps")
    if kind == "entropy_balance":
        for i, r in enumerate(opts["resolutions"]):
            build_pde(doc["pde"], f"/options/resolutions/{i}", n=r["n"], dt=r["dt"])


def validate_config(text):
    """Parse strict JSON text into a fully defaulted ExperimentSpec."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError("config is not valid UTF-8", "") from exc
    return validate_document(parse_json(text))
