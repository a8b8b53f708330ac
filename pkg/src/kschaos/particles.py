"""N-particle system with the exact or cut-off kernel, Euler-Maruyama in time."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _forces
from .errors import CollisionError, FileFormatError, InvalidParamsError
from .kernel import KernelParams
from .rng import INITIAL_DOMAIN, CounterNormals, generator

BACKENDS = ("direct", "cell_list")
COLLISION_THRESHOLD = 1e-6
# a step counts as tamed when the drift is shortened by more than this fraction
TAMING_EVENT_LEVEL = 0.01


@dataclass(frozen=True)
class InitialCondition:
    kind: str
    mean: tuple = (0.0, 0.0)
    std: float = 1.0
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    centers: tuple = ((-1.0, 0.0), (1.0, 0.0))
    path: str = ""

    KINDS = ("gaussian", "uniform_disk", "two_clusters", "from_file")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidParamsError(f"unknown initial condition kind {self.kind!r}")
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "centers", tuple(tuple(float(v) for v in c) for c in self.centers))
        if self.kind in ("gaussian", "two_clusters") and not self.std > 0:
            raise InvalidParamsError("std must be > 0")
        if self.kind == "uniform_disk" and not self.radius > 0:
            raise InvalidParamsError("radius must be > 0")
        if self.kind == "two_clusters" and len(self.centers) != 2:
            raise InvalidParamsError("two_clusters needs exactly two centers")
        if self.kind == "from_file" and not self.path:
            raise InvalidParamsError("from_file needs a path")

    @classmethod
    def gaussian(cls, mean=(0.0, 0.0), std=1.0):
        return cls("gaussian", mean=mean, std=std)

    @classmethod
    def uniform_disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls("uniform_disk", center=center, radius=radius)

    @classmethod
    def two_clusters(cls, centers, std):
        return cls("two_clusters", centers=centers, std=std)

    @classmethod
    def from_file(cls, path):
        return cls("from_file", path=str(path))

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": "gaussian", "mean": list(self.mean), "std": self.std}
        if self.kind == "uniform_disk":
            return {"kind": "uniform_disk", "center": list(self.center), "radius": self.radius}
        if self.kind == "two_clusters":
            return {"kind": "two_clusters", "centers": [list(c) for c in self.centers], "std": self.std}
        return {"kind": "from_file", "path": self.path}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class SimConfig:
    n_particles: int
    params: KernelParams
    dt: float
    t_end: float
    seed: int = 0
    initial: InitialCondition = field(default_factory=InitialCondition.gaussian)
    record_stride: int = 1
    taming: float = 0.0
    force_backend: str = "direct"
    cell_cutoff: float = 0.1

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 2:
            raise InvalidParamsError("n_particles must be an integer >= 2")
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise InvalidParamsError("dt must be > 0")
        if not self.t_end >= 0 or not math.isfinite(self.t_end):
            raise InvalidParamsError("t_end must be >= 0")
        if self.t_end > 0 and self.dt > self.t_end:
            raise InvalidParamsError("dt must not exceed t_end")
        if abs(self.n_steps * self.dt - self.t_end) > 1e-9 * max(self.t_end, self.dt):
            raise InvalidParamsError("t_end must be an integer multiple of dt")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise InvalidParamsError("record_stride must be an integer >= 1")
        if self.t_end > 0 and self.record_stride * self.dt > self.t_end * (1 + 1e-12):
            raise InvalidParamsError("record_stride * dt must not exceed t_end")
        if not 0 <= self.seed < 2**64:
            raise InvalidParamsError("seed must be a 64-bit unsigned integer")
        if not self.taming >= 0:
            raise InvalidParamsError("taming must be >= 0")
        if self.force_backend not in BACKENDS:
            raise InvalidParamsError(f"force_backend must be one of {BACKENDS}")
        if not self.cell_cutoff > 0:
            raise InvalidParamsError("cell_cutoff must be > 0")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def replace(self, **changes):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return SimConfig(**d)

    def to_dict(self):
        return {
            "n_particles": int(self.n_particles),
            "alpha": self.params.alpha,
            "chi": self.params.chi,
            "eps": self.params.eps,
            "dt": self.dt,
            "t_end": self.t_end,
            "seed": int(self.seed),
            "initial": self.initial.to_dict(),
            "record_stride": int(self.record_stride),
            "taming": self.taming,
            "force_backend": self.force_backend,
            "cell_cutoff": self.cell_cutoff,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        params = KernelParams(d.pop("alpha"), d.pop("chi"), d.pop("eps"))
        initial = InitialCondition.from_dict(d.pop("initial"))
        return cls(params=params, initial=initial, **d)


@dataclass(frozen=True)
class ParticleState:
    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must have shape (N, 2)")
        if pos.shape[0] < 2:
            raise ValueError("a particle state needs N >= 2")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n(self):
        return self.positions.shape[0]


@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # "min_distance_below" or "taming_activated"
    threshold: float = float("nan")

    def to_dict(self):
        d = {"time": self.time, "kind": self.kind}
        if self.kind == "min_distance_below":
            d["threshold"] = self.threshold
        return d


@dataclass(frozen=True)
class Trajectory:
    """Recorded states at multiples of record_stride * dt.

    ``interval_min_dist[r]`` is the smallest pairwise distance seen at any
    integration step since the previous record (inclusive of this one).
    """

    times: np.ndarray
    positions: np.ndarray
    interval_min_dist: np.ndarray
    config: SimConfig
    events: tuple = ()

    @property
    def states(self):
        return [ParticleState(p, t) for p, t in zip(self.positions, self.times)]

    @property
    def final(self):
        return ParticleState(self.positions[-1], self.times[-1])

    @property
    def min_distance(self):
        return float(np.min(self.interval_min_dist))

    def first_crossing(self, threshold):
        for ev in self.events:
            if ev.kind == "min_distance_below" and ev.threshold == threshold:
                return ev.time
        return None


def draw_from_law(ic: InitialCondition, n, rng):
    """n i.i.d. points from a built-in initial law."""
    if ic.kind == "gaussian":
        return np.asarray(ic.mean) + ic.std * rng.standard_normal((n, 2))
    if ic.kind == "uniform_disk":
        r = ic.radius * np.sqrt(rng.random(n))
        t = 2.0 * np.pi * rng.random(n)
        return np.asarray(ic.center) + np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    if ic.kind == "two_clusters":
        which = rng.integers(0, 2, size=n)
        return np.asarray(ic.centers)[which] + ic.std * rng.standard_normal((n, 2))
    raise InvalidParamsError(f"cannot draw from initial condition of kind {ic.kind!r}")


def sample_initial(cfg: SimConfig, rng=None):
    """N i.i.d. draws from ``cfg.initial`` (or the positions stored in a file)."""
    ic = cfg.initial
    n = cfg.n_particles
    if rng is None:
        rng = generator(cfg.seed, INITIAL_DOMAIN)
    if ic.kind == "from_file":
        pos = load_positions(ic.path)
        if pos.shape[0] != n:
            raise FileFormatError(f"{ic.path}: holds {pos.shape[0]} particles, config asks for {n}")
    else:
        pos = draw_from_law(ic, n, rng)
    return ParticleState(pos, 0.0)


def load_positions(path):
    """Read an (N, 2) array from ``.npy`` or whitespace/comma separated text."""
    path = str(path)
    try:
        if path.endswith(".npy"):
            pos = np.load(path, allow_pickle=False)
        else:
            with open(path) as fh:
                text = fh.read().replace(",", " ")
            pos = np.loadtxt(text.splitlines(), ndmin=2)
    except (OSError, ValueError) as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    pos = np.asarray(pos, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 2 or not np.all(np.isfinite(pos)):
        raise FileFormatError(f"{path}: expected finite (N, 2) positions, got shape {pos.shape}")
    return pos


def _pair_sums(pos, p, backend, cutoff):
    n = pos.shape[0]
    acc = np.empty((n, 2))
    minr2 = np.empty(n)
    coll = np.empty(n, dtype=np.int64)
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    if backend == "direct":
        _forces.direct_sum(pos, p.alpha, p.eps * p.eps, acc, minr2, coll)
    elif backend == "cell_list":
        _forces.cell_list_sum(pos, p.alpha, p.eps, cutoff, acc, minr2, coll)
    else:
        raise InvalidParamsError(f"unknown force backend {backend!r}")
    return acc, minr2, coll


def _drift(pos, p, backend, cutoff, time):
    """Return (drift, min pairwise distance)."""
    if p.chi == 0.0:
        # no interaction: skip the pair sums, keep the distance monitor
        return np.zeros_like(pos), _min_distance(pos)
    acc, minr2, coll = _pair_sums(pos, p, backend, cutoff)
    hits = np.flatnonzero(coll >= 0)
    if hits.size:
        i = int(hits[0])
        raise CollisionError(i, coll[i], time)
    return (-p.chi / pos.shape[0]) * acc, math.sqrt(float(minr2.min()))


def compute_drift(state: ParticleState, p: KernelParams, backend="direct", cutoff=0.1):
    """b_i = -(chi/N) sum_{j != i} K(x_i - x_j), with K_eps when p.eps > 0."""
    return _drift(state.positions, p, backend, cutoff, state.time)[0]


def _tame(b, dt, taming):
    if taming <= 0:
        return b, 0.0
    load = dt * np.sqrt(b[:, 0] ** 2 + b[:, 1] ** 2) / taming
    return b / (1.0 + load)[:, None], float(load.max())


def _advance(pos, step, cfg, noise, ids, drift=None):
    """One Euler-Maruyama step from integration step ``step``; returns (new pos, min dist, taming load)."""
    time = step * cfg.dt
    if drift is None:
        b, dmin = _drift(pos, cfg.params, cfg.force_backend, cfg.cell_cutoff, time)
    else:
        b, dmin = drift
    if cfg.params.chi == 0.0:
        b = np.zeros_like(pos)
    b, load = _tame(b, cfg.dt, cfg.taming)
    xi = noise.normals(step, pos.shape[0], ids)
    return pos + b * cfg.dt + math.sqrt(2.0 * cfg.dt) * xi, dmin, load


def em_step(state: ParticleState, cfg: SimConfig, rng, ids=None):
    """x <- x + b dt + sqrt(2 dt) xi; the noise counter is the step index time/dt."""
    step = int(round(state.time / cfg.dt))
    new, _, _ = _advance(state.positions, step, cfg, rng, ids)
    return ParticleState(new, (step + 1) * cfg.dt)


def _min_distance(pos):
    d, _ = cKDTree(pos).query(pos, k=2)
    return float(d[:, 1].min())


def min_pairwise_distance(state: ParticleState):
    return _min_distance(state.positions)


def log_distance_stat(state: ParticleState):
    """(1/N^2) sum_{i != j} log|x_i - x_j|."""
    s, mr2 = _forces.pair_log_sum(state.positions)
    if mr2 == 0.0:
        d = state.positions
        i, j = _coincident_pair(d)
        raise CollisionError(i, j, state.time)
    n = state.n
    return 2.0 * s / (n * n)


def _coincident_pair(pos):
    pairs = cKDTree(pos).query_pairs(0.0)
    if not pairs:
        return -1, -1
    return min(pairs)


class _EventTracker:
    def __init__(self, thresholds):
        self.thresholds = thresholds
        self.below = {t: False for t in thresholds}
        self.tamed = False
        self.events = []

    def distance(self, time, dmin):
        for t in self.thresholds:
            now = dmin < t
            if now and not self.below[t]:
                self.events.append(Event(time, "min_distance_below", t))
            self.below[t] = now

    def taming(self, time, load):
        now = load > TAMING_EVENT_LEVEL
        if now and not self.tamed:
            self.events.append(Event(time, "taming_activated"))
        self.tamed = now

    def status(self):
        return {"below": [self.below[t] for t in self.thresholds], "tamed": self.tamed}

    def restore(self, status, events):
        for t, b in zip(self.thresholds, status["below"]):
            self.below[t] = bool(b)
        self.tamed = bool(status["tamed"])
        self.events = list(events)


def event_thresholds(cfg: SimConfig):
    ts = {COLLISION_THRESHOLD}
    if cfg.params.eps > 0:
        ts.add(cfg.params.eps)
    return tuple(sorted(ts, reverse=True))


def simulate(cfg: SimConfig, *, initial=None, noise_ids=None, noise=None, checkpoint=None, resume=False):
    """Run the particle system from t=0 to cfg.t_end.

    ``initial`` overrides sampling from ``cfg.initial``; ``noise_ids`` assigns
    noise stream ids to particles (identity by default).  With ``checkpoint``
    the trajectory is streamed to that file as it is produced and, with
    ``resume``, an existing partial file is continued.
    """
    from . import trajio

    n = cfg.n_particles
    if noise is None:
        noise = CounterNormals(cfg.seed)
    if noise_ids is not None:
        noise_ids = np.asarray(noise_ids, dtype=np.int64)
        if noise_ids.shape != (n,):
            raise ValueError("noise_ids must hold one id per particle")
    tracker = _EventTracker(event_thresholds(cfg))
    stride = cfg.record_stride
    n_steps = cfg.n_steps

    times, frames, mins = [], [], []
    start_step = 0
    writer = None

    if checkpoint is not None and resume and trajio.exists(checkpoint):
        prev = trajio.read_checkpoint(checkpoint, cfg)
        times = list(prev.times)
        frames = list(prev.positions)
        mins = list(prev.interval_min_dist)
        tracker.restore(prev.status, prev.events)
        start_step = (len(times) - 1) * stride
        pos = np.array(frames[-1])
        writer = trajio.TrajectoryWriter(checkpoint, cfg, resume_from=prev)
    else:
        state = initial if initial is not None else sample_initial(cfg)
        pos = np.array(state.positions, dtype=np.float64)
        if pos.shape != (n, 2):
            raise ValueError(f"initial positions must have shape ({n}, 2)")
        if checkpoint is not None:
            writer = trajio.TrajectoryWriter(checkpoint, cfg)

    try:
        run_min = math.inf
        drift = None
        if start_step == 0:
            drift = _drift(pos, cfg.params, cfg.force_backend, cfg.cell_cutoff, 0.0)
            d0 = drift[1]
            tracker.distance(0.0, d0)
            times.append(0.0)
            frames.append(pos.copy())
            mins.append(d0)
            if writer is not None:
                writer.append(0.0, d0, pos, tracker)
        for step in range(start_step, n_steps):
            pos, _, load = _advance(pos, step, cfg, noise, noise_ids, drift)
            tracker.taming(step * cfg.dt, load)
            t = (step + 1) * cfg.dt
            drift = _drift(pos, cfg.params, cfg.force_backend, cfg.cell_cutoff, t)
            dmin = drift[1]
            tracker.distance(t, dmin)
            run_min = min(run_min, dmin)
            if (step + 1) % stride == 0:
                times.append(t)
                frames.append(pos.copy())
                mins.append(run_min)
                if writer is not None:
                    writer.append(t, run_min, pos, tracker)
                run_min = math.inf
    finally:
        if writer is not None:
            writer.close()

    return Trajectory(
        times=np.array(times),
        positions=np.array(frames).reshape(len(frames), n, 2),
        interval_min_dist=np.array(mins),
        config=cfg,
        events=tuple(tracker.events),
    )


def config_json(cfg: SimConfig):
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
