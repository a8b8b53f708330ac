"""Binary trajectory files (``KSTRAJ1``) and their event sidecars.

Layout, all little-endian::

    8s   magic  b"KSTRAJ1\\0"
    u32  version (1)
    u64  N
    u64  record count
    f64  dt
    u64  length of the JSON config, followed by that many UTF-8 bytes
    records: (2 + 2N) f64 each = time, min distance since previous record,
             then x_1, y_1, ..., x_N, y_N

A checkpoint is the same file cut after its last complete record.  The
sidecar ``<file>.events.jsonl`` holds one JSON object per line: events as
``{"time", "kind", ["threshold"]}`` and, after every record, a status line
``{"record": r, "below": [...], "tamed": bool}`` used to resume event tracking.
"""

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError

MAGIC = b"KSTRAJ1\x00"
VERSION = 1
_HEAD = struct.Struct("<8sIQQdQ")
_COUNT_OFFSET = 8 + 4 + 8


def exists(path):
    return os.path.exists(path) and os.path.getsize(path) >= _HEAD.size


def events_path(path):
    return str(path) + ".events.jsonl"


class TrajectoryWriter:
    def __init__(self, path, cfg, resume_from=None):
        from .particles import config_json

        self.path = str(path)
        self.n = cfg.n_particles
        self._events_written = 0
        if resume_from is not None:
            info = read_header(self.path)
            self._fh = open(self.path, "r+b")
            self.count = info["count"]
            self._fh.truncate(info["data_offset"] + self.count * info["record_size"])
            self._fh.seek(_COUNT_OFFSET)
            self._fh.write(struct.pack("<Q", self.count))
            self._fh.seek(0, os.SEEK_END)
            # keep the sidecar only up to the status line of the last surviving record
            keep = _committed_lines(self.path, self.count - 1)
            self._ev = open(events_path(self.path), "w")
            self._ev.writelines(keep)
            self._ev.flush()
            self._events_written = len(resume_from.events)
        else:
            blob = config_json(cfg).encode()
            self._fh = open(self.path, "wb")
            self._fh.write(_HEAD.pack(MAGIC, VERSION, self.n, 0, cfg.dt, len(blob)))
            self._fh.write(blob)
            self.count = 0
            self._ev = open(events_path(self.path), "w")

    def append(self, time, min_dist, pos, tracker):
        rec = np.empty(2 + 2 * self.n, dtype="<f8")
        rec[0] = time
        rec[1] = min_dist
        rec[2:] = np.asarray(pos, dtype=np.float64).ravel()
        self._fh.write(rec.tobytes())
        self._fh.flush()
        self.count += 1
        for ev in tracker.events[self._events_written:]:
            self._ev.write(json.dumps(ev.to_dict()) + "\n")
        self._events_written = len(tracker.events)
        self._ev.write(json.dumps({"record": self.count - 1, **tracker.status()}) + "\n")
        self._ev.flush()
        # count is bumped only after the record bytes are on disk
        here = self._fh.tell()
        self._fh.seek(_COUNT_OFFSET)
        self._fh.write(struct.pack("<Q", self.count))
        self._fh.seek(here)
        self._fh.flush()

    def close(self):
        self._fh.close()
        self._ev.close()


def read_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEAD.size)
        if len(raw) < _HEAD.size:
            raise FileFormatError(f"{path}: truncated header")
        magic, version, n, count, dt, jlen = _HEAD.unpack(raw)
        if magic != MAGIC:
            raise FileFormatError(f"{path}: not a KSTRAJ1 file")
        if version != VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        blob = fh.read(jlen)
        if len(blob) < jlen:
            raise FileFormatError(f"{path}: truncated config block")
    try:
        config = json.loads(blob.decode())
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad config JSON ({exc})") from exc
    record_size = 8 * (2 + 2 * n)
    data_offset = _HEAD.size + jlen
    complete = (os.path.getsize(path) - data_offset) // record_size
    return {
        "version": version,
        "n": n,
        "count": int(min(count, complete)),
        "dt": dt,
        "config": config,
        "record_size": record_size,
        "data_offset": data_offset,
    }


@dataclass
class StoredTrajectory:
    header: dict
    times: np.ndarray
    interval_min_dist: np.ndarray
    positions: np.ndarray
    events: list
    status: dict


def _read_sidecar(path, last_record):
    """Events committed by a status line of a record that is still in the file."""
    from .particles import Event

    events, pending, status = [], [], None
    p = events_path(path)
    if not os.path.exists(p):
        return events, status
    with open(p) as fh:
        for line in fh:
            try:
                d = json.loads(line)
            except ValueError:
                break  # torn final line
            if "record" not in d:
                pending.append(Event(d["time"], d["kind"], d.get("threshold", float("nan"))))
            elif d["record"] <= last_record:
                status = d
                events.extend(pending)
                pending = []
            else:
                break
    return events, status


def _committed_lines(path, last_record):
    keep, pending = [], []
    with open(events_path(path)) as fh:
        for line in fh:
            try:
                d = json.loads(line)
            except ValueError:
                break
            pending.append(line if line.endswith("\n") else line + "\n")
            if "record" in d:
                if d["record"] > last_record:
                    break
                keep.extend(pending)
                pending = []
                if d["record"] == last_record:
                    break
    return keep


def read_trajectory(path):
    info = read_header(path)
    n, count = info["n"], info["count"]
    with open(path, "rb") as fh:
        fh.seek(info["data_offset"])
        data = np.frombuffer(fh.read(count * info["record_size"]), dtype="<f8")
    data = data.reshape(count, 2 + 2 * n)
    times = data[:, 0].copy()
    events, status = _read_sidecar(path, count - 1)
    return StoredTrajectory(
        header=info,
        times=times,
        interval_min_dist=data[:, 1].copy(),
        positions=data[:, 2:].reshape(count, n, 2).copy(),
        events=events,
        status=status,
    )


def read_checkpoint(path, cfg):
    from .particles import SimConfig

    stored = read_trajectory(path)
    if SimConfig.from_dict(stored.header["config"]) != cfg:
        raise FileFormatError(f"{path}: checkpoint was written for a different configuration")
    if stored.header["count"] == 0 or stored.status is None:
        raise FileFormatError(f"{path}: checkpoint holds no complete record")
    return stored


def to_trajectory(stored):
    from .particles import SimConfig, Trajectory

    return Trajectory(
        times=stored.times,
        positions=stored.positions,
        interval_min_dist=stored.interval_min_dist,
        config=SimConfig.from_dict(stored.header["config"]),
        events=tuple(stored.events),
    )


def write_trajectory(path, traj):
    """Write a finished in-memory Trajectory."""
    from .particles import _EventTracker, event_thresholds

    tr = _EventTracker(event_thresholds(traj.config))
    w = TrajectoryWriter(path, traj.config)
    try:
        for r in range(len(traj.times)):
            tr.events = [e for e in traj.events if e.time <= traj.times[r]]
            w.append(traj.times[r], traj.interval_min_dist[r], traj.positions[r], tr)
    finally:
        w.close()
