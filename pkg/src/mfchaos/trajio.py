"""Trajectory serialization: CSV and a compact little-endian binary block.

Binary layout (all little-endian):

    bytes 0..7    magic  b"MFCTRAJ1"
    uint32        version (1)
    uint32        spatial dimension d
    uint64        particle count N
    uint64        snapshot count S
    float64       dt
    then S blocks of [ float64 t, N*d float64 positions (row-major) ]
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .dynamics import Trajectory

__all__ = ["write_csv", "read_csv", "write_binary", "read_binary", "MAGIC"]

MAGIC = b"MFCTRAJ1"
_HEADER = struct.Struct("<8sIIQQd")


def write_csv(traj: Trajectory, path: str | Path) -> None:
    """Rows (t, particle, x0, x1, ...) for every snapshot."""
    d = traj.positions.shape[2]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "particle"] + [f"x{c}" for c in range(d)])
        for s in range(traj.num_snapshots):
            t = repr(float(traj.times[s]))
            for i, row in enumerate(traj.positions[s]):
                writer.writerow([t, i] + [repr(float(v)) for v in row])


def read_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read (times, positions) back from :func:`write_csv` output."""
    times: list[float] = []
    frames: list[list[list[float]]] = []
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        for row in reader:
            t = float(row[0])
            if not times or t != times[-1]:
                times.append(t)
                frames.append([])
            frames[-1].append([float(v) for v in row[2 : 2 + d]])
    return np.asarray(times), np.asarray(frames)


def write_binary(traj: Trajectory, path: str | Path) -> None:
    S, N, d = traj.positions.shape
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, 1, d, N, S, traj.dt))
        for s in range(S):
            fh.write(struct.pack("<d", float(traj.times[s])))
            fh.write(np.ascontiguousarray(traj.positions[s], dtype="<f8").tobytes())


def read_binary(path: str | Path) -> tuple[np.ndarray, np.ndarray, float]:
    """Read (times, positions, dt) from :func:`write_binary` output."""
    raw = Path(path).read_bytes()
    magic, version, d, N, S, dt = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"not a trajectory file (magic {magic!r})")
    if version != 1:
        raise ValueError(f"unsupported version {version}")
    offset = _HEADER.size
    times = np.empty(S)
    positions = np.empty((S, N, d))
    frame_bytes = 8 * N * d
    for s in range(S):
        (times[s],) = struct.unpack_from("<d", raw, offset)
        offset += 8
        positions[s] = np.frombuffer(raw, dtype="<f8", count=N * d, offset=offset).reshape(N, d)
        offset += frame_bytes
    return times, positions, float(dt)
