"""Discretized circuits: CSV ingestion, synthetic generators, resampling.

A track is a list of grid nodes along the centerline arc length ``s`` with
signed curvature ``gamma``, slope ``alpha`` and a maximum-velocity profile
``v_max`` that embeds the lateral dynamics of a fixed racing line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TrackData",
    "TrackNode",
    "TrackFormatError",
    "TrackValidationError",
    "load_track",
    "write_track",
    "synth_track",
    "resample",
    "SOLVER_MIN_NODES",
]

CSV_HEADER = "s_m,gamma_per_m,alpha_rad,vmax_mps"

# Grids fed to the NLP transcription must have at least this many nodes;
# loading a shorter file is allowed (e.g. for quick inspection) but such a
# track has to be resampled before it can be used in a solve.
SOLVER_MIN_NODES = 10


class TrackFormatError(ValueError):
    """Malformed track file (bad header, wrong column count, non-numeric)."""


class TrackValidationError(ValueError):
    """Structurally invalid track data (non-monotone s, v_max <= 0, ...)."""


@dataclass(frozen=True)
class TrackNode:
    s: float
    gamma: float
    alpha: float
    v_max: float


@dataclass(frozen=True)
class TrackData:
    """Immutable discretized circuit."""

    name: str
    s: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    v_max: np.ndarray

    def __post_init__(self):
        for attr in ("s", "gamma", "alpha", "v_max"):
            arr = np.ascontiguousarray(getattr(self, attr), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        _validate(self)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    @property
    def n_nodes(self) -> int:
        return len(self.s)

    def node(self, k: int) -> TrackNode:
        return TrackNode(float(self.s[k]), float(self.gamma[k]),
                         float(self.alpha[k]), float(self.v_max[k]))


def _validate(t: TrackData):
    n = len(t.s)
    if n < 2:
        raise TrackValidationError("track needs at least 2 nodes")
    for attr in ("gamma", "alpha", "v_max"):
        if len(getattr(t, attr)) != n:
            raise TrackValidationError("column length mismatch")
    if t.s[0] != 0.0:
        raise TrackValidationError("s must start at 0")
    if not np.all(np.diff(t.s) > 0):
        raise TrackValidationError("s must be strictly increasing")
    if not np.all(t.v_max > 0):
        raise TrackValidationError("v_max must be positive at every node")
    if not np.all(np.abs(t.alpha) < 0.5 * np.pi):
        raise TrackValidationError("|alpha| must be below pi/2")
    if not np.all(np.isfinite(t.gamma)):
        raise TrackValidationError("gamma must be finite")
    if not (np.all(np.isfinite(t.s)) and np.all(np.isfinite(t.alpha))
            and np.all(np.isfinite(t.v_max))):
        raise TrackValidationError("track values must be finite")


def load_track(path) -> TrackData:
    """Read a track CSV (header ``s_m,gamma_per_m,alpha_rad,vmax_mps``)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    data_lines = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not data_lines:
        raise TrackFormatError(f"{path}: empty track file")
    header = data_lines[0].replace(" ", "")
    if header != CSV_HEADER:
        raise TrackFormatError(f"{path}: expected header '{CSV_HEADER}', got '{data_lines[0]}'")
    for i, ln in enumerate(data_lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 4:
            raise TrackFormatError(f"{path}:{i}: expected 4 columns, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise TrackFormatError(f"{path}:{i}: {exc}") from None
    # Monotonicity is validated, not repaired: a non-monotone file is a data
    # error, so the loader never re-sorts rows behind the caller's back.
    arr = np.asarray(rows, dtype=np.float64)
    import os

    name = os.path.splitext(os.path.basename(str(path)))[0]
    return TrackData(name=name, s=arr[:, 0], gamma=arr[:, 1],
                     alpha=arr[:, 2], v_max=arr[:, 3])


def write_track(track: TrackData, path):
    """Write the CSV form; floats at full precision so loads round-trip."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# track: {track.name}\n")
        fh.write(CSV_HEADER + "\n")
        for k in range(track.n_nodes):
            fh.write(f"{track.s[k]:.17g},{track.gamma[k]:.17g},"
                     f"{track.alpha[k]:.17g},{track.v_max[k]:.17g}\n")


# ---------------------------------------------------------------------------
# synthetic tracks
# ---------------------------------------------------------------------------

_VMAX_STRAIGHT = 95.0


def _segments_bahrain_like():
    # 4 straights at 95 m/s and 4 corner clusters (apex speeds 30..55 m/s),
    # lengths tuned so the total is 5412 m.  Corner clusters include short
    # linear v_max tapers so braking requirements stay resolvable on coarse
    # grids.  (length, vmax_start, vmax_end, gamma_start, gamma_end)
    v = _VMAX_STRAIGHT
    segs = [
        (1150.0, v, v, 0.0, 0.0),
        (80.0, v, 35.0, 0.0, 0.012),
        (320.0, 35.0, 35.0, 0.012, 0.012),
        (80.0, 35.0, v, 0.012, 0.0),
        (750.0, v, v, 0.0, 0.0),
        (70.0, v, 55.0, 0.0, -0.007),
        (290.0, 55.0, 55.0, -0.007, -0.007),
        (70.0, 55.0, v, -0.007, 0.0),
        (680.0, v, v, 0.0, 0.0),
        (80.0, v, 30.0, 0.0, 0.015),
        (330.0, 30.0, 30.0, 0.015, 0.015),
        (80.0, 30.0, v, 0.015, 0.0),
        (820.0, v, v, 0.0, 0.0),
        (70.0, v, 45.0, 0.0, -0.010),
        (472.0, 45.0, 45.0, -0.010, -0.010),
        (70.0, 45.0, v, -0.010, 0.0),
    ]
    assert abs(sum(s[0] for s in segs) - 5412.0) < 1e-9
    return segs


def _segments_two_straight_loop():
    # starts at the exit of the second corner and ends inside it, so the
    # sampled profile has exactly two maximal top-speed intervals
    v = _VMAX_STRAIGHT
    segs = [
        (1000.0, v, v, 0.0, 0.0),
        (40.0, v, 40.0, 0.0, 0.011),
        (170.0, 40.0, 40.0, 0.011, 0.011),
        (40.0, 40.0, v, 0.011, 0.0),
        (800.0, v, v, 0.0, 0.0),
        (50.0, v, 45.0, 0.0, 0.009),
        (300.0, 45.0, 45.0, 0.009, 0.009),
    ]
    return segs


def _sample_segments(segs, n_nodes, name):
    total = sum(s[0] for s in segs)
    bounds = np.concatenate([[0.0], np.cumsum([s[0] for s in segs])])
    s = np.linspace(0.0, total, n_nodes)
    vmax = np.empty(n_nodes)
    gamma = np.empty(n_nodes)
    idx = np.clip(np.searchsorted(bounds, s, side="right") - 1, 0, len(segs) - 1)
    for k in range(n_nodes):
        L, v0, v1, g0, g1 = segs[idx[k]]
        frac = (s[k] - bounds[idx[k]]) / L
        vmax[k] = v0 + (v1 - v0) * frac
        gamma[k] = g0 + (g1 - g0) * frac
    return TrackData(name=name, s=s, gamma=gamma,
                     alpha=np.zeros(n_nodes), v_max=vmax)


def synth_track(kind: str, n_nodes: int) -> TrackData:
    """Deterministic synthetic circuit of the requested kind."""
    if n_nodes < SOLVER_MIN_NODES:
        raise ValueError(f"n_nodes must be >= {SOLVER_MIN_NODES}")
    if kind == "straight":
        s = np.linspace(0.0, 2000.0, n_nodes)
        return TrackData(name="straight", s=s, gamma=np.zeros(n_nodes),
                         alpha=np.zeros(n_nodes),
                         v_max=np.full(n_nodes, _VMAX_STRAIGHT))
    if kind == "two_straight_loop":
        return _sample_segments(_segments_two_straight_loop(), n_nodes,
                                "two_straight_loop")
    if kind == "bahrain_like":
        return _sample_segments(_segments_bahrain_like(), n_nodes, "bahrain_like")
    raise ValueError(f"unknown track kind: {kind!r}")


def resample(track: TrackData, n: int) -> TrackData:
    """Linear re-interpolation onto a uniform grid of ``n`` nodes."""
    if n < SOLVER_MIN_NODES:
        raise ValueError(f"n must be >= {SOLVER_MIN_NODES}")
    s = np.linspace(0.0, track.length, n)
    s[-1] = track.length  # exact endpoint
    return TrackData(
        name=track.name,
        s=s,
        gamma=np.interp(s, track.s, track.gamma),
        alpha=np.interp(s, track.s, track.alpha),
        v_max=np.interp(s, track.s, track.v_max),
    )
