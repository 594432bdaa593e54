"""Excitation signals and snapshot trajectories: generation, collection, CSV I/O.

Arrays are stored time-major: ``states[k]`` is the state at step ``k``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DataError, NumericalError

__all__ = [
    "Signal",
    "SnapshotEnsemble",
    "ArcsinRule",
    "generate_chirp",
    "load_signal",
    "load_snapshots",
    "save_snapshots",
    "collect_from_plant",
    "format_float",
]


def format_float(v: float) -> str:
    """Round-trippable decimal text (17 significant digits)."""
    return format(float(v), ".17g")


def _as_finite_2d(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"{name} must be a sequence of vectors, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Signal:
    """Sampled input signal; ``samples`` has shape ``(n_samples, n_u)``."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DataError(f"dt must be positive and finite, got {self.dt}")
        s = _as_finite_2d(self.samples, "samples")
        if s.shape[1] < 1 or s.shape[0] < 1:
            raise DataError("signal needs at least one sample of dimension >= 1")
        object.__setattr__(self, "samples", s)

    @property
    def n_u(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt


@dataclass(frozen=True)
class SnapshotEnsemble:
    """States at ``N_d + 1`` instants with inputs and scheduling values at ``N_d``."""

    dt: float
    states: np.ndarray
    inputs: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DataError(f"dt must be positive and finite, got {self.dt}")
        x = _as_finite_2d(self.states, "states")
        u = _as_finite_2d(self.inputs, "inputs")
        th = np.asarray(self.theta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(th)):
            raise DataError("theta contains non-finite values")
        n_d = u.shape[0]
        if n_d < 1:
            raise DataError("ensemble needs N_d >= 1 input samples")
        if th.shape[0] != n_d:
            raise DataError(f"theta has {th.shape[0]} entries, inputs have {n_d}")
        if x.shape[0] != n_d + 1:
            raise DataError(f"expected {n_d + 1} states for {n_d} inputs, got {x.shape[0]}")
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "theta", th)

    @property
    def n_d(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_x(self) -> int:
        return self.states.shape[1]

    @property
    def n_u(self) -> int:
        return self.inputs.shape[1]


def generate_chirp(f0: float, f1: float, duration: float, dt: float,
                   amplitude: float = 1.0, phase: float = 0.0) -> Signal:
    """Linear-frequency sweep from ``f0`` to ``f1`` Hz over ``duration`` seconds.

    ``s(t) = amplitude * sin(2*pi*(f0*t + (f1 - f0)*t**2 / (2*duration)) + phase)``
    sampled at ``t = k*dt`` for ``k = 0..floor(duration/dt)``.
    """
    for name, v in (("f0", f0), ("f1", f1), ("duration", duration), ("dt", dt),
                    ("amplitude", amplitude), ("phase", phase)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")
    if f0 <= 0 or duration <= 0 or dt <= 0:
        raise ValueError("f0, duration and dt must be positive")
    if f1 < f0:
        raise ValueError(f"f1={f1} must be >= f0={f0}")
    if dt >= 1.0 / (2.0 * f1):
        raise ValueError(f"dt={dt} violates Nyquist for f1={f1} Hz (need dt < {1 / (2 * f1)})")
    n = int(math.floor(duration / dt + 1e-9)) + 1
    t = np.arange(n) * dt
    s = amplitude * np.sin(2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * duration)) + phase)
    return Signal(dt=dt, samples=s[:, None])


def load_signal(path, dt: float | None = None) -> Signal:
    """Read an input CSV with ``u_*`` columns and optional ``t`` column.

    ``dt`` is taken from the ``t`` column when not given.
    """
    header, rows = _read_csv(path)
    u_cols = [i for i, h in enumerate(header) if h.startswith("u_")]
    if not u_cols:
        raise DataError(f"{path}: no u_* columns in header")
    try:
        u = np.array([[float(r[i]) for i in u_cols] for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed row ({exc})") from None
    if dt is None:
        if "t" not in header or len(rows) < 2:
            raise DataError(f"{path}: need a 't' column with >= 2 rows or an explicit dt")
        t = np.array([float(r[header.index("t")]) for r in rows])
        dt = float(np.mean(np.diff(t)))
    return Signal(dt=dt, samples=u)


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        lines = [ln for ln in fh if ln.strip()]
    i = 0
    while i < len(lines) and lines[i].lstrip().startswith("#"):
        i += 1
    if i == len(lines):
        raise DataError(f"{path}: missing header")
    reader = csv.reader(lines[i:])
    header = [h.strip() for h in next(reader)]
    rows = [[c.strip() for c in r] for r in reader]
    return header, rows


def save_snapshots(ensemble: SnapshotEnsemble, path, comment: str | None = None) -> None:
    """Write ``ensemble`` as ``k,theta,u_1..,x_1..`` rows; the last row has empty theta/u."""
    path = Path(path)
    n_u, n_x = ensemble.n_u, ensemble.n_x
    header = ["k", "theta"] + [f"u_{i + 1}" for i in range(n_u)] + [f"x_{i + 1}" for i in range(n_x)]
    with path.open("w", newline="") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"# dt={format_float(ensemble.dt)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(ensemble.n_d + 1):
            if k < ensemble.n_d:
                head = [format_float(ensemble.theta[k])] + [format_float(v) for v in ensemble.inputs[k]]
            else:
                head = [""] * (1 + n_u)
            w.writerow([str(k)] + head + [format_float(v) for v in ensemble.states[k]])


def load_snapshots(path, dt: float | None = None) -> SnapshotEnsemble:
    """Parse a snapshot CSV written by :func:`save_snapshots` (or by hand).

    The sample time comes from ``dt``, else a ``# dt=`` comment line, else 1.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    if dt is None:
        with path.open() as fh:
            for ln in fh:
                s = ln.strip()
                if not s.startswith("#"):
                    break
                if s[1:].strip().startswith("dt="):
                    dt = float(s[1:].strip()[3:])
        if dt is None:
            dt = 1.0
    header, rows = _read_csv(path)
    if header[:2] != ["k", "theta"]:
        raise DataError(f"{path}: header must start with 'k,theta', got {header[:2]}")
    u_idx = [i for i, h in enumerate(header) if h.startswith("u_")]
    x_idx = [i for i, h in enumerate(header) if h.startswith("x_")]
    if not u_idx or not x_idx or len(u_idx) + len(x_idx) + 2 != len(header):
        raise DataError(f"{path}: header must be k,theta,u_1..u_n,x_1..x_m")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows")
    states, inputs, theta = [], [], []
    for lineno, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: data row {lineno} has {len(r)} fields, expected {len(header)}")
        try:
            if int(r[0]) != lineno:
                raise DataError(f"{path}: row {lineno} has k={r[0]}")
            states.append([float(r[i]) for i in x_idx])
            last = lineno == len(rows) - 1
            if last:
                if r[1] or any(r[i] for i in u_idx):
                    raise DataError(f"{path}: terminal row must leave theta and u empty")
            else:
                theta.append(float(r[1]))
                inputs.append([float(r[i]) for i in u_idx])
        except ValueError as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"{path}: malformed data row {lineno} ({exc})") from None
    return SnapshotEnsemble(dt=dt, states=np.array(states), inputs=np.array(inputs),
                            theta=np.array(theta))


@dataclass(frozen=True)
class ArcsinRule:
    """Scheduling value from a velocity-like state: ``theta = -arcsin(x[index] / v0)``."""

    index: int
    v0: float

    def __call__(self, x: np.ndarray) -> float:
        arg = x[self.index] / self.v0
        if not -1.0 <= arg <= 1.0:
            raise NumericalError(f"arcsin argument {arg} outside [-1, 1]")
        return -math.asin(arg)


ThetaSource = Union[float, Sequence[float], np.ndarray, Callable[[np.ndarray], float]]


def collect_from_plant(plant, signal: Signal, x0, theta_source: ThetaSource,
                       bound: float = 1e6) -> SnapshotEnsemble:
    """Drive ``plant`` with ``signal`` from ``x0`` and record the trajectory.

    A signal of ``N + 1`` samples spans ``N`` steps: states are recorded at
    every sample instant and the final input sample is not applied.
    ``theta_source`` is a fixed scalar, a per-step sequence of length ``N``, or
    a callable evaluated on the current state. Collection aborts when any state
    entry exceeds ``bound`` in magnitude.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (plant.n_x,):
        raise DataError(f"x0 has shape {x.shape}, plant expects ({plant.n_x},)")
    if signal.n_u != plant.n_u:
        raise DataError(f"signal has {signal.n_u} inputs, plant expects {plant.n_u}")
    n = len(signal) - 1
    if n < 1:
        raise DataError("signal needs at least 2 samples to span one step")
    rule = theta_source if callable(theta_source) else None
    if rule is None:
        th_arr = np.asarray(theta_source, dtype=float)
        if th_arr.ndim == 0:
            th_arr = np.full(n, float(th_arr))
        elif th_arr.shape != (n,):
            raise DataError(f"theta sequence has shape {th_arr.shape}, expected ({n},)")
    states = np.empty((n + 1, plant.n_x))
    theta = np.empty(n)
    states[0] = x
    for k in range(n):
        theta[k] = rule(x) if rule is not None else th_arr[k]
        x = plant.step(x, signal.samples[k], theta[k])
        if not np.all(np.abs(x) <= bound):
            raise NumericalError(f"state exceeded bound {bound:g} at step {k + 1}")
        states[k + 1] = x
    return SnapshotEnsemble(dt=signal.dt, states=states, inputs=signal.samples[:n].copy(), theta=theta)
