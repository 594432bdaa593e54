"""Evaluation, simulation and frozen-parameter analysis of polynomial LPV models."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import PolyLPVModel, ReducedModel
from .errors import DataError, NumericalError
from .snapshots import format_float

__all__ = [
    "FrequencyResponse",
    "Trajectory",
    "Spectrum",
    "eval_at",
    "simulate",
    "simulate_feedback",
    "eigenvalues_at",
    "root_locus",
    "frequency_response",
    "project_state",
    "write_trajectory_csv",
    "write_frequency_csv",
]


def _as_model(model) -> PolyLPVModel:
    return model.model if isinstance(model, ReducedModel) else model


@dataclass(frozen=True)
class FrequencyResponse:
    omega: np.ndarray
    G: np.ndarray  # (n_omega, n_y, n_u) complex
    dt: float
    theta: float

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        if w.ndim != 1 or len(w) != len(self.G):
            raise DataError("need exactly one response matrix per frequency")
        if np.any(np.diff(w) <= 0):
            raise DataError("omega must be strictly increasing")


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray   # (N + 1, n)
    outputs: np.ndarray  # (N + 1, n_y)
    theta: np.ndarray    # (N,)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    stable: bool

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def continuous(self, dt: float) -> np.ndarray:
        """``log(lambda) / dt``, for continuous-time style root-locus plots."""
        return np.log(self.eigenvalues.astype(complex)) / dt


def eval_at(model, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """``A(theta), B(theta)`` by Horner's scheme in the normalized parameter."""
    m = _as_model(model)
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    if not m.theta_scale.contains(theta):
        warnings.warn(f"theta={theta:g} outside the fitted range "
                      f"[{m.theta_scale.min:g}, {m.theta_scale.max:g}]", stacklevel=2)
    t = float(m.theta_scale.normalize(theta))
    A = m.A[-1].copy()
    B = m.B[-1].copy()
    for i in range(m.n_p - 1, -1, -1):
        A = A * t + m.A[i]
        B = B * t + m.B[i]
    return A, B


def simulate(model, inputs, theta, z0) -> Trajectory:
    """Run ``z+ = A(theta_k) z + B(theta_k) u_k`` and ``y = C z`` for ``len(inputs)`` steps."""
    m = _as_model(model)
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    th = np.asarray(theta, dtype=float)
    if th.ndim == 0:
        th = np.full(u.shape[0], float(th))
    if th.shape != (u.shape[0],):
        raise DataError(f"theta has shape {th.shape}, expected ({u.shape[0]},)")
    if u.shape[1] != m.n_u:
        raise DataError(f"inputs have dimension {u.shape[1]}, model expects {m.n_u}")
    z = np.asarray(z0, dtype=float).reshape(-1)
    if z.shape != (m.n,):
        raise DataError(f"z0 has shape {z.shape}, model expects ({m.n},)")
    Z = np.empty((u.shape[0] + 1, m.n))
    Z[0] = z
    # cache matrices for repeated parameter values (fixed-theta runs)
    last_t, A, B = None, None, None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in range(u.shape[0]):
            if th[k] != last_t:
                A, B = eval_at(m, th[k])
                last_t = th[k]
            z = A @ z + B @ u[k]
            if not np.all(np.isfinite(z)):
                raise NumericalError(f"simulation diverged at step {k + 1}")
            Z[k + 1] = z
    _warn_range(m, th)
    return Trajectory(states=Z, outputs=Z @ m.C.T, theta=th)


def _warn_range(m: PolyLPVModel, th: np.ndarray) -> None:
    if th.size and not (m.theta_scale.contains(th.min()) and m.theta_scale.contains(th.max())):
        warnings.warn(f"theta trajectory leaves the fitted range "
                      f"[{m.theta_scale.min:g}, {m.theta_scale.max:g}]", stacklevel=3)


def simulate_feedback(reduced: ReducedModel, inputs, rule: Callable[[np.ndarray], float],
                      z0) -> Trajectory:
    """Simulate with ``theta_k = rule(basis @ z_k)``, the scheduling value read off the
    reconstructed full state at every step."""
    m = reduced.model
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    z = np.asarray(z0, dtype=float).reshape(-1)
    if z.shape != (m.n,):
        raise DataError(f"z0 has shape {z.shape}, model expects ({m.n},)")
    Z = np.empty((u.shape[0] + 1, m.n))
    th = np.empty(u.shape[0])
    Z[0] = z
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in range(u.shape[0]):
            th[k] = rule(reduced.basis @ z)
            A, B = eval_at(m, th[k])
            z = A @ z + B @ u[k]
            if not np.all(np.isfinite(z)):
                raise NumericalError(f"simulation diverged at step {k + 1}")
            Z[k + 1] = z
    _warn_range(m, th)
    return Trajectory(states=Z, outputs=Z @ m.C.T, theta=th)


def eigenvalues_at(model, theta: float) -> Spectrum:
    """Eigenvalues of ``A(theta)`` sorted by decreasing magnitude; stable iff all inside the unit circle."""
    A, _ = eval_at(model, theta)
    lam = np.linalg.eigvals(A)
    lam = lam[np.lexsort((-lam.imag, -lam.real, -np.abs(lam)))]
    return Spectrum(eigenvalues=lam, stable=bool(np.all(np.abs(lam) < 1.0)))


def root_locus(model, thetas) -> list[tuple[float, float, float]]:
    """``(Re, Im, theta)`` triples over a parameter grid."""
    out = []
    for th in thetas:
        for lam in eigenvalues_at(model, th).eigenvalues:
            out.append((float(lam.real), float(lam.imag), float(th)))
    return out


def frequency_response(model, theta: float, omega) -> FrequencyResponse:
    """Frozen-parameter response ``C (e^{j w dt} I - A(theta))^{-1} B(theta)``."""
    m = _as_model(model)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    nyq = np.pi / m.dt
    if np.any(w <= 0) or np.any(w > nyq * (1 + 1e-12)):
        raise ValueError(f"omega must lie in (0, {nyq:g}] rad/s")
    A, B = eval_at(m, theta)
    lam = np.linalg.eigvals(A)
    z = np.exp(1j * w * m.dt)
    dist = np.min(np.abs(z[:, None] - lam[None, :]), axis=1)
    if np.any(dist < 1e-12):
        bad = w[np.argmax(dist < 1e-12)]
        raise NumericalError(f"e^(j*{bad:g}*dt) coincides with an eigenvalue of A({theta:g})")
    G = m.C @ np.linalg.solve(z[:, None, None] * np.eye(m.n) - A, B)
    return FrequencyResponse(omega=w, G=G, dt=m.dt, theta=float(theta))


def project_state(reduced: ReducedModel, x_full) -> np.ndarray:
    """Reduced coordinates ``basis.T @ x_full``."""
    x = np.asarray(x_full, dtype=float).reshape(-1)
    if x.shape[0] != reduced.n_x:
        raise DataError(f"state has dimension {x.shape[0]}, basis expects {reduced.n_x}")
    return reduced.basis.T @ x


def write_trajectory_csv(path, traj: Trajectory, inputs, dt: float) -> None:
    """Columns ``k,t,theta,u_*,y_*``; the terminal row leaves theta and u empty."""
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    n = u.shape[0]
    n_y = traj.outputs.shape[1]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "theta"] + [f"u_{i + 1}" for i in range(u.shape[1])]
                   + [f"y_{i + 1}" for i in range(n_y)])
        for k in range(n + 1):
            mid = ([format_float(traj.theta[k])] + [format_float(v) for v in u[k]]) if k < n \
                else [""] * (1 + u.shape[1])
            w.writerow([str(k), format_float(k * dt)] + mid
                       + [format_float(v) for v in traj.outputs[k]])


def write_frequency_csv(path, resp: FrequencyResponse) -> None:
    """Columns ``omega,re_G_i_j,im_G_i_j`` for every output ``i`` and input ``j`` (1-based)."""
    _, n_y, n_u = resp.G.shape
    pairs = [(i, j) for i in range(n_y) for j in range(n_u)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["omega"]
        for i, j in pairs:
            header += [f"re_G_{i + 1}_{j + 1}", f"im_G_{i + 1}_{j + 1}"]
        w.writerow(header)
        for k, om in enumerate(resp.omega):
            row = [format_float(om)]
            for i, j in pairs:
                row += [format_float(resp.G[k, i, j].real), format_float(resp.G[k, i, j].imag)]
            w.writerow(row)
