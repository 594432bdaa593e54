"""Polynomial-Kronecker lifting of snapshot data.

For polynomial order ``n_p`` each state/input sample is stacked with its
products by ``theta, theta**2, ..., theta**n_p``. The resulting regressor
``[X; Xkr; U; Ukr]`` turns the polynomial LPV identification problem into a
single linear least-squares problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DataError
from .snapshots import SnapshotEnsemble

__all__ = ["ThetaScale", "LiftedData", "theta_powers", "lift_vector", "build_lifted"]


@dataclass(frozen=True)
class ThetaScale:
    """Affine map of the scheduling parameter onto ``[-1, 1]``.

    When ``enabled`` is false the map is the identity. A degenerate range
    (``min == max``) only shifts, so a constant parameter maps to zero.
    """

    min: float = -1.0
    max: float = 1.0
    enabled: bool = False

    @classmethod
    def fit(cls, theta, enabled: bool = True) -> "ThetaScale":
        th = np.asarray(theta, dtype=float)
        return cls(float(th.min()), float(th.max()), enabled)

    @classmethod
    def identity(cls) -> "ThetaScale":
        return cls(-1.0, 1.0, False)

    @property
    def center(self) -> float:
        return 0.5 * (self.max + self.min)

    @property
    def half_width(self) -> float:
        hw = 0.5 * (self.max - self.min)
        return hw if hw > 0 else 1.0

    def normalize(self, theta):
        if not self.enabled:
            return theta
        return (np.asarray(theta, dtype=float) - self.center) / self.half_width

    def denormalize(self, theta_n):
        if not self.enabled:
            return theta_n
        return np.asarray(theta_n, dtype=float) * self.half_width + self.center

    def contains(self, theta, margin: float = 0.1) -> bool:
        """Whether ``theta`` lies within the fitted range widened by ``margin`` of its width."""
        if not self.enabled:
            return True
        pad = margin * (self.max - self.min)
        return self.min - pad - 1e-12 <= theta <= self.max + pad + 1e-12


@dataclass(frozen=True)
class LiftedData:
    """Stacked data matrices; columns are time samples ``k = 0..N_d-1``."""

    X: np.ndarray
    Xkr: np.ndarray
    U: np.ndarray
    Ukr: np.ndarray
    Xplus: np.ndarray
    n_p: int
    theta_scale: ThetaScale = ThetaScale.identity()
    dt: float = 1.0

    @property
    def n_x(self) -> int:
        return self.X.shape[0]

    @property
    def n_u(self) -> int:
        return self.U.shape[0]

    @property
    def n_d(self) -> int:
        return self.X.shape[1]

    def regressor(self) -> np.ndarray:
        """``[X; Xkr; U; Ukr]`` with ``(n_p + 1)(n_x + n_u)`` rows."""
        return np.vstack([self.X, self.Xkr, self.U, self.Ukr])


def _check_finite_scalar(theta) -> float:
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    return theta


def theta_powers(theta: float, n_p: int) -> np.ndarray:
    """``[theta, theta**2, ..., theta**n_p]`` (no zeroth power)."""
    theta = _check_finite_scalar(theta)
    if n_p < 0:
        raise ValueError(f"n_p must be nonnegative, got {n_p}")
    return theta ** np.arange(1, n_p + 1, dtype=float)


def lift_vector(v, theta: float, n_p: int) -> np.ndarray:
    """``[v; theta*v; ...; theta**n_p * v]``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("cannot lift an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite values")
    return np.concatenate([v, np.kron(theta_powers(theta, n_p), v)])


def _kron_columns(powers: np.ndarray, M: np.ndarray) -> np.ndarray:
    # powers: (n_p, N), M: (n, N) -> (n_p * n, N), block i holds powers[i] * M
    n_p, n_cols = powers.shape
    return (powers[:, None, :] * M[None, :, :]).reshape(n_p * M.shape[0], n_cols)


def build_lifted(ensemble: SnapshotEnsemble | Iterable[SnapshotEnsemble], n_p: int,
                 theta_scale: ThetaScale | None = None) -> LiftedData:
    """Assemble ``X, Xkr, U, Ukr, Xplus`` from one ensemble or a list of them.

    Multiple ensembles are concatenated column-wise in order. ``theta_scale``
    is applied to the scheduling values before lifting; ``None`` means identity.
    """
    ensembles = [ensemble] if isinstance(ensemble, SnapshotEnsemble) else list(ensemble)
    if not ensembles:
        raise DataError("no snapshot data")
    if n_p < 0:
        raise ValueError(f"n_p must be nonnegative, got {n_p}")
    n_x, n_u = ensembles[0].n_x, ensembles[0].n_u
    for e in ensembles:
        if (e.n_x, e.n_u) != (n_x, n_u):
            raise DataError("ensembles have inconsistent state/input dimensions")
    scale = theta_scale or ThetaScale.identity()
    X = np.hstack([e.states[:-1].T for e in ensembles])
    Xplus = np.hstack([e.states[1:].T for e in ensembles])
    U = np.hstack([e.inputs.T for e in ensembles])
    th = np.asarray(scale.normalize(np.concatenate([e.theta for e in ensembles])), dtype=float)
    if X.shape[1] == 0:
        raise DataError("N_d = 0: nothing to lift")
    powers = th[None, :] ** np.arange(1, n_p + 1, dtype=float)[:, None]
    return LiftedData(X=X, Xkr=_kron_columns(powers, X), U=U, Ukr=_kron_columns(powers, U),
                      Xplus=Xplus, n_p=n_p, theta_scale=scale, dt=ensembles[0].dt)
