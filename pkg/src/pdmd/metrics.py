"""Model-quality measures: relative RMS error, singular-value energy, chordal gap."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GapSurface",
    "relative_rms_error",
    "per_output_rms_error",
    "energy_retention",
    "min_rank_for_energy",
    "pointwise_gap",
    "chordal_distance",
    "gap_surface",
    "write_gap_csv",
]


def relative_rms_error(y_ref, y_test) -> float:
    """``||y_test - y_ref||_F / ||y_ref||_F`` over the stacked trajectory."""
    a = np.asarray(y_ref, dtype=float)
    b = np.asarray(y_test, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ref = np.linalg.norm(a)
    if ref == 0:
        raise ValueError("reference signal is identically zero")
    return float(np.linalg.norm(b - a) / ref)


def per_output_rms_error(y_ref, y_test) -> np.ndarray:
    """Relative RMS error of each output column separately."""
    a = np.asarray(y_ref, dtype=float)
    b = np.asarray(y_test, dtype=float)
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    return np.array([relative_rms_error(a[:, i], b[:, i]) for i in range(a.shape[1])])


def energy_retention(sv, k: int) -> float:
    """Share of the summed singular values carried by the leading ``k``."""
    s = np.asarray(sv, dtype=float)
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise ValueError("singular values must be nonnegative and descending")
    if not 1 <= k <= s.size:
        raise ValueError(f"k={k} outside 1..{s.size}")
    total = s.sum()
    if total == 0:
        raise ValueError("all singular values are zero")
    return float(s[:k].sum() / total)


def min_rank_for_energy(sv, fraction: float) -> int:
    """Smallest ``k`` with ``energy_retention(sv, k) >= fraction``."""
    if not 0 < fraction <= 1:
        raise ValueError(f"energy fraction must be in (0, 1], got {fraction}")
    s = np.asarray(sv, dtype=float)
    total = s.sum()
    if total == 0:
        raise ValueError("all singular values are zero")
    frac = np.cumsum(s) / total
    # guard the last entry against rounding in the cumulative sum
    frac[-1] = 1.0
    return int(np.searchsorted(frac, fraction, side="left")) + 1


def _graph_factors(G: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized graph factors of ``G`` from its full SVD.

    Returns ``(I + G^H G)^{-1/2}``, ``(I + G G^H)^{-1/2}`` and
    ``G (I + G^H G)^{-1/2} = (I + G G^H)^{-1/2} G``. The Hermitian factors
    share eigenvectors with the singular vectors of ``G`` and have eigenvalues
    ``1 + s**2`` (floored at ``1e-14``), so no Gram matrix is formed and every
    returned matrix has norm at most one.
    """
    n_y, n_u = G.shape
    U, s, Vh = np.linalg.svd(G, full_matrices=True)
    V = Vh.conj().T
    sr = np.zeros(n_u)
    sl = np.zeros(n_y)
    sr[:s.size] = s
    sl[:s.size] = s
    right = (V / np.sqrt(np.maximum(1.0 + sr**2, 1e-14))) @ Vh
    left = (U / np.sqrt(np.maximum(1.0 + sl**2, 1e-14))) @ U.conj().T
    gain = (U[:, :s.size] * (s / np.sqrt(np.maximum(1.0 + s**2, 1e-14)))) @ Vh[:s.size]
    return right, left, gain


def chordal_distance(G1: np.ndarray, G2: np.ndarray) -> float:
    """Chordal distance between two complex gain matrices at one frequency.

    ``sigma_max((I + G2 G2^H)^{-1/2} (G1 - G2) (I + G1^H G1)^{-1/2})``, in [0, 1].
    Evaluated as ``L2 N1 - N2 R1`` with normalized factors, which avoids the
    cancellation of the direct product at large gains.
    """
    G1 = np.atleast_2d(G1)
    G2 = np.atleast_2d(G2)
    if G1.shape != G2.shape:
        raise ValueError(f"gain shapes differ: {G1.shape} vs {G2.shape}")
    if np.array_equal(G1, G2):
        return 0.0
    R1, _, N1 = _graph_factors(G1)
    _, L2, N2 = _graph_factors(G2)
    k = np.linalg.norm(L2 @ N1 - N2 @ R1, 2)
    return float(min(max(k, 0.0), 1.0))


def pointwise_gap(G1, G2) -> np.ndarray:
    """Chordal distance at every frequency of two responses on the same grid."""
    if G1.G.shape != G2.G.shape or not np.array_equal(G1.omega, G2.omega):
        raise ValueError("frequency responses must share grid and dimensions")
    return np.array([chordal_distance(a, b) for a, b in zip(G1.G, G2.G)])


@dataclass(frozen=True)
class GapSurface:
    theta: np.ndarray
    omega: np.ndarray
    gap: np.ndarray  # (n_theta, n_omega); NaN where a response was singular

    def __post_init__(self):
        if self.gap.shape != (len(self.theta), len(self.omega)):
            raise ValueError("gap shape does not match the grids")

    def max(self) -> float:
        return float(np.nanmax(self.gap))


def gap_surface(full, reduced, thetas, omegas) -> GapSurface:
    """Pointwise gap between frozen-parameter responses over a (theta, omega) grid.

    ``full`` and ``reduced`` are models accepted by
    :func:`pdmd.lpv.frequency_response`, or callables mapping ``theta`` to such
    a model (e.g. a plant linearization). Singular cells are NaN.
    """
    from .errors import NumericalError
    from .lpv import frequency_response

    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if thetas.size == 0 or omegas.size == 0:
        raise ValueError("grids must be nonempty")
    gap = np.full((thetas.size, omegas.size), np.nan)
    for i, th in enumerate(thetas):
        m1 = full(th) if callable(full) else full
        m2 = reduced(th) if callable(reduced) else reduced
        try:
            gap[i] = pointwise_gap(frequency_response(m1, th, omegas),
                                   frequency_response(m2, th, omegas))
            continue
        except NumericalError:
            pass
        for j, w in enumerate(omegas):
            try:
                r1 = frequency_response(m1, th, [w])
                r2 = frequency_response(m2, th, [w])
            except NumericalError:
                continue
            gap[i, j] = chordal_distance(r1.G[0], r2.G[0])
    return GapSurface(theta=thetas, omega=omegas, gap=gap)


def write_gap_csv(path, surface: GapSurface) -> None:
    """Header ``theta,omega,gap``; one row per cell, empty gap for missing cells."""
    from .snapshots import format_float

    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "omega", "gap"])
        for i, th in enumerate(surface.theta):
            for j, om in enumerate(surface.omega):
                g = surface.gap[i, j]
                w.writerow([format_float(th), format_float(om), "" if np.isnan(g) else format_float(g)])
