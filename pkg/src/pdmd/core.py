"""Parametric DMD: polynomial LPV regression from lifted data and projection onto a shared basis."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericalError
from .lifting import LiftedData, ThetaScale, build_lifted
from .metrics import min_rank_for_energy
from .snapshots import SnapshotEnsemble

__all__ = [
    "PolyLPVModel",
    "ReducedModel",
    "RankPolicy",
    "PDMDConfig",
    "SingularSpectrum",
    "fit_full",
    "singular_spectrum",
    "projection_basis",
    "select_nz",
    "reduce",
    "fit_pdmd",
    "save_model",
    "load_model",
]

# singular values below this fraction of the largest count as structurally zero
EFFECTIVE_RANK_RTOL = 1e-12
ILL_CONDITIONED = 1e10


@dataclass(frozen=True)
class PolyLPVModel:
    """``x+ = A(theta) x + B(theta) u``, ``y = C x`` with polynomial ``A``, ``B``.

    ``A`` has shape ``(n_p + 1, n, n)`` and ``B`` shape ``(n_p + 1, n, n_u)``;
    coefficients multiply powers of the *normalized* parameter
    ``theta_scale.normalize(theta)``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    theta_scale: ThetaScale = ThetaScale.identity()
    dt: float = 1.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if A.ndim == 2:
            A = A[None]
        if B.ndim == 2:
            B = B[None]
        if C.ndim == 1:
            C = C[None, :]
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise DataError(f"A must be a stack of square matrices, got shape {A.shape}")
        if B.ndim != 3 or B.shape[:2] != A.shape[:2]:
            raise DataError(f"B shape {B.shape} not conformable with A shape {A.shape}")
        if C.ndim != 2 or C.shape[1] != A.shape[1]:
            raise DataError(f"C shape {C.shape} not conformable with state dimension {A.shape[1]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(C))):
            raise DataError("model contains non-finite coefficients")
        if not self.dt > 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_p(self) -> int:
        return self.A.shape[0] - 1

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def n_u(self) -> int:
        return self.B.shape[2]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class ReducedModel:
    """Reduced LPV model plus the single basis used for every coefficient matrix."""

    model: PolyLPVModel
    basis: np.ndarray
    C_full: np.ndarray | None = None

    def __post_init__(self):
        V = np.asarray(self.basis, dtype=float)
        if V.ndim != 2 or V.shape[1] != self.model.n:
            raise DataError(f"basis shape {V.shape} does not match model dimension {self.model.n}")
        if not np.allclose(V.T @ V, np.eye(V.shape[1]), rtol=0, atol=1e-10):
            raise DataError("basis columns are not orthonormal")
        object.__setattr__(self, "basis", V)

    @property
    def n_z(self) -> int:
        return self.basis.shape[1]

    @property
    def n_x(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class RankPolicy:
    """Truncation rule for the regressor SVD.

    With ``rank`` set, exactly that many singular values are kept. Otherwise the
    larger of the energy rank (summed singular values) and the count above
    ``rtol * sigma_max`` is kept.
    """

    energy: float | None = 0.95
    rank: int | None = None
    rtol: float | None = 1e-10

    @classmethod
    def parse(cls, spec: str) -> "RankPolicy":
        """``energy:0.95``, ``rank:24``, ``tol:1e-10`` or ``default``."""
        kind, _, val = spec.partition(":")
        if kind == "default":
            return cls()
        if kind == "energy":
            return cls(energy=float(val), rank=None, rtol=None)
        if kind == "rank":
            return cls(energy=None, rank=int(val), rtol=None)
        if kind == "tol":
            return cls(energy=None, rank=None, rtol=float(val))
        raise ValueError(f"unknown rank policy {spec!r}")

    def select(self, sv: np.ndarray) -> int:
        sv = np.asarray(sv, dtype=float)
        if sv.size == 0 or sv[0] <= 0:
            raise NumericalError("regressor has no nonzero singular values (no informative data)")
        eff = int(np.sum(sv > EFFECTIVE_RANK_RTOL * sv[0]))
        if self.rank is not None:
            if not 1 <= self.rank <= sv.size:
                raise ValueError(f"rank {self.rank} outside 1..{sv.size}")
            if self.rank > eff:
                raise NumericalError(
                    f"requested rank {self.rank} exceeds effective regressor rank {eff}; "
                    "coefficients are not identifiable from this data")
            return self.rank
        r = 0
        if self.energy is not None:
            r = max(r, min_rank_for_energy(sv, self.energy))
        if self.rtol is not None:
            r = max(r, int(np.sum(sv > self.rtol * sv[0])))
        if r == 0:
            raise ValueError("rank policy selects nothing; set energy, rank or rtol")
        return r


@dataclass(frozen=True)
class SingularSpectrum:
    regressor_sv: np.ndarray
    shifted_sv: np.ndarray


def singular_spectrum(data: LiftedData) -> SingularSpectrum:
    """Descending singular values of the stacked regressor and of ``Xplus``."""
    return SingularSpectrum(
        regressor_sv=np.linalg.svd(data.regressor(), compute_uv=False),
        shifted_sv=np.linalg.svd(data.Xplus, compute_uv=False),
    )


def _split_blocks(M: np.ndarray, width: int, count: int) -> np.ndarray:
    return np.stack([M[:, i * width:(i + 1) * width] for i in range(count)])


def fit_full(data: LiftedData, C=None, rank_policy: RankPolicy | None = None) -> PolyLPVModel:
    """Least-squares polynomial LPV operator ``[A_0..A_np, B_0..B_np] = Xplus pinv(regressor)``.

    The pseudo-inverse is formed from the SVD truncated by ``rank_policy``.
    """
    policy = rank_policy or RankPolicy()
    n_x, n_u, n_p = data.n_x, data.n_u, data.n_p
    C = np.eye(n_x) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[1] != n_x:
        raise DataError(f"C has {C.shape[1]} columns, state dimension is {n_x}")
    R = data.regressor()
    if data.n_d < R.shape[0]:
        warnings.warn(f"N_d={data.n_d} is below the regressor row count {R.shape[0]}; "
                      "coefficients are underdetermined", stacklevel=2)
    Ur, s, Vt = np.linalg.svd(R, full_matrices=False)
    r = policy.select(s)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if cond > ILL_CONDITIONED:
        warnings.warn(f"regressor condition number {cond:.3g} exceeds {ILL_CONDITIONED:.0e}; "
                      f"keeping {r} of {s.size} singular values", stacklevel=2)
    AB = ((data.Xplus @ Vt[:r].T) / s[:r]) @ Ur[:, :r].T
    nA = (n_p + 1) * n_x
    A = _split_blocks(AB[:, :nA], n_x, n_p + 1)
    B = _split_blocks(AB[:, nA:], n_u, n_p + 1)
    return PolyLPVModel(A=A, B=B, C=C, theta_scale=data.theta_scale, dt=data.dt)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def projection_basis(data: LiftedData, n_z: int) -> np.ndarray:
    """Leading ``n_z`` left singular vectors of ``Xplus``, largest entry of each made positive."""
    n_x, n_d = data.Xplus.shape
    if not 1 <= n_z <= min(n_x, n_d):
        raise ValueError(f"n_z={n_z} must be in 1..{min(n_x, n_d)}")
    U, s, _ = np.linalg.svd(data.Xplus, full_matrices=False)
    eff = int(np.sum(s > EFFECTIVE_RANK_RTOL * s[0])) if s[0] > 0 else 0
    if n_z > eff:
        raise NumericalError(f"n_z={n_z} exceeds the effective rank {eff} of the shifted snapshots")
    return _fix_signs(U[:, :n_z])


def select_nz(data: LiftedData, energy: float = 0.95) -> int:
    """Smallest ``k`` whose leading singular values of ``Xplus`` retain ``energy`` of the sum."""
    return min_rank_for_energy(np.linalg.svd(data.Xplus, compute_uv=False), energy)


def reduce(full: PolyLPVModel, basis) -> ReducedModel:
    """Galerkin projection of every coefficient matrix onto ``basis``."""
    V = np.asarray(basis, dtype=float)
    if V.ndim != 2 or V.shape[0] != full.n or V.shape[1] > V.shape[0]:
        raise DataError(f"basis shape {V.shape} incompatible with model dimension {full.n}")
    Ar = np.einsum("ji,pjk,kl->pil", V, full.A, V)
    Br = np.einsum("ji,pjk->pik", V, full.B)
    red = PolyLPVModel(A=Ar, B=Br, C=full.C @ V, theta_scale=full.theta_scale, dt=full.dt)
    return ReducedModel(model=red, basis=V, C_full=full.C)


@dataclass
class PDMDConfig:
    """Settings for :func:`fit_pdmd`. ``n_z=None`` picks the energy rank of ``Xplus``."""

    n_p: int = 4
    n_z: int | None = None
    nz_energy: float = 0.95
    rank_policy: RankPolicy = field(default_factory=RankPolicy)
    C: np.ndarray | None = None
    normalize_theta: bool = True


def fit_pdmd(ensemble: SnapshotEnsemble | list[SnapshotEnsemble],
             config: PDMDConfig | None = None) -> ReducedModel:
    """Lift, regress, and project: snapshot data to a reduced polynomial LPV model."""
    cfg = config or PDMDConfig()
    ens = [ensemble] if isinstance(ensemble, SnapshotEnsemble) else list(ensemble)
    scale = ThetaScale.fit(np.concatenate([e.theta for e in ens]), enabled=cfg.normalize_theta)
    data = build_lifted(ens, cfg.n_p, scale)
    full = fit_full(data, cfg.C, cfg.rank_policy)
    n_z = cfg.n_z if cfg.n_z is not None else select_nz(data, cfg.nz_energy)
    return reduce(full, projection_basis(data, n_z))


def save_model(reduced: ReducedModel, path) -> None:
    m = reduced.model
    doc = {
        "n_p": m.n_p,
        "n_z": reduced.n_z,
        "n_x": reduced.n_x,
        "n_u": m.n_u,
        "n_y": m.n_y,
        "dt": m.dt,
        "theta_scale": {"min": m.theta_scale.min, "max": m.theta_scale.max,
                        "enabled": m.theta_scale.enabled},
        "A": m.A.tolist(),
        "B": m.B.tolist(),
        "C": m.C.tolist(),
        "C_full": None if reduced.C_full is None else np.asarray(reduced.C_full).tolist(),
        "basis": reduced.basis.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> ReducedModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        doc = json.loads(path.read_text())
        ts = doc["theta_scale"]
        model = PolyLPVModel(
            A=np.array(doc["A"], dtype=float).reshape(doc["n_p"] + 1, doc["n_z"], doc["n_z"]),
            B=np.array(doc["B"], dtype=float).reshape(doc["n_p"] + 1, doc["n_z"], doc["n_u"]),
            C=np.array(doc["C"], dtype=float).reshape(-1, doc["n_z"]),
            theta_scale=ThetaScale(float(ts["min"]), float(ts["max"]), bool(ts["enabled"])),
            dt=float(doc["dt"]),
        )
        C_full = doc.get("C_full")
        return ReducedModel(model=model,
                            basis=np.array(doc["basis"], dtype=float).reshape(-1, doc["n_z"]),
                            C_full=None if C_full is None else np.array(C_full, dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: malformed model file ({exc})") from None
