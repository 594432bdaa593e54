"""Surrogate truth systems for data generation and validation.

Two discrete-time plants share the ``step(x, u, theta)`` interface:

``PolyLPVPlant``
    An exact polynomial LPV system, ``x+ = A(theta) x + B(theta) u``.

``FlexChainPlant``
    A clamped-free chain of ``N`` point masses joined by linear + cubic springs,
    with structural damping and a parameter-dependent velocity load standing in
    for aerodynamic damping. Node ``i`` obeys::

        m q_i'' = -k_lin (2 q_i - q_{i-1} - q_{i+1}) - k_cub q_i**3 - c q_i'
                  + (a0 + a1 theta + a2 theta**2) q_i' + b_i . u

    with ``q_0 = 0`` (clamp) and a single spring on the free last node. The
    state is ``[s q_1..s q_N, q_1'..q_N']`` with displacement unit scale ``s``
    (``q_scale``, default 1); one step is one classical RK4 step with
    ``u`` and ``theta`` held constant. Net damping ``c - a(theta)`` turning
    negative reproduces a parameter-driven instability onset.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import PolyLPVModel
from .errors import DataError, NumericalError
from .lpv import eval_at
from .snapshots import ArcsinRule

__all__ = [
    "FlexChainConfig",
    "FlexChainPlant",
    "PolyLPVPlant",
    "make_random_polylpv",
    "linearize_plant",
    "rk4_linear_chain",
    "flexchain_instability_theta",
    "linear_family",
    "load_plant",
    "save_plant",
]


class PolyLPVPlant:
    """Exact polynomial LPV plant backed by a :class:`PolyLPVModel`."""

    kind = "exact-poly-lpv"

    def __init__(self, model: PolyLPVModel):
        self.model = model

    @property
    def n_x(self) -> int:
        return self.model.n

    @property
    def n_u(self) -> int:
        return self.model.n_u

    @property
    def dt(self) -> float:
        return self.model.dt

    def step(self, x, u, theta: float) -> np.ndarray:
        A, B = eval_at(self.model, theta)
        x_next = A @ np.asarray(x, dtype=float) + B @ np.atleast_1d(np.asarray(u, dtype=float))
        if not np.all(np.isfinite(x_next)):
            raise NumericalError("plant step produced non-finite state")
        return x_next


@dataclass(frozen=True)
class FlexChainConfig:
    N: int = 10
    m: float = 1.0
    k_lin: float = 1764.0
    k_cub: float = 0.0
    c: float = 0.5
    a0: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    b: tuple = ()          # per-node gains, shape (N,) or (N, n_u); empty means tip-actuated
    dt: float = 0.001
    v0: float = 22.0       # reference speed of the arcsin scheduling rule
    rule_node: int = -1    # node whose velocity feeds the rule; negative counts from the tip
    q_scale: float = 1.0   # displacement unit: the state stores q_scale * q

    def __post_init__(self):
        if self.N < 2:
            raise DataError(f"N must be >= 2, got {self.N}")
        if not (self.m > 0 and self.k_lin > 0):
            raise DataError("m and k_lin must be positive")
        if self.k_cub < 0 or self.c < 0:
            raise DataError("k_cub and c must be nonnegative")
        if not self.dt > 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        if not self.q_scale > 0:
            raise DataError(f"q_scale must be positive, got {self.q_scale}")
        for v in (self.q_scale, self.m, self.k_lin, self.k_cub, self.c, self.a0, self.a1, self.a2, self.dt, self.v0):
            if not math.isfinite(v):
                raise DataError("flex-chain parameters must be finite")
        g = self.gain_matrix()
        if g.shape[0] != self.N:
            raise DataError(f"b must have {self.N} rows, got {g.shape[0]}")

    @classmethod
    def from_modal(cls, N: int, f1: float, zeta: float, **kw) -> "FlexChainConfig":
        """Chain whose first mode sits at ``f1`` Hz with damping ratio ``zeta``.

        Displacements are stored in balanced units (``q_scale`` equal to the
        first-mode angular frequency) unless ``q_scale`` is passed.
        """
        m = kw.pop("m", 1.0)
        w1 = 2 * np.pi * f1
        k_lin = m * (w1 / (2 * np.sin(np.pi / (2 * (2 * N + 1))))) ** 2
        kw.setdefault("q_scale", w1)
        return cls(N=N, m=m, k_lin=k_lin, c=2 * zeta * w1 * m, **kw)

    def gain_matrix(self) -> np.ndarray:
        if len(self.b) == 0:
            g = np.zeros((self.N, 1))
            g[-1, 0] = 1.0
            return g
        g = np.asarray(self.b, dtype=float)
        return g[:, None] if g.ndim == 1 else g

    def load_coefficient(self, theta: float) -> float:
        return self.a0 + self.a1 * theta + self.a2 * theta**2


def _stiffness(N: int, k: float) -> np.ndarray:
    K = 2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)
    K[-1, -1] = 1.0
    return k * K


def _rk4_poly(M: np.ndarray) -> np.ndarray:
    """``I + M + M^2/2 + M^3/6 + M^4/24``."""
    I = np.eye(M.shape[0])
    return I + M @ (I + M @ (I / 2 + M @ (I / 6 + M / 24)))


class FlexChainPlant:
    """Nonlinear parameter-varying mass-spring chain, advanced by RK4."""

    kind = "flex-chain"

    def __init__(self, config: FlexChainConfig):
        self.config = config
        self.K = _stiffness(config.N, config.k_lin)
        self.G = config.gain_matrix()
        self._check_integrator()

    @property
    def n_x(self) -> int:
        return 2 * self.config.N

    @property
    def n_u(self) -> int:
        return self.G.shape[1]

    @property
    def dt(self) -> float:
        return self.config.dt

    def continuous_jacobian(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        """Linearization of the continuous dynamics about the origin."""
        cfg = self.config
        N = cfg.N
        Ac = np.zeros((2 * N, 2 * N))
        Ac[:N, N:] = cfg.q_scale * np.eye(N)
        Ac[N:, :N] = -self.K / (cfg.m * cfg.q_scale)
        Ac[N:, N:] = (cfg.load_coefficient(theta) - cfg.c) / cfg.m * np.eye(N)
        Bc = np.vstack([np.zeros_like(self.G), self.G / cfg.m])
        return Ac, Bc

    def _check_integrator(self) -> None:
        Ac, _ = self.continuous_jacobian(0.0)
        mu = np.linalg.eigvals(Ac) * self.dt
        amp = np.abs(1 + mu + mu**2 / 2 + mu**3 / 6 + mu**4 / 24)
        exact = np.abs(np.exp(mu))
        if np.any(amp > np.maximum(exact, 1.0) + 1e-9):
            raise DataError(f"dt={self.dt} makes RK4 unstable for this chain "
                            f"(max |lambda| dt = {np.max(np.abs(mu)):.3g})")

    def rhs(self, x: np.ndarray, u: np.ndarray, theta: float) -> np.ndarray:
        cfg = self.config
        N = cfg.N
        q, v = x[:N] / cfg.q_scale, x[N:]
        force = (-self.K @ q - cfg.k_cub * q**3 + (cfg.load_coefficient(theta) - cfg.c) * v
                 + self.G @ u)
        return np.concatenate([cfg.q_scale * v, force / cfg.m])

    def step(self, x, u, theta: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        h = self.dt
        k1 = self.rhs(x, u, theta)
        k2 = self.rhs(x + 0.5 * h * k1, u, theta)
        k3 = self.rhs(x + 0.5 * h * k2, u, theta)
        k4 = self.rhs(x + h * k3, u, theta)
        x_next = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x_next)):
            raise NumericalError("plant step produced non-finite state")
        return x_next

    def velocity_index(self, node: int) -> int:
        """State index of node velocity; ``node`` is 1-based, negative counts from the tip."""
        N = self.config.N
        n = node if node > 0 else N + 1 + node
        if not 1 <= n <= N:
            raise ValueError(f"node {node} outside 1..{N}")
        return N + n - 1

    def theta_rule(self, node: int | None = None, v0: float | None = None) -> ArcsinRule:
        """``theta = -arcsin(v_node / v0)``."""
        cfg = self.config
        return ArcsinRule(self.velocity_index(cfg.rule_node if node is None else node),
                          cfg.v0 if v0 is None else v0)

    def energy(self, x) -> float:
        """Mechanical energy (kinetic + linear and quartic spring potential)."""
        cfg = self.config
        N = cfg.N
        q, v = np.asarray(x[:N]) / cfg.q_scale, np.asarray(x[N:])
        return float(0.5 * cfg.m * v @ v + 0.5 * q @ self.K @ q + 0.25 * cfg.k_cub * np.sum(q**4))


def rk4_linear_chain(plant: FlexChainPlant, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form RK4 discretization of the chain linearized at the origin."""
    Ac, Bc = plant.continuous_jacobian(theta)
    h = plant.dt
    M = h * Ac
    I = np.eye(M.shape[0])
    Bd = h * (I + M @ (I / 2 + M @ (I / 6 + M / 24))) @ Bc
    return _rk4_poly(M), Bd


def make_random_polylpv(n_x: int, n_u: int, n_p: int, spectral_target: float = 0.9,
                        seed: int = 0, dt: float = 0.05, max_iter: int = 20) -> PolyLPVPlant:
    """Random exact polynomial LPV plant, stable for frozen ``theta`` in ``[-1, 1]``.

    Spectral radius of ``A(theta)`` is at most ``spectral_target`` at 11
    equispaced points of ``[-1, 1]``.
    """
    if not 0 < spectral_target < 1:
        raise ValueError(f"spectral_target must be in (0, 1), got {spectral_target}")
    if n_p < 0 or n_x < 1 or n_u < 1:
        raise ValueError("need n_x, n_u >= 1 and n_p >= 0")
    rng = np.random.default_rng(seed)
    decay = 0.5 ** np.arange(n_p + 1)
    A = rng.standard_normal((n_p + 1, n_x, n_x)) / np.sqrt(n_x) * decay[:, None, None]
    B = rng.standard_normal((n_p + 1, n_x, n_u)) * decay[:, None, None]
    grid = np.linspace(-1.0, 1.0, 11)

    def radius(A):
        powers = grid[:, None] ** np.arange(n_p + 1)
        return max(np.max(np.abs(np.linalg.eigvals(np.tensordot(p, A, axes=1)))) for p in powers)

    for _ in range(max_iter):
        rho = radius(A)
        if rho <= spectral_target:
            break
        A = A * (spectral_target / rho) * (1 - 1e-12)
    else:
        raise NumericalError(f"could not rescale spectral radius below {spectral_target}")
    return PolyLPVPlant(PolyLPVModel(A=A, B=B, C=np.eye(n_x), dt=dt))


def linearize_plant(plant, x_eq, u_eq, theta: float, h: float = 1e-6,
                    tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference Jacobians of ``plant.step`` about a fixed point."""
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    x_eq = np.asarray(x_eq, dtype=float)
    u_eq = np.atleast_1d(np.asarray(u_eq, dtype=float))
    drift = np.linalg.norm(plant.step(x_eq, u_eq, theta) - x_eq)
    if drift > tol * max(1.0, np.linalg.norm(x_eq)):
        raise ValueError(f"(x_eq, u_eq) is not a fixed point at theta={theta}: drift {drift:.3g}")
    A = np.empty((x_eq.size, x_eq.size))
    B = np.empty((x_eq.size, u_eq.size))
    for j in range(x_eq.size):
        e = np.zeros_like(x_eq)
        e[j] = h
        A[:, j] = (plant.step(x_eq + e, u_eq, theta) - plant.step(x_eq - e, u_eq, theta)) / (2 * h)
    for j in range(u_eq.size):
        e = np.zeros_like(u_eq)
        e[j] = h
        B[:, j] = (plant.step(x_eq, u_eq + e, theta) - plant.step(x_eq, u_eq - e, theta)) / (2 * h)
    return A, B


def flexchain_instability_theta(config: FlexChainConfig, thetas) -> float | None:
    """First grid value whose origin linearization has spectral radius >= 1, else ``None``."""
    thetas = np.asarray(thetas, dtype=float)
    if np.any(np.diff(thetas) < 0):
        raise ValueError("theta grid must be sorted ascending")
    plant = FlexChainPlant(config)
    x0 = np.zeros(plant.n_x)
    u0 = np.zeros(plant.n_u)
    for th in thetas:
        A, _ = linearize_plant(plant, x0, u0, th)
        if np.max(np.abs(np.linalg.eigvals(A))) >= 1.0:
            return float(th)
    return None


def linear_family(plant, C=None):
    """``theta -> PolyLPVModel`` of the plant linearized at the origin (frozen theta)."""
    C = np.eye(plant.n_x) if C is None else np.asarray(C, dtype=float)
    if isinstance(plant, PolyLPVPlant):
        def fam(theta):
            A, B = eval_at(plant.model, theta)
            return PolyLPVModel(A=A, B=B, C=C, dt=plant.dt)
        return fam
    x0 = np.zeros(plant.n_x)
    u0 = np.zeros(plant.n_u)

    def fam(theta):
        A, B = linearize_plant(plant, x0, u0, theta)
        return PolyLPVModel(A=A, B=B, C=C, dt=plant.dt)
    return fam


def load_plant(path, seed: int | None = None):
    """Build a plant from a JSON config with a ``kind`` tag.

    ``exact-poly-lpv`` takes either explicit ``A``/``B`` stacks or a ``random``
    block of :func:`make_random_polylpv` arguments; ``flex-chain`` takes the
    :class:`FlexChainConfig` fields.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such plant config: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    kind = doc.pop("kind", None)
    try:
        if kind == "flex-chain":
            if "b" in doc:
                doc["b"] = tuple(tuple(r) if isinstance(r, list) else r for r in doc["b"])
            return FlexChainPlant(FlexChainConfig(**doc))
        if kind == "exact-poly-lpv":
            if "random" in doc:
                args = dict(doc["random"])
                if seed is not None and "seed" not in args:
                    args["seed"] = seed
                if "dt" in doc:
                    args["dt"] = doc["dt"]
                return make_random_polylpv(**args)
            model = PolyLPVModel(A=np.array(doc["A"], dtype=float), B=np.array(doc["B"], dtype=float),
                                 C=np.array(doc.get("C", np.eye(np.array(doc["A"]).shape[-1]))),
                                 dt=float(doc.get("dt", 1.0)))
            return PolyLPVPlant(model)
    except TypeError as exc:
        raise DataError(f"{path}: bad plant fields ({exc})") from None
    raise DataError(f"{path}: unknown plant kind {kind!r}")


def save_plant(plant, path) -> None:
    if isinstance(plant, FlexChainPlant):
        doc = {"kind": plant.kind, **asdict(plant.config)}
        doc["b"] = [list(r) if isinstance(r, tuple) else r for r in doc["b"]]
    else:
        m = plant.model
        doc = {"kind": plant.kind, "A": m.A.tolist(), "B": m.B.tolist(), "C": m.C.tolist(), "dt": m.dt}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
