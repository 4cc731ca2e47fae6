"""The controlled plant ``x_{t+1} = A x_t + B_u u_t + B_w w_t`` and its weights."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidModel
from .linalg import psd_inv_sqrt, psd_sqrt, spectral_radius, sym

SYM_RTOL = 1e-10


def _matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise InvalidModel(f"{name} must be a matrix, got {M.ndim}-d data")
    if not np.all(np.isfinite(M)):
        raise InvalidModel(f"{name} has non-finite entries")
    return M


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Plant matrices with the LQR weights ``Q`` and ``R``.

    Shapes: ``A`` n x n, ``B_u`` n x m, ``B_w`` n x p, ``Q`` n x n, ``R`` m x m.
    ``Q`` and ``R`` must be symmetric positive definite. Stabilizability of
    ``(A, B_u)`` is not tested here; a successful Riccati solve certifies it.
    """

    A: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    Q: np.ndarray | None = None
    R: np.ndarray | None = None

    def __post_init__(self):
        A = _matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n) or n == 0:
            raise InvalidModel(f"A must be square and non-empty, got shape {A.shape}")
        B_u = _matrix(self.B_u, "B_u")
        B_w = _matrix(self.B_w, "B_w")
        if B_u.shape[0] != n and B_u.size == n:
            B_u = B_u.reshape(n, 1)
        if B_w.shape[0] != n and B_w.size == n:
            B_w = B_w.reshape(n, 1)
        for name, M in (("B_u", B_u), ("B_w", B_w)):
            if M.shape[0] != n or M.shape[1] == 0:
                raise InvalidModel(f"{name} must have {n} rows and at least one column, got {M.shape}")
        m = B_u.shape[1]
        Q = np.eye(n) if self.Q is None else _matrix(self.Q, "Q")
        R = np.eye(m) if self.R is None else _matrix(self.R, "R")
        for name, M, k in (("Q", Q, n), ("R", R, m)):
            if M.shape != (k, k):
                raise InvalidModel(f"{name} must be {k}x{k}, got {M.shape}")
            if np.max(np.abs(M - M.T)) > SYM_RTOL * max(1.0, np.max(np.abs(M))):
                raise InvalidModel(f"{name} is not symmetric")
            lam = np.linalg.eigvalsh(sym(M))
            if lam[0] <= 0:
                raise InvalidModel(f"{name} is not positive definite (min eigenvalue {lam[0]:.3e})")
        for name, M in (("A", A), ("B_u", B_u), ("B_w", B_w), ("Q", sym(Q)), ("R", sym(R))):
            object.__setattr__(self, name, M)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B_u.shape[1]

    @property
    def p(self) -> int:
        return self.B_w.shape[1]

    @cached_property
    def Q_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.Q)

    @cached_property
    def R_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.R)

    @cached_property
    def R_inv_sqrt(self) -> np.ndarray:
        return psd_inv_sqrt(self.R)

    def with_disturbance(self, B_w) -> "PlantModel":
        return PlantModel(self.A, self.B_u, B_w, self.Q, self.R)

    def __eq__(self, other):
        if not isinstance(other, PlantModel):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("A", "B_u", "B_w", "Q", "R")
        )

    __hash__ = None


def random_plant(rng: np.random.Generator, n: int, m: int, p: int,
                 rho: float | None = None, weights: bool = False) -> PlantModel:
    """Random plant with standard normal entries.

    ``A`` is rescaled to spectral radius ``rho`` when given (so ``rho > 1``
    yields an open-loop unstable plant). With ``weights`` the LQR weights are
    random well-conditioned SPD matrices; otherwise ``Q = I`` and ``R = I``.
    Generic ``B_u`` makes ``(A, B_u)`` controllable with probability one.
    """
    A = rng.standard_normal((n, n))
    if rho is not None:
        r = spectral_radius(A)
        A = A * (rho / r) if r > 0 else A
    B_u = rng.standard_normal((n, m))
    B_w = rng.standard_normal((n, p))
    Q = R = None
    if weights:
        Lq = rng.standard_normal((n, n))
        Lr = rng.standard_normal((m, m))
        Q = Lq @ Lq.T / n + 0.5 * np.eye(n)
        R = Lr @ Lr.T / m + 0.5 * np.eye(m)
    return PlantModel(A, B_u, B_w, Q, R)
