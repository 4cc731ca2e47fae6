"""Dense matrix utilities and the two structured equation solvers.

Everything downstream needs exactly two kinds of matrix equation:

* the discrete algebraic Riccati equation (DARE)
  ``P = Q + A* P A - A* P B (R + B* P B)^{-1} B* P A``
* the discrete Lyapunov (Stein) equation ``X = F X F* + W``

Both are solved here without generalized eigenvalue machinery: the DARE by
structure-preserving doubling (with a damped fixed-point fallback and a few
Newton steps for polishing), the Stein equation by Kronecker vectorization
for small problems and Smith squaring for larger ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, NonStabilizable, NotPsd, UnstableF

PSD_TOL = 1e-9
KRON_MAX_N = 64


def sym(X: np.ndarray) -> np.ndarray:
    """Hermitian part ``(X + X*) / 2``."""
    return 0.5 * (X + X.conj().T)


def spectral_radius(M: np.ndarray) -> float:
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def is_psd(X: np.ndarray, tol: float = PSD_TOL) -> bool:
    X = np.atleast_2d(X)
    if X.size == 0:
        return True
    lam = np.linalg.eigvalsh(sym(X))
    return bool(lam[0] >= -tol * max(np.max(np.abs(lam)), np.finfo(float).tiny))


def check_psd(X: np.ndarray, name: str = "matrix", tol: float = PSD_TOL) -> None:
    if not is_psd(X, tol):
        lam = np.linalg.eigvalsh(sym(np.atleast_2d(X)))
        raise NotPsd(f"{name} is not PSD (min eigenvalue {lam[0]:.3e}, max {lam[-1]:.3e})")


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric (Hermitian) square root of a PSD matrix.

    Small negative eigenvalues from roundoff are clipped to zero.
    """
    M = np.atleast_2d(M)
    if M.size == 0:
        return M.copy()
    lam, V = np.linalg.eigh(sym(M))
    root = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.conj().T
    return root.real if np.isrealobj(M) else root


def psd_inv_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of a positive definite matrix."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return M.copy()
    lam, V = np.linalg.eigh(sym(M))
    if lam[0] <= 0:
        raise IllConditioned(f"matrix is not positive definite (min eigenvalue {lam[0]:.3e})")
    root = (V / np.sqrt(lam)) @ V.conj().T
    return root.real if np.isrealobj(M) else root


# ---------------------------------------------------------------------------
# Riccati
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DareProblem:
    """Data of the control DARE. ``R`` must be positive definite."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A, B, Q, R = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (self.A, self.B, self.Q, self.R))
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n) or R.shape != (B.shape[1],) * 2:
            raise ValueError(
                f"inconsistent DARE dimensions A{A.shape} B{B.shape} Q{Q.shape} R{R.shape}"
            )
        for name, M in (("Q", Q), ("R", R)):
            if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(M).max())):
                raise ValueError(f"{name} is not symmetric")
        check_psd(Q, "Q")
        if np.linalg.eigvalsh(sym(R))[0] <= 0:
            raise ValueError("R is not positive definite")
        for name, M in zip("ABQR", (A, B, Q, R)):
            object.__setattr__(self, name, M)


def dare_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of the DARE residual at ``P``."""
    BtPA = B.conj().T @ P @ A
    rhs = Q + A.conj().T @ P @ A - BtPA.conj().T @ np.linalg.solve(R + B.conj().T @ P @ B, BtPA)
    return float(np.linalg.norm(P - rhs))


def dare_gain(A, B, R, P) -> np.ndarray:
    """Optimal feedback ``(R + B*PB)^{-1} B*PA``."""
    Reff = R + B.conj().T @ P @ B
    if np.linalg.cond(Reff) > 1e14:
        raise IllConditioned(f"R + B*PB is numerically singular (cond {np.linalg.cond(Reff):.2e})")
    return np.linalg.solve(Reff, B.conj().T @ P @ A)


def _sda(A, G, H, tol, max_iter):
    """Structure-preserving doubling for ``X = H + A* X (I + G X)^{-1} A``.

    Returns ``None`` when the iteration breaks down or does not converge.
    """
    n = A.shape[0]
    I = np.eye(n)
    Ak, Gk, Hk = A.copy(), G.copy(), H.copy()
    for _ in range(max_iter):
        W = I + Gk @ Hk
        try:
            WiA = np.linalg.solve(W, Ak)
            WiG = np.linalg.solve(W, Gk)
        except np.linalg.LinAlgError:
            return None
        H_next = sym(Hk + Ak.conj().T @ Hk @ WiA)
        G_next = sym(Gk + Ak @ WiG @ Ak.conj().T)
        A_next = Ak @ WiA
        if not (np.all(np.isfinite(H_next)) and np.all(np.isfinite(A_next))):
            return None
        delta = np.linalg.norm(H_next - Hk)
        Ak, Gk, Hk = A_next, G_next, H_next
        if delta <= tol * max(1.0, np.linalg.norm(Hk)):
            return Hk
    return None


def _fixed_point(A, B, Q, R, tol, max_iter, damping):
    """Damped Riccati recursion started from ``Q``."""
    P = Q.copy()
    for _ in range(max_iter):
        BtPA = B.conj().T @ P @ A
        try:
            step = Q + A.conj().T @ P @ A - BtPA.conj().T @ np.linalg.solve(R + B.conj().T @ P @ B, BtPA)
        except np.linalg.LinAlgError:
            return None
        P_next = sym((1.0 - damping) * P + damping * step)
        if not np.all(np.isfinite(P_next)):
            return None
        if np.linalg.norm(P_next - P) <= tol * max(1.0, np.linalg.norm(P_next)):
            return P_next
        P = P_next
    return None


def _newton_polish(A, B, Q, R, P, tol, steps=4):
    """Hewer/Newton refinement; each step solves one Stein equation."""
    best, best_res = P, dare_residual(A, B, Q, R, P)
    for _ in range(steps):
        if best_res <= tol * max(1.0, np.linalg.norm(best)):
            break
        try:
            K = np.linalg.solve(R + B.conj().T @ best @ B, B.conj().T @ best @ A)
            Ak = A - B @ K
            if spectral_radius(Ak) >= 1.0:
                break
            cand = solve_dlyap(Ak.conj().T, Q + K.conj().T @ R @ K, tol=0.0)
        except (np.linalg.LinAlgError, UnstableF):
            break
        res = dare_residual(A, B, Q, R, cand)
        if not res < best_res:
            break
        best, best_res = cand, res
    return best


def riccati_doubling(A, B, Q, R, tol: float = 1e-12, max_iter: int = 200,
                     fallback_iter: int = 20000, damping: float = 0.8) -> np.ndarray:
    """Stabilizing solution of the DARE with a possibly indefinite weight ``R``.

    This is the engine behind :func:`solve_dare`; it also serves the game
    Riccati equation of the H-infinity baseline, whose weight
    ``diag(R, -gamma^2 I)`` is indefinite. Only nonsingularity of ``R`` is
    required here. The caller decides which sign conditions to enforce.
    ``fallback_iter = 0`` disables the fixed-point fallback.

    Raises
    ------
    NonStabilizable
        If neither doubling nor the fixed-point iteration converges, or the
        resulting closed loop is not stable.
    IllConditioned
        If ``R`` or ``R + B*PB`` is numerically singular.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = sym(np.atleast_2d(np.asarray(Q, dtype=float)))
    R = sym(np.atleast_2d(np.asarray(R, dtype=float)))
    if np.linalg.cond(R) > 1e14:
        raise IllConditioned("weight R is numerically singular")
    G = sym(B @ np.linalg.solve(R, B.T))
    # divergence is detected explicitly, so overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        P = _sda(A, G, Q, tol, max_iter)
        if P is None and fallback_iter > 0:
            P = _fixed_point(A, B, Q, R, tol, fallback_iter, damping)
        if P is None:
            raise NonStabilizable("Riccati iteration did not converge")
        P = _newton_polish(A, B, Q, R, sym(P), tol)
        K = dare_gain(A, B, R, P)
        rho = spectral_radius(A - B @ K)
        if not rho < 1.0:
            raise NonStabilizable(f"Riccati solution is not stabilizing (closed-loop spectral radius {rho:.6f})")
        res = dare_residual(A, B, Q, R, P)
    if not res <= 1e4 * tol * max(1.0, np.linalg.norm(P)):
        raise NonStabilizable(f"Riccati residual {res:.3e} too large")
    return sym(P)


def solve_dare(prob: DareProblem, tol: float = 1e-12) -> np.ndarray:
    """Unique stabilizing PSD solution of the control DARE.

    Parameters
    ----------
    prob : DareProblem
        ``A`` (n x n), ``B`` (n x m), ``Q`` PSD, ``R`` positive definite.
    tol : float
        Relative convergence tolerance of the doubling iteration.

    Returns
    -------
    P : ndarray
        Symmetric PSD solution. ``A - B (R + B*PB)^{-1} B*PA`` is stable.
    """
    P = riccati_doubling(prob.A, prob.B, prob.Q, prob.R, tol=tol)
    check_psd(P, "Riccati solution")
    return P


# ---------------------------------------------------------------------------
# Lyapunov / Stein
# ---------------------------------------------------------------------------

def _dlyap_kron(F, W):
    n = F.shape[0]
    # row-major vec: vec(F X F^H) = (F kron conj(F)) vec(X)
    M = np.eye(n * n) - np.kron(F, F.conj())
    return np.linalg.solve(M, W.reshape(-1)).reshape(n, n)


def _dlyap_smith(F, W, max_squarings=64):
    X = W.copy()
    Fk = F.copy()
    for _ in range(max_squarings):
        X = X + Fk @ X @ Fk.conj().T
        Fk = Fk @ Fk
        if np.linalg.norm(Fk) < 1e-18:
            break
    return X


def solve_dlyap(F, W, tol: float = 1e-12, method: str = "auto", margin: float = 1e-10) -> np.ndarray:
    """Solve ``X = F X F* + W`` for stable ``F``.

    The same routine covers both orientations used downstream: pass ``F*``
    to obtain the dual equation ``X = F* X F + W``.

    Parameters
    ----------
    F : (n, n) array_like
        Spectral radius must be below ``1 - margin``.
    W : (n, n) array_like
        Hermitian right-hand side.
    tol : float
        Relative residual bound checked after the solve; ``0`` skips the check.
    method : {'auto', 'kronecker', 'smith'}
        ``auto`` uses Kronecker vectorization up to n = 64.

    Returns
    -------
    X : ndarray
        Hermitian solution.

    Raises
    ------
    UnstableF
        If ``F`` is not strictly stable.
    """
    F = np.atleast_2d(np.asarray(F))
    W = np.atleast_2d(np.asarray(W))
    n = F.shape[0]
    if n == 0:
        return W.copy()
    rho = spectral_radius(F)
    if rho >= 1.0 - margin:
        raise UnstableF(f"Stein equation needs a stable F (spectral radius {rho:.6f})")
    if method == "auto":
        method = "kronecker" if n <= KRON_MAX_N else "smith"
    if method == "kronecker":
        X = _dlyap_kron(F, W)
    elif method == "smith":
        X = _dlyap_smith(F, W)
    else:
        raise ValueError(f"unknown method {method!r}")
    X = sym(X)
    if tol > 0:
        res = np.linalg.norm(X - F @ X @ F.conj().T - W)
        # roundoff grows like 1/(1 - rho^2); allow for it
        limit = max(tol, 1e-14 / max(1.0 - rho * rho, 1e-12)) * max(1.0, np.linalg.norm(X)) * 1e2
        if res > limit:
            raise UnstableF(f"Stein residual {res:.3e} exceeds {limit:.3e}")
    return X


def lambda_max_product(Z, Pi, tol: float = PSD_TOL) -> float:
    """Largest eigenvalue of ``Z Pi`` for PSD ``Z`` and ``Pi``.

    Computed as ``lambda_max(Z^{1/2} Pi Z^{1/2})`` so the result is real and
    nonnegative.
    """
    Z = np.atleast_2d(Z)
    Pi = np.atleast_2d(Pi)
    if Z.shape != Pi.shape:
        raise ValueError(f"shape mismatch {Z.shape} vs {Pi.shape}")
    if Z.size == 0:
        return 0.0
    check_psd(Z, "Z", tol)
    check_psd(Pi, "Pi", tol)
    Zh = psd_sqrt(Z)
    lam = np.linalg.eigvalsh(sym(Zh @ Pi @ Zh))
    return float(max(lam[-1], 0.0))
