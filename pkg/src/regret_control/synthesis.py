"""Controller synthesis: LQR/H2, regret-optimal, and the H-infinity baseline.

The regret-optimal controller is built from one Riccati equation and a
handful of Stein equations. The same object can also be assembled the long
way round, from a spectral factor of ``I + F*F``, the causal/anticausal split
of ``Delta K0`` and a state-space Nehari solution; both routes are exposed so
they can be checked against each other.

Operator conventions: ``s = Q^{1/2} x`` and ``v = R^{1/2} u``, so the LQR cost
is ``||s||^2 + ||v||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import (BisectionFailure, NonStabilizable, SingularPivot, SynthesisError,
                     UnstableResult)
from .linalg import (DareProblem, is_psd, lambda_max_product, psd_inv_sqrt,
                     psd_sqrt, riccati_doubling, solve_dare, solve_dlyap, spectral_radius,
                     sym)
from .lti import LtiRealization, static_gain
from .plant import PlantModel

EPSILON_GAMMA = 1e-8
PIVOT_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Stabilizing LQR solution and the quantities derived from it."""

    P: np.ndarray
    K_lqr: np.ndarray
    A_K: np.ndarray
    R_eff: np.ndarray
    R_eff_sqrt: np.ndarray

    @cached_property
    def R_eff_inv_sqrt(self) -> np.ndarray:
        return psd_inv_sqrt(self.R_eff)


def lqr_synthesize(model: PlantModel, tol: float = 1e-12) -> RiccatiSolution:
    """Solve the LQR Riccati equation for ``model``.

    Raises :class:`NonStabilizable` when ``(A, B_u)`` is not stabilizable.
    """
    P = solve_dare(DareProblem(model.A, model.B_u, model.Q, model.R), tol=tol)
    R_eff = sym(model.R + model.B_u.T @ P @ model.B_u)
    K = np.linalg.solve(R_eff, model.B_u.T @ P @ model.A)
    A_K = model.A - model.B_u @ K
    if not spectral_radius(A_K) < 1.0:
        raise NonStabilizable("LQR closed loop is not stable")
    return RiccatiSolution(P=P, K_lqr=K, A_K=A_K, R_eff=R_eff, R_eff_sqrt=psd_sqrt(R_eff))


def h2_controller(riccati: RiccatiSolution) -> LtiRealization:
    """Static LQR state feedback ``u = -K_lqr x``."""
    return static_gain(-riccati.K_lqr, "state", "H2 state feedback")


def spectral_factor(model: PlantModel, riccati: RiccatiSolution):
    """Causal, causally invertible factor of ``I + F*F``.

    Returns
    -------
    Delta, DeltaInv : LtiRealization
        ``Delta(z) = R_eff^{1/2} (I + K_lqr (zI - A)^{-1} B_u) R^{-1/2}`` and
        its inverse, realized on ``A_K`` so it is stable.
    """
    Rh, Rih = model.R_sqrt, model.R_inv_sqrt
    Reh, Reih = riccati.R_eff_sqrt, riccati.R_eff_inv_sqrt
    K = riccati.K_lqr
    delta = LtiRealization(model.A, model.B_u @ Rih, Reh @ K, Reh @ Rih, "plant_input", "Delta")
    delta_inv = LtiRealization(riccati.A_K, model.B_u @ Reih, -Rh @ K, Rh @ Reih,
                               "plant_input", "Delta^-1")
    return delta, delta_inv


@dataclass(frozen=True, eq=False)
class NehariProblem:
    """Strictly anticausal target ``T(z) = H (z^{-1} I - F)^{-1} G``."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        n = F.shape[0]
        G = np.asarray(self.G, dtype=float).reshape(n, -1)
        H = np.asarray(self.H, dtype=float).reshape(-1, n)
        if F.shape != (n, n):
            raise ValueError(f"F must be square, got {F.shape}")
        rho = spectral_radius(F)
        if not rho < 1.0:
            raise UnstableResult(f"Nehari data needs a stable F (spectral radius {rho:.6f})")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)

    def target(self) -> LtiRealization:
        return LtiRealization(self.F, self.G, self.H, np.zeros((self.H.shape[0], self.G.shape[1])),
                              "plant_input", "Nehari target", anticausal=True)

    def markov(self, count: int) -> np.ndarray:
        """``H F^k G`` for ``k = 0 .. count-1`` stacked along axis 0."""
        out = np.empty((count, self.H.shape[0], self.G.shape[1]))
        X = self.G.copy()
        for k in range(count):
            out[k] = self.H @ X
            X = self.F @ X
        return out


def nehari_data(model: PlantModel, riccati: RiccatiSolution) -> NehariProblem:
    """Nehari data of ``z T(z)``, the shifted anticausal part of ``Delta K0``."""
    return NehariProblem(
        F=riccati.A_K.T,
        G=riccati.P @ model.B_w,
        H=-riccati.R_eff_inv_sqrt @ model.B_u.T,
    )


def decompose_delta_k0(model: PlantModel, riccati: RiccatiSolution):
    """Split ``Delta K0`` into anticausal ``T`` and strictly causal ``S``.

    ``T(z) = H (I + (z^{-1} I - A_K*)^{-1} A_K*) P B_w`` is returned as an
    anticausal realization; ``S(z) = H P A (zI - A)^{-1} B_w`` as a causal
    one, with ``H = -R_eff^{-1/2} B_u*``.
    """
    H = -riccati.R_eff_inv_sqrt @ model.B_u.T
    F = riccati.A_K.T
    G = riccati.P @ model.B_w
    T = LtiRealization(F, F @ G, H, H @ G, "plant_input", "{Delta K0}_-", anticausal=True)
    S = LtiRealization(model.A, model.B_w, H @ riccati.P @ model.A,
                       np.zeros((model.m, model.p)), "plant_input", "{Delta K0}_+")
    return T, S


@dataclass(frozen=True, eq=False)
class NehariSolution:
    Z: np.ndarray
    Pi: np.ndarray
    gamma_sq: float
    gamma_sq_used: float
    Z_gamma: np.ndarray
    K_gamma: np.ndarray
    F_gamma: np.ndarray
    L: LtiRealization
    epsilon: float
    pivot_cond: float


def _select_gamma(optimal, gamma, epsilon, solve_at):
    """Run ``solve_at(gamma_sq)`` with the optimum-conditioning fallback.

    ``solve_at`` returns ``(result, pivot_cond)`` or raises. At the optimum
    the central gain may be badly conditioned; in that case the level is
    relaxed once to ``(1 + epsilon)`` times the optimum.
    """
    if gamma is not None:
        g2 = float(gamma) ** 2
        if g2 < optimal * (1.0 - 1e-12):
            raise ValueError(f"gamma^2 = {g2:.6g} is below the optimal level {optimal:.6g}")
        res, cond = solve_at(g2)
        return res, g2, 0.0, cond
    try:
        res, cond = solve_at(optimal)
        if cond <= PIVOT_COND_LIMIT:
            return res, optimal, 0.0, cond
    except (SingularPivot, UnstableResult, np.linalg.LinAlgError):
        pass
    g2 = optimal * (1.0 + epsilon)
    res, cond = solve_at(g2)
    if cond > PIVOT_COND_LIMIT:
        raise SingularPivot(f"central gain pivot is singular (cond {cond:.2e}) even at relaxed level")
    return res, g2, epsilon, cond


def nehari_solve(prob: NehariProblem, gamma: float | None = None,
                 epsilon: float = EPSILON_GAMMA) -> NehariSolution:
    """Best causal approximation of a strictly anticausal target.

    Parameters
    ----------
    prob : NehariProblem
    gamma : float, optional
        Attenuation level for a suboptimal central solution. ``None`` uses
        the optimal level ``sqrt(lambda_max(Z Pi))``.
    epsilon : float
        Relative relaxation of the optimal level applied only when the
        central gain is numerically singular there.

    Returns
    -------
    NehariSolution
        ``L`` is causal with ``A = F_gamma`` and
        ``L(z) = H Pi (I + F_gamma (zI - F_gamma)^{-1}) K_gamma``.
    """
    F, G, H = prob.F, prob.G, prob.H
    n = F.shape[0]
    Z = solve_dlyap(F.T, H.T @ H)
    Pi = solve_dlyap(F, G @ G.T)
    optimal = lambda_max_product(Z, Pi)
    m_out, p_in = H.shape[0], G.shape[1]

    if optimal == 0.0 and gamma is None:
        L = LtiRealization(F.T, np.zeros((n, p_in)), np.zeros((m_out, n)), np.zeros((m_out, p_in)),
                           "plant_input", "Nehari solution")
        return NehariSolution(Z, Pi, 0.0, 0.0, np.zeros_like(Z), np.zeros((n, p_in)), F.T.copy(),
                              L, 0.0, 1.0)

    def solve_at(g2):
        Zg = solve_dlyap(F.T, H.T @ H / g2)
        pivot = np.eye(n) - F.T @ Zg @ F @ Pi
        cond = np.linalg.cond(pivot)
        if not np.isfinite(cond) or cond > 1e16:
            raise SingularPivot(f"central gain pivot is singular (cond {cond:.2e})")
        Kg = np.linalg.solve(pivot, F.T @ Zg @ G)
        Fg = F.T - Kg @ G.T
        if not spectral_radius(Fg) < 1.0:
            raise UnstableResult(f"Nehari state matrix unstable (rho {spectral_radius(Fg):.6f})")
        return (Zg, Kg, Fg), cond

    (Zg, Kg, Fg), g2, eps, cond = _select_gamma(optimal, gamma, epsilon, solve_at)
    HPi = H @ Pi
    L = LtiRealization(Fg, Kg, HPi @ Fg, HPi @ Kg, "plant_input", "Nehari solution")
    return NehariSolution(Z, Pi, optimal, g2, Zg, Kg, Fg, L, eps, cond)


@dataclass(frozen=True, eq=False)
class RegretSynthesis:
    """Regret-optimal controller and the data it is built from.

    ``controller`` is the disturbance-driven form: it consumes ``[x_t; w_t]``
    and runs ``xi_{t+1} = F_gamma xi_t + K_gamma w_t``,
    ``u_t = -R_eff^{-1} B_u* Pi xi_t - K_lqr x_t``.
    ``controller_state_only`` produces the same inputs from states alone by
    reconstructing ``B_w w_t`` from consecutive states.
    """

    riccati: RiccatiSolution
    Z: np.ndarray
    Pi: np.ndarray
    gamma_sq: float
    gamma_sq_used: float
    Z_gamma: np.ndarray
    K_gamma: np.ndarray
    F_gamma: np.ndarray
    innovation_gain: np.ndarray
    controller: LtiRealization
    controller_state_only: LtiRealization
    epsilon: float
    pivot_cond: float

    @property
    def regret(self) -> float:
        return self.gamma_sq


def regret_synthesize(model: PlantModel, epsilon: float = EPSILON_GAMMA,
                      riccati: RiccatiSolution | None = None) -> RegretSynthesis:
    """Regret-optimal strictly causal controller.

    The optimal regret is ``lambda_max(Z Pi)`` with
    ``Z = A_K Z A_K* + B_u R_eff^{-1} B_u*`` and
    ``Pi = A_K* Pi A_K + P B_w B_w* P``.

    Raises
    ------
    SingularPivot, UnstableResult
        If the central gain cannot be formed even after relaxing the level
        by ``epsilon``.
    """
    ric = riccati if riccati is not None else lqr_synthesize(model)
    A_K, P = ric.A_K, ric.P
    n = model.n
    BRB = sym(model.B_u @ np.linalg.solve(ric.R_eff, model.B_u.T))
    Z = solve_dlyap(A_K, BRB)
    Pi = solve_dlyap(A_K.T, P @ model.B_w @ model.B_w.T @ P)
    optimal = lambda_max_product(Z, Pi)
    C_xi = -np.linalg.solve(ric.R_eff, model.B_u.T @ Pi)

    if optimal == 0.0:
        Zg = np.zeros((n, n))
        Mg = np.zeros((n, n))
        g2, eps, cond = 0.0, 0.0, 1.0
    else:
        def solve_at(level):
            Zg = solve_dlyap(A_K, BRB / level)
            pivot = np.eye(n) - A_K @ Zg @ A_K.T @ Pi
            cond = np.linalg.cond(pivot)
            if not np.isfinite(cond) or cond > 1e16:
                raise SingularPivot(f"central gain pivot is singular (cond {cond:.2e})")
            Mg = np.linalg.solve(pivot, A_K @ Zg @ P)
            Fg = A_K - Mg @ model.B_w @ model.B_w.T @ P
            if not spectral_radius(Fg) < 1.0:
                raise UnstableResult(f"controller state matrix unstable (rho {spectral_radius(Fg):.6f})")
            return (Zg, Mg), cond

        (Zg, Mg), g2, eps, cond = _select_gamma(optimal, None, epsilon, solve_at)

    Kg = Mg @ model.B_w
    Fg = A_K - Kg @ model.B_w.T @ P
    controller = LtiRealization(
        Fg,
        np.hstack([np.zeros((n, n)), Kg]),
        C_xi,
        np.hstack([-ric.K_lqr, np.zeros((model.m, model.p))]),
        "full_information",
        "regret-optimal (disturbance-driven)",
    )
    # eta_t = xi_t - M x_t removes the dependence on x_{t+1}
    A_eta = Fg - Mg @ model.B_u @ C_xi
    state_only = LtiRealization(
        A_eta,
        A_eta @ Mg - Mg @ A_K,
        C_xi,
        C_xi @ Mg - ric.K_lqr,
        "state",
        "regret-optimal (state-only)",
    )
    return RegretSynthesis(ric, Z, Pi, optimal, g2, Zg, Kg, Fg, Mg, controller, state_only, eps, cond)


def regret_controller_state_only(syn: RegretSynthesis, model: PlantModel | None = None) -> LtiRealization:
    """State-driven realization of the regret-optimal controller.

    With ``M = (I - A_K Z_g A_K* Pi)^{-1} A_K Z_g P`` the disturbance enters
    only through ``K_gamma w_t = M (x_{t+1} - A x_t - B_u u_t)``. Substituting
    ``eta_t = xi_t - M x_t`` gives a proper realization driven by ``x_t``.
    """
    return syn.controller_state_only


def assemble_nehari_controller(model: PlantModel, riccati: RiccatiSolution,
                               L: LtiRealization, S: LtiRealization) -> LtiRealization:
    """Cascade ``Delta^{-1} (L + S)`` as a policy ``w -> u``.

    ``L`` must be the strictly causal Nehari solution (already delayed by
    one step) and ``S`` the strictly causal part of ``Delta K0``. The cascade
    maps ``w`` to ``v = R^{1/2} u``; the returned realization is rescaled to
    produce ``u``.
    """
    _, delta_inv = spectral_factor(model, riccati)
    K = L.parallel(S).series(delta_inv)
    K = K.scaled(left=model.R_inv_sqrt)
    return LtiRealization(K.A, K.B, K.C, K.D, "disturbance", "regret-optimal (Nehari assembly)")


def nehari_controller(model: PlantModel, riccati: RiccatiSolution | None = None,
                      epsilon: float = EPSILON_GAMMA):
    """Run the factor / split / Nehari / assemble pipeline end to end.

    Returns ``(policy, nehari_solution)``.
    """
    ric = riccati if riccati is not None else lqr_synthesize(model)
    sol = nehari_solve(nehari_data(model, ric), epsilon=epsilon)
    _, S = decompose_delta_k0(model, ric)
    policy = assemble_nehari_controller(model, ric, sol.L.delayed(), S)
    return policy, sol


# ---------------------------------------------------------------------------
# H-infinity baseline
# ---------------------------------------------------------------------------

class HinfSynthesis(NamedTuple):
    gamma_inf: float
    controller: LtiRealization


def hinf_state_feedback(model: PlantModel, gamma: float):
    """Strictly causal full-information H-infinity gain at level ``gamma``.

    Solves the game Riccati equation with input ``[B_u B_w]`` and weight
    ``diag(R, -gamma^2 I)``. The level is feasible when the stabilizing
    solution exists, is PSD, and ``gamma^2 I - B_w* P B_w`` is positive
    definite (the disturbance acts after the control is committed).

    Returns the gain ``K`` of ``u = -K x`` or ``None`` if infeasible.
    """
    A, Bu, Bw, R = model.A, model.B_u, model.B_w, model.R
    if gamma <= 0:
        return None
    B = np.hstack([Bu, Bw])
    Rt = np.block([
        [R, np.zeros((model.m, model.p))],
        [np.zeros((model.p, model.m)), -gamma ** 2 * np.eye(model.p)],
    ])
    try:
        P = riccati_doubling(A, B, model.Q, Rt, fallback_iter=0)
    except (SynthesisError, np.linalg.LinAlgError):
        return None
    if not is_psd(P):
        return None
    S = sym(gamma ** 2 * np.eye(model.p) - Bw.T @ P @ Bw)
    if np.linalg.eigvalsh(S)[0] <= 0:
        return None
    M = P + P @ Bw @ np.linalg.solve(S, Bw.T @ P)
    try:
        K = np.linalg.solve(R + Bu.T @ M @ Bu, Bu.T @ M @ A)
    except np.linalg.LinAlgError:
        return None
    if not spectral_radius(A - Bu @ K) < 1.0:
        return None
    return K


def hinf_synthesize(model: PlantModel, bisect_tol: float = 1e-4, max_doublings: int = 80) -> HinfSynthesis:
    """Bisection for the optimal strictly causal H-infinity state feedback.

    Returns the smallest feasible level found (relative bracket width below
    ``bisect_tol``) and the central controller at that level.
    """
    if not np.any(model.B_w):
        ric = lqr_synthesize(model)
        return HinfSynthesis(0.0, static_gain(-ric.K_lqr, "state", "H-infinity state feedback"))
    hi = 1.0
    K_hi = hinf_state_feedback(model, hi)
    lo = 0.0
    if K_hi is None:
        for _ in range(max_doublings):
            lo, hi = hi, 2.0 * hi
            K_hi = hinf_state_feedback(model, hi)
            if K_hi is not None:
                break
        else:
            raise BisectionFailure(f"no feasible level up to {hi:.3e}")
    else:
        for _ in range(max_doublings):
            K_try = hinf_state_feedback(model, hi / 2.0)
            if K_try is None:
                lo = hi / 2.0
                break
            hi, K_hi = hi / 2.0, K_try
    while hi - lo > bisect_tol * hi:
        mid = 0.5 * (lo + hi)
        K_mid = hinf_state_feedback(model, mid)
        if K_mid is None:
            lo = mid
        else:
            hi, K_hi = mid, K_mid
    return HinfSynthesis(hi, static_gain(-K_hi, "state", "H-infinity state feedback"))
