"""Frequency-domain evaluation of closed loops and a truncated-operator oracle.

The closed loop of a controller maps ``w`` to ``[s; v]`` with
``s = Q^{1/2} x`` and ``v = R^{1/2} u``. Three per-frequency quantities are
tracked: ``trace(T*T)`` (its average is the squared Frobenius norm),
``sigma_max(T)^2`` (its peak is the squared operator norm) and
``lambda_max(T*T - T0*T0)`` where ``T0*T0`` belongs to the clairvoyant
non-causal controller (its peak is the regret).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import OracleTooLarge, ResolventSingular, UnstableLoop
from .linalg import spectral_radius
from .lti import LtiRealization
from .plant import PlantModel
from .synthesis import NehariProblem, RiccatiSolution, nehari_data

GRID_SIZE = 4096
RESOLVENT_GUARD = 1e-8
ORACLE_MAX_DIM = 4096
NONCAUSAL = "noncausal"


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Interconnection of a plant with a controller.

    ``(A, B, C, D)`` maps ``w`` to ``[s; v]``; ``(A, B, C_u, D_u)`` maps
    ``w`` to ``u``. The closed-loop state is ``[x; controller state]``.
    """

    model: PlantModel
    controller: LtiRealization
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    C_u: np.ndarray
    D_u: np.ndarray

    @property
    def strictly_causal(self) -> bool:
        return not np.any(self.D_u)

    def frequency_response(self, omegas) -> np.ndarray:
        return self.realization().frequency_response(omegas)

    def realization(self) -> LtiRealization:
        return LtiRealization(self.A, self.B, self.C, self.D, "disturbance", "T_K")

    def policy(self) -> LtiRealization:
        """The controller seen as a map ``w -> u``."""
        return LtiRealization(self.A, self.B, self.C_u, self.D_u, "disturbance",
                              f"policy of {self.controller.note}")


def _controller_blocks(model: PlantModel, ctrl: LtiRealization):
    """Split controller input matrices into ``x`` and ``w`` columns."""
    n, p = model.n, model.p
    nc = ctrl.n_states
    kind = ctrl.input_kind
    if kind == "state":
        if ctrl.n_inputs != n:
            raise ValueError(f"state controller needs {n} inputs, has {ctrl.n_inputs}")
        return ctrl.B, np.zeros((nc, p)), ctrl.D, np.zeros((model.m, p))
    if kind == "full_information":
        if ctrl.n_inputs != n + p:
            raise ValueError(f"full-information controller needs {n + p} inputs, has {ctrl.n_inputs}")
        return ctrl.B[:, :n], ctrl.B[:, n:], ctrl.D[:, :n], ctrl.D[:, n:]
    if kind == "disturbance":
        if ctrl.n_inputs != p:
            raise ValueError(f"disturbance controller needs {p} inputs, has {ctrl.n_inputs}")
        return np.zeros((nc, n)), ctrl.B, np.zeros((model.m, n)), ctrl.D
    raise ValueError(f"cannot close the loop with input kind {kind!r}")


def close_loop(model: PlantModel, controller: LtiRealization) -> ClosedLoop:
    """Interconnect ``model`` and ``controller``.

    Raises :class:`UnstableLoop` if the interconnection is not stable.
    """
    if controller.n_outputs != model.m:
        raise ValueError(f"controller has {controller.n_outputs} outputs, plant has {model.m} inputs")
    Bx, Bw_c, Dx, Dw = _controller_blocks(model, controller)
    n, nc = model.n, controller.n_states
    A = np.block([
        [model.A + model.B_u @ Dx, model.B_u @ controller.C],
        [Bx, controller.A],
    ])
    B = np.vstack([model.B_w + model.B_u @ Dw, Bw_c])
    C_u = np.hstack([Dx, controller.C])
    C = np.vstack([np.hstack([model.Q_sqrt, np.zeros((n, nc))]), model.R_sqrt @ C_u])
    D = np.vstack([np.zeros((n, model.p)), model.R_sqrt @ Dw])
    rho = spectral_radius(A)
    if not rho < 1.0:
        raise UnstableLoop(f"closed loop with '{controller.note}' is unstable (rho {rho:.6f})")
    return ClosedLoop(model, controller, A, B, C, D, C_u, Dw)


def eval_frequency(cl: ClosedLoop, omega: float) -> np.ndarray:
    """``T_K(e^{j omega})``."""
    return cl.realization().evaluate(np.exp(1j * omega))


# ---------------------------------------------------------------------------
# non-causal benchmark
# ---------------------------------------------------------------------------

def _fg_response(model: PlantModel, z: np.ndarray):
    """``F(z)``, ``G(z)`` at an array of points, plus a singularity mask."""
    eig = np.linalg.eigvals(model.A)
    dist = np.min(np.abs(z[:, None] - eig[None, :]), axis=1)
    bad = dist < RESOLVENT_GUARD
    zs = np.where(bad, 0.0, z)
    n = model.n
    M = zs[:, None, None] * np.eye(n) - model.A[None]
    # zs = 0 only where masked; keep the solve well posed there
    M[bad] = np.eye(n)
    rhs = np.hstack([model.B_u, model.B_w])
    X = np.linalg.solve(M, np.broadcast_to(rhs, (z.size,) + rhs.shape))
    F = model.Q_sqrt @ X[:, :, : model.m] @ model.R_inv_sqrt
    G = model.Q_sqrt @ X[:, :, model.m:]
    return F, G, bad


def noncausal_gram_grid(model: PlantModel, omegas) -> np.ndarray:
    """``G* (I + F F*)^{-1} G`` on a grid; ``nan`` where the resolvent is singular.

    ``A`` may be unstable: ``F`` and ``G`` are then evaluated pointwise as
    formal resolvents on the unit circle.
    """
    z = np.exp(1j * np.asarray(omegas, dtype=float))
    F, G, bad = _fg_response(model, z)
    n = model.n
    FF = np.eye(n) + F @ np.conj(np.swapaxes(F, 1, 2))
    T0 = np.conj(np.swapaxes(G, 1, 2)) @ np.linalg.solve(FF, G)
    T0 = 0.5 * (T0 + np.conj(np.swapaxes(T0, 1, 2)))
    T0[bad] = np.nan
    return T0


def noncausal_gram(model: PlantModel, omega: float) -> np.ndarray:
    """``T_{K0}* T_{K0}`` at one frequency.

    Raises :class:`ResolventSingular` if ``e^{j omega}`` is within the guard
    distance of an eigenvalue of ``A``.
    """
    T0 = noncausal_gram_grid(model, [omega])[0]
    if np.isnan(T0).any():
        raise ResolventSingular(f"e^(j{omega:.6g}) is an eigenvalue of A to within {RESOLVENT_GUARD}")
    return T0


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SweepResult:
    """Per-frequency integrands and their aggregates for one controller.

    ``regret_floor`` is the smallest eigenvalue of ``T*T - T0*T0``; it is
    nonnegative for every linear controller.
    """

    name: str
    omegas: np.ndarray
    frobenius_integrand: np.ndarray
    opnorm_integrand: np.ndarray
    regret_integrand: np.ndarray
    regret_floor: np.ndarray
    frobenius_sq: float
    opnorm_sq: float
    regret_peak: float
    opnorm_omega: float
    regret_omega: float

    def table_row(self) -> dict:
        return {"frobenius_sq": self.frobenius_sq, "opnorm_sq": self.opnorm_sq, "regret": self.regret_peak}


def uniform_grid(grid_size: int = GRID_SIZE) -> np.ndarray:
    return 2.0 * np.pi * np.arange(grid_size) / grid_size


def _integrands(model, cl, omegas):
    omegas = np.asarray(omegas, dtype=float)
    T0 = noncausal_gram_grid(model, omegas)
    if cl is None:
        lam = np.linalg.eigvalsh(np.nan_to_num(T0))
        lam[np.isnan(T0).any(axis=(1, 2))] = np.nan
        zero = np.zeros(omegas.size)
        return np.trace(T0, axis1=1, axis2=2).real, lam[:, -1], zero, zero
    T = cl.frequency_response(omegas)
    TT = np.conj(np.swapaxes(T, 1, 2)) @ T
    frob = np.trace(TT, axis1=1, axis2=2).real
    op = np.linalg.eigvalsh(0.5 * (TT + np.conj(np.swapaxes(TT, 1, 2))))[:, -1]
    diff = TT - T0
    diff = 0.5 * (diff + np.conj(np.swapaxes(diff, 1, 2)))
    bad = np.isnan(diff).any(axis=(1, 2))
    lam = np.linalg.eigvalsh(np.where(bad[:, None, None], 0.0, diff))
    reg, floor = lam[:, -1], lam[:, 0]
    reg[bad] = np.nan
    floor[bad] = np.nan
    return frob, op, reg, floor


def golden_max(f, a: float, b: float, iters: int = 60):
    """Golden-section search for a maximum of ``f`` on ``[a, b]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _refined_peak(values, omegas, f):
    if np.all(np.isnan(values)):
        return float("nan"), float("nan")
    k = int(np.nanargmax(values))
    peak, where = float(values[k]), float(omegas[k])
    h = 2.0 * np.pi / omegas.size
    w, fw = golden_max(lambda x: float(np.nan_to_num(f(x), nan=-np.inf)), where - h, where + h)
    if fw > peak:
        peak, where = fw, float(np.mod(w, 2.0 * np.pi))
    return peak, where


def sweep(model: PlantModel, controllers: Mapping[str, LtiRealization | str],
          grid_size: int = GRID_SIZE, refine: bool = True) -> dict[str, SweepResult]:
    """Evaluate each controller on a uniform grid over ``[0, 2 pi)``.

    ``controllers`` maps a label to a realization, or to the string
    ``"noncausal"`` for the clairvoyant benchmark (evaluated from its
    spectrum directly). Frobenius norms use the trapezoid rule, which on a
    uniform periodic grid is the sample mean. Peaks are refined by a
    golden-section search around the best grid point.
    """
    omegas = uniform_grid(grid_size)
    out = {}
    for name, ctrl in controllers.items():
        cl = None if isinstance(ctrl, str) and ctrl == NONCAUSAL else close_loop(model, ctrl)
        frob, op, reg, floor = _integrands(model, cl, omegas)
        frob_sq = float(np.nanmean(frob))
        if refine:
            op_sq, op_w = _refined_peak(op, omegas, lambda w: _integrands(model, cl, [w])[1][0])
            if cl is None:
                reg_pk, reg_w = 0.0, 0.0
            else:
                reg_pk, reg_w = _refined_peak(reg, omegas, lambda w: _integrands(model, cl, [w])[2][0])
        else:
            k1, k2 = int(np.nanargmax(op)), int(np.nanargmax(reg))
            op_sq, op_w, reg_pk, reg_w = float(op[k1]), omegas[k1], float(reg[k2]), omegas[k2]
        out[name] = SweepResult(name, omegas, frob, op, reg, floor, frob_sq, op_sq, reg_pk, op_w, reg_w)
    return out


# ---------------------------------------------------------------------------
# truncated operator oracle
# ---------------------------------------------------------------------------

def default_horizon(riccati: RiccatiSolution, width: int) -> int:
    """Horizon tying truncation error to closed-loop decay, capped by the memory guard."""
    rho = max(spectral_radius(riccati.A_K), 0.1)
    N = math.ceil(math.log(1e-8) / math.log(rho))
    return max(1, min(N, ORACLE_MAX_DIM // max(width, 1)))


def _block_toeplitz(blocks: np.ndarray, N: int) -> np.ndarray:
    """Strictly lower block-Toeplitz matrix with ``blocks[k]`` on sub-diagonal ``k+1``."""
    r, c = blocks.shape[1:]
    out = np.zeros((N * r, N * c))
    for i in range(1, N):
        for j in range(i):
            out[i * r:(i + 1) * r, j * c:(j + 1) * c] = blocks[i - j - 1]
    return out


@dataclass(eq=False)
class ToeplitzOracle:
    """Finite-horizon truncation of the operators ``F``, ``G`` and the Hankel block.

    The Hankel matrix has block ``(i, j)`` equal to ``H F^{i+j} G``, the
    Markov parameters of the anticausal target. Its largest singular value
    squared lower-bounds the regret of any strictly causal policy and
    increases to the optimal regret as ``N`` grows.
    """

    N: int
    model: PlantModel
    nehari: NehariProblem
    hankel: np.ndarray

    def markov_F(self) -> np.ndarray:
        return self._markov(self.model.B_u @ self.model.R_inv_sqrt)

    def markov_G(self) -> np.ndarray:
        return self._markov(self.model.B_w)

    def _markov(self, B) -> np.ndarray:
        out = np.empty((self.N, self.model.n, B.shape[1]))
        X = B.copy()
        for k in range(self.N):
            out[k] = self.model.Q_sqrt @ X
            X = self.model.A @ X
        return out

    @cached_property
    def F_N(self) -> np.ndarray:
        return _block_toeplitz(self.markov_F(), self.N)

    @cached_property
    def G_N(self) -> np.ndarray:
        return _block_toeplitz(self.markov_G(), self.N)

    @cached_property
    def K0_N(self) -> np.ndarray:
        F, G = self.F_N, self.G_N
        return -np.linalg.solve(np.eye(F.shape[1]) + F.T @ F, F.T @ G)

    @cached_property
    def singular_values(self) -> np.ndarray:
        if self.hankel.size == 0 or not np.any(self.hankel):
            return np.zeros(1)
        if max(self.hankel.shape) <= 1500:
            return scipy.linalg.svdvals(self.hankel)
        k = min(6, min(self.hankel.shape) - 1)
        s = scipy.sparse.linalg.svds(self.hankel, k=k, return_singular_vectors=False, tol=1e-14)
        return np.sort(s)[::-1]

    def cost(self, V: np.ndarray, w: np.ndarray) -> float:
        """Finite-horizon cost ``||s||^2 + ||v||^2`` of ``v = V w``."""
        v = V @ w
        s = self.F_N @ v + self.G_N @ w
        return float(s @ s + v @ v)


def toeplitz_truncate(model: PlantModel, riccati: RiccatiSolution, N: int | None = None) -> ToeplitzOracle:
    """Build the horizon-``N`` oracle (default horizon from :func:`default_horizon`).

    Raises :class:`OracleTooLarge` when ``N * max(m, p)`` exceeds 4096.
    """
    width = max(model.m, model.p)
    if N is None:
        N = default_horizon(riccati, width)
    if N < 1:
        raise ValueError("horizon must be at least 1")
    if N * width > ORACLE_MAX_DIM:
        raise OracleTooLarge(f"N * max(m, p) = {N * width} exceeds {ORACLE_MAX_DIM}")
    prob = nehari_data(model, riccati)
    h = prob.markov(2 * N - 1)
    r, c = h.shape[1:]
    hankel = np.empty((N * r, N * c))
    for i in range(N):
        for j in range(N):
            hankel[i * r:(i + 1) * r, j * c:(j + 1) * c] = h[i + j]
    return ToeplitzOracle(N, model, prob, hankel)


def oracle_regret(oracle: ToeplitzOracle) -> float:
    """Squared largest singular value of the truncated Hankel matrix."""
    return float(oracle.singular_values[0] ** 2)


def policy_toeplitz(cl: ClosedLoop, N: int) -> np.ndarray:
    """Lower block-Toeplitz matrix of the policy ``w -> v`` over ``N`` steps."""
    m, p = cl.model.m, cl.model.p
    Rh = cl.model.R_sqrt
    blocks = np.empty((N, m, p))
    blocks[0] = Rh @ cl.D_u
    X = cl.B.copy()
    for k in range(1, N):
        blocks[k] = Rh @ cl.C_u @ X
        X = cl.A @ X
    out = np.zeros((N * m, N * p))
    for i in range(N):
        for j in range(i + 1):
            out[i * m:(i + 1) * m, j * p:(j + 1) * p] = blocks[i - j]
    return out


# ---------------------------------------------------------------------------
# invariant suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    """Outcome of one invariant: ``passed`` iff ``slack >= 0``."""

    name: str
    measured: float
    tolerance: float
    slack: float

    @property
    def passed(self) -> bool:
        return bool(self.slack >= 0)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


def verify_model(model: PlantModel, grid_size: int = GRID_SIZE, horizon: int | None = None,
                 n_omega: int = 128, seed: int = 0, hinf_tol: float = 1e-8) -> list[Check]:
    """Run the closed-form, oracle, realization and dominance checks on one plant."""
    from .synthesis import h2_controller, hinf_synthesize, nehari_controller, regret_synthesize

    syn = regret_synthesize(model)
    g2 = syn.gamma_sq
    ctrls = {
        "h2": h2_controller(syn.riccati),
        "hinf": hinf_synthesize(model, bisect_tol=hinf_tol).controller,
        "regret": syn.controller,
    }
    res = sweep(model, ctrls, grid_size)
    checks = []

    def rel_check(name, measured, target, tol):
        err = _rel(measured, target) if target else abs(measured)
        checks.append(Check(name, err, tol, tol - err))

    rel_check("spectrum_peak_vs_closed_form", res["regret"].regret_peak, g2, 1e-4)
    rel_check("hankel_oracle_vs_closed_form", oracle_regret(toeplitz_truncate(model, syn.riccati, horizon)),
              g2, 1e-6)

    policy, _ = nehari_controller(model, syn.riccati)
    omegas = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, n_omega)
    a = policy.frequency_response(omegas)
    b = close_loop(model, syn.controller).policy().frequency_response(omegas)
    scale = max(float(np.abs(b).max()), np.finfo(float).tiny)
    checks.append(Check("nehari_assembly_vs_closed_form", float(np.abs(a - b).max() / scale), 1e-6,
                        1e-6 - float(np.abs(a - b).max() / scale)))
    c = close_loop(model, syn.controller_state_only).policy().frequency_response(omegas)
    d = float(np.abs(c - b).max() / scale)
    checks.append(Check("state_only_vs_disturbance_driven", d, 1e-8, 1e-8 - d))

    slack = 1e-6
    for metric, best in (("frobenius_sq", "h2"), ("opnorm_sq", "hinf"), ("regret_peak", "regret")):
        gap = getattr(res[best], metric) - min(getattr(r, metric) for r in res.values())
        checks.append(Check(f"{best}_minimizes_{metric}", gap, slack, slack - gap))

    floor = min(float(np.nanmin(r.regret_floor)) for r in res.values())
    checks.append(Check("noncausal_dominance_floor", floor, -1e-8, floor + 1e-8))
    return checks
