"""Time-domain closed-loop simulation under white, white-plus-DC and AR(1) disturbances.

Random streams come from a counter-based generator (Philox) keyed by
``(seed, trial)``, so every trial can be regenerated on its own and the
result of a batch does not depend on the order trials are run in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.signal

from .analysis import close_loop
from .errors import BadSpec, NonFiniteState
from .linalg import solve_dlyap
from .lti import LtiRealization
from .plant import PlantModel
from .synthesis import h2_controller, lqr_synthesize

DIVERGENCE_GUARD = 1e12
DISTURBANCE_KINDS = ("white", "white_plus_dc", "ar1")


@dataclass(frozen=True, eq=False)
class DisturbanceSpec:
    """Description of a disturbance family.

    Parameters
    ----------
    kind : {"white", "white_plus_dc", "ar1"}
    p : int
        Disturbance dimension.
    seed : int
        Base seed; trial ``k`` uses the stream keyed by ``(seed, k)``.
    sigma : float
        Standard deviation of the Gaussian innovations. Zero gives a
        deterministic (for ``white``, identically zero) stream.
    scale : float
        Magnitude of the constant offset for ``white_plus_dc``.
    direction : None, "auto" or array
        Offset direction. ``None`` and ``"auto"`` both mean the top right
        singular vector of the H2 closed loop at zero frequency; an explicit
        vector must have unit norm.
    beta : float
        AR(1) pole, ``w_t = n_t + beta w_{t-1}``.
    """

    kind: str
    p: int
    seed: int = 0
    sigma: float = 1.0
    scale: float = 0.5
    direction: object = None
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise BadSpec(f"kind must be one of {DISTURBANCE_KINDS}, got {self.kind!r}")
        if int(self.p) < 1:
            raise BadSpec(f"p must be positive, got {self.p}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise BadSpec(f"sigma must be non-negative, got {self.sigma}")
        if not abs(self.beta) < 1:
            raise BadSpec(f"|beta| must be below 1, got {self.beta}")
        if not np.isfinite(self.scale):
            raise BadSpec("scale must be finite")
        d = self.direction
        if d is not None and not (isinstance(d, str) and d == "auto"):
            if isinstance(d, str):
                raise BadSpec(f"direction must be 'auto' or a vector, got {d!r}")
            d = np.asarray(d, dtype=float).ravel()
            if d.size != self.p:
                raise BadSpec(f"direction has {d.size} entries, expected {self.p}")
            if abs(np.linalg.norm(d) - 1.0) > 1e-9:
                raise BadSpec(f"direction must have unit norm, got {np.linalg.norm(d):.6g}")
            object.__setattr__(self, "direction", d)


def h2_dc_direction(model: PlantModel) -> np.ndarray:
    """Top right singular vector of the H2 closed loop at ``z = 1``.

    The sign is fixed so the largest-magnitude entry is positive.
    """
    cl = close_loop(model, h2_controller(lqr_synthesize(model)))
    T0 = cl.realization().evaluate(1.0)
    _, _, Vh = np.linalg.svd(T0)
    v = Vh[0].conj().real
    k = np.argmax(np.abs(v))
    return v if v[k] >= 0 else -v


def _resolve_direction(spec: DisturbanceSpec, model: PlantModel | None) -> np.ndarray:
    if isinstance(spec.direction, np.ndarray):
        return spec.direction
    if model is None:
        raise BadSpec("direction 'auto' needs the plant model")
    if model.p != spec.p:
        raise BadSpec(f"spec has p={spec.p} but the model has {model.p} disturbance channels")
    return h2_dc_direction(model)


def _rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


def gen_disturbance(spec: DisturbanceSpec, T: int, trial: int = 0,
                    model: PlantModel | None = None) -> np.ndarray:
    """Disturbance sequence ``w_0 .. w_{T-1}`` as a ``(T, p)`` array."""
    if T < 0:
        raise BadSpec(f"horizon must be non-negative, got {T}")
    n = spec.sigma * _rng(spec.seed, trial).standard_normal((T, spec.p))
    if spec.kind == "white":
        return n
    if spec.kind == "white_plus_dc":
        return n + spec.scale * _resolve_direction(spec, model)
    return scipy.signal.lfilter([1.0], [1.0, -spec.beta], n, axis=0)


@dataclass(frozen=True, eq=False)
class SimTrace:
    """One simulated run. ``x`` holds ``x_0 .. x_T`` (one more row than ``u``)."""

    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    cost: np.ndarray

    @property
    def T(self) -> int:
        return self.u.shape[-2]

    @property
    def avg_cost(self) -> np.ndarray:
        return np.cumsum(self.cost, axis=-1) / np.arange(1, self.T + 1)


def _split(model: PlantModel, ctrl: LtiRealization):
    """Controller matrices acting on ``x_t`` and ``w_{t}``; ``D_w`` must vanish."""
    n, p, nc = model.n, model.p, ctrl.n_states
    if ctrl.n_outputs != model.m:
        raise ValueError(f"controller has {ctrl.n_outputs} outputs, plant has {model.m} inputs")
    kind = ctrl.input_kind
    if kind == "state":
        Bx, Bw, Dx, Dw = ctrl.B, np.zeros((nc, p)), ctrl.D, np.zeros((model.m, p))
    elif kind == "full_information":
        Bx, Bw, Dx, Dw = ctrl.B[:, :n], ctrl.B[:, n:], ctrl.D[:, :n], ctrl.D[:, n:]
    elif kind == "disturbance":
        Bx, Bw, Dx, Dw = np.zeros((nc, n)), ctrl.B, np.zeros((model.m, n)), ctrl.D
    else:
        raise ValueError(f"cannot simulate a controller with input kind {kind!r}")
    if np.any(Dw):
        raise ValueError("controller is not strictly causal: u_t depends on w_t")
    return Bx, Bw, Dx


def run_closed_loop(model: PlantModel, controller: LtiRealization, w: np.ndarray,
                    x0: np.ndarray | None = None) -> SimTrace:
    """Simulate ``x_{t+1} = A x_t + B_u u_t + B_w w_t`` under ``controller``.

    ``w`` is ``(T, p)`` or a batch ``(trials, T, p)``; the trace arrays carry
    the same leading batch axis. ``u_t`` uses ``x_0 .. x_t`` and
    ``w_0 .. w_{t-1}`` only.

    Raises
    ------
    NonFiniteState
        If a state entry exceeds the divergence guard.
    """
    w = np.asarray(w, dtype=float)
    single = w.ndim == 2
    W = w[None] if single else w
    trials, T, p = W.shape
    if p != model.p:
        raise ValueError(f"disturbance has {p} channels, model has {model.p}")
    Bx, Bw, Dx = _split(model, controller)
    A, Bu, Bwp = model.A, model.B_u, model.B_w
    Ac, Cc = controller.A, controller.C
    X = np.empty((trials, T + 1, model.n))
    U = np.empty((trials, T, model.m))
    X[:, 0] = 0.0 if x0 is None else np.asarray(x0, dtype=float)
    xi = np.zeros((trials, controller.n_states))
    for t in range(T):
        x = X[:, t]
        u = x @ Dx.T + xi @ Cc.T
        U[:, t] = u
        wt = W[:, t]
        x_next = x @ A.T + u @ Bu.T + wt @ Bwp.T
        if not np.all(np.abs(x_next) <= DIVERGENCE_GUARD):
            raise NonFiniteState(f"state left the divergence guard at step {t + 1}")
        X[:, t + 1] = x_next
        xi = xi @ Ac.T + x @ Bx.T + wt @ Bw.T
    cost = (np.einsum("kti,ij,ktj->kt", X[:, :T], model.Q, X[:, :T])
            + np.einsum("kti,ij,ktj->kt", U, model.R, U))
    if single:
        return SimTrace(X[0], U[0], W[0], cost[0])
    return SimTrace(X, U, W, cost)


@dataclass(frozen=True, eq=False)
class BatchResult:
    """Per-controller running-average cost curves averaged over trials.

    ``final`` holds the per-trial average cost over the whole horizon, which
    is what standard errors are computed from.
    """

    curves: dict
    final: dict

    def mean(self, name: str) -> float:
        return float(self.curves[name][-1])

    def stderr(self, name: str) -> float:
        f = self.final[name]
        return float(np.std(f, ddof=1) / np.sqrt(f.size)) if f.size > 1 else float("nan")


def batch_average(model: PlantModel, controllers: Mapping[str, LtiRealization],
                  spec: DisturbanceSpec, T: int, trials: int) -> BatchResult:
    """Average cumulative-cost curves over ``trials`` independent runs.

    Every controller sees the same disturbance realizations.
    """
    if trials < 1:
        raise BadSpec(f"trials must be at least 1, got {trials}")
    W = np.stack([gen_disturbance(spec, T, k, model) for k in range(trials)])
    curves, final = {}, {}
    for name, ctrl in controllers.items():
        tr = run_closed_loop(model, ctrl, W)
        avg = tr.avg_cost
        curves[name] = avg.mean(axis=0)
        final[name] = avg[:, -1]
    return BatchResult(curves, final)


def stationary_cost(model: PlantModel, controller: LtiRealization, sigma: float = 1.0,
                    beta: float = 0.0) -> float:
    """Expected per-step cost in steady state under AR(1) noise.

    ``w_t = n_t + beta w_{t-1}`` with ``n_t ~ N(0, sigma^2 I)``; ``beta = 0``
    is white noise. The AR filter is appended to the closed loop and the
    cost read off an observability Gramian.
    """
    cl = close_loop(model, controller)
    N, p = cl.A.shape[0], model.p
    A = np.block([[cl.A, beta * cl.B], [np.zeros((p, N)), beta * np.eye(p)]])
    B = np.vstack([cl.B, np.eye(p)])
    C = np.hstack([cl.C, beta * cl.D])
    X = solve_dlyap(A.T, C.T @ C)
    return float(sigma ** 2 * (np.trace(B.T @ X @ B) + np.trace(cl.D.T @ cl.D)))
