"""State-space realizations of controllers and transfer factors."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import spectral_radius

INPUT_KINDS = ("disturbance", "state", "full_information", "plant_input")


@dataclass(frozen=True)
class LtiRealization:
    """Discrete-time realization ``(A, B, C, D)``.

    ``input_kind`` says what a controller consumes:

    * ``"state"``: the plant state ``x_t``;
    * ``"disturbance"``: the disturbance ``w_t`` only (a policy ``w -> u``);
    * ``"full_information"``: the stacked vector ``[x_t; w_t]``;
    * ``"plant_input"``: a generic transfer object (spectral factors etc.).

    When ``anticausal`` is set the realization stands for
    ``D + C (z^{-1} I - A)^{-1} B`` instead of ``D + C (z I - A)^{-1} B``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_kind: str = "plant_input"
    note: str = ""
    anticausal: bool = False

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D))
        p_out, m_in = D.shape
        A = np.asarray(self.A)
        nx = 0 if A.size == 0 else np.atleast_2d(A).shape[0]
        A = np.atleast_2d(A).reshape(nx, nx)
        B = np.asarray(self.B).reshape(nx, m_in)
        C = np.asarray(self.C).reshape(p_out, nx)
        if self.input_kind not in INPUT_KINDS:
            raise ValueError(f"input_kind must be one of {INPUT_KINDS}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def is_stable(self) -> bool:
        return self.n_states == 0 or spectral_radius(self.A) < 1.0

    def evaluate(self, z):
        """Transfer matrix at ``z`` (scalar or 1-D array of points).

        For an array of ``k`` points the result has shape
        ``(k, n_outputs, n_inputs)``.
        """
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        zs = np.atleast_1d(z)
        if self.anticausal:
            zs = 1.0 / zs
        out = np.broadcast_to(self.D.astype(complex), (zs.size,) + self.D.shape).copy()
        if self.n_states:
            n = self.n_states
            M = zs[:, None, None] * np.eye(n) - self.A[None, :, :]
            X = np.linalg.solve(M, np.broadcast_to(self.B, (zs.size,) + self.B.shape))
            out += self.C @ X
        return out[0] if scalar else out

    def frequency_response(self, omegas):
        return self.evaluate(np.exp(1j * np.asarray(omegas, dtype=float)))

    # -- composition --------------------------------------------------------

    def series(self, other: "LtiRealization", note: str = "") -> "LtiRealization":
        """Realization of ``other(z) @ self(z)`` (``self`` feeds ``other``)."""
        if self.anticausal or other.anticausal:
            raise ValueError("composition is defined for causal realizations only")
        n1, n2 = self.n_states, other.n_states
        A = np.block([
            [self.A, np.zeros((n1, n2))],
            [other.B @ self.C, other.A],
        ])
        B = np.vstack([self.B, other.B @ self.D])
        C = np.hstack([other.D @ self.C, other.C])
        D = other.D @ self.D
        return LtiRealization(A, B, C, D, self.input_kind, note)

    def parallel(self, other: "LtiRealization", note: str = "") -> "LtiRealization":
        """Realization of ``self(z) + other(z)``."""
        if self.anticausal or other.anticausal:
            raise ValueError("composition is defined for causal realizations only")
        n1, n2 = self.n_states, other.n_states
        A = np.block([
            [self.A, np.zeros((n1, n2))],
            [np.zeros((n2, n1)), other.A],
        ])
        B = np.vstack([self.B, other.B])
        C = np.hstack([self.C, other.C])
        return LtiRealization(A, B, C, self.D + other.D, self.input_kind, note)

    def scaled(self, left=None, right=None, note: str | None = None) -> "LtiRealization":
        """``left @ self(z) @ right`` for constant matrices."""
        B, C, D = self.B, self.C, self.D
        if left is not None:
            left = np.atleast_2d(left)
            C, D = left @ C, left @ D
        if right is not None:
            right = np.atleast_2d(right)
            B, D = B @ right, D @ right
        return replace(self, B=B, C=C, D=D, note=self.note if note is None else note)

    def delayed(self, note: str = "") -> "LtiRealization":
        """Realization of ``z^{-1} self(z)``."""
        m = self.n_inputs
        delay = LtiRealization(np.zeros((m, m)), np.eye(m), np.eye(m), np.zeros((m, m)))
        out = delay.series(self, note or self.note)
        return replace(out, input_kind=self.input_kind)


def static_gain(D, input_kind: str = "state", note: str = "") -> LtiRealization:
    """Memoryless realization ``u = D y``."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    p, m = D.shape
    return LtiRealization(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D, input_kind, note)
