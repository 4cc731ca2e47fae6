"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` so the command line front-end can map a
failure to its documented process status without a lookup table.
"""


class RegretControlError(Exception):
    exit_code = 1


# -- numerical / synthesis failures (exit 3) --------------------------------

class SynthesisError(RegretControlError):
    exit_code = 3


class NonStabilizable(SynthesisError):
    """The Riccati iteration diverged or produced an unstable closed loop."""


class IllConditioned(SynthesisError):
    """A matrix that must be inverted is numerically singular."""


class UnstableF(SynthesisError):
    """A Lyapunov/Stein equation was posed with a non-contractive matrix."""


class NotPsd(SynthesisError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class SingularPivot(SynthesisError):
    """The central Nehari gain requires inverting a singular pivot."""


class UnstableResult(SynthesisError):
    """A synthesized realization that must be stable is not."""


class BisectionFailure(SynthesisError):
    """No feasible attenuation level was found in the search bracket."""


class UnstableLoop(SynthesisError):
    """The controller does not stabilize the plant."""


class ResolventSingular(SynthesisError):
    """A frequency point lies (numerically) on an eigenvalue of A."""


class NonFiniteState(SynthesisError):
    """A simulated state left the divergence guard."""


class OracleTooLarge(SynthesisError):
    """The truncated operator would exceed the memory guard."""


# -- input problems (exit 2) ------------------------------------------------

class InputError(RegretControlError):
    exit_code = 2


class ParseError(InputError):
    pass


class InvalidModel(InputError, ValueError):
    pass


class BadSpec(InputError, ValueError):
    pass


# -- verification (exit 4) --------------------------------------------------

class VerificationFailure(RegretControlError):
    exit_code = 4
