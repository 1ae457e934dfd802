"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """A scenario configuration failed to parse or violated an invariant."""


class SingularityError(ValueError):
    """The closed-loop response is singular at some frequency.

    Raised when |1 - sqrt(t) G(f)| falls below the singularity threshold,
    which would otherwise propagate infinities into exported spectra.
    """

    def __init__(self, frequency_hz: float):
        self.frequency_hz = float(frequency_hz)
        super().__init__(
            f"closed-loop response singular at f = {self.frequency_hz:.6g} Hz "
            "(|1 - sqrt(t)*G| below threshold)"
        )


class LoopInstabilityWarning(UserWarning):
    """|1 - sqrt(t) G(f)| < 1 somewhere: the loop amplifies instead of suppressing."""
