"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but degenerate (e.g. a zero-norm envelope)."""


class UnsupportedInputError(ValueError):
    """Input falls outside the class the operation is defined for."""


class DesignInfeasibleError(ValueError):
    """No physical control waveform can realize the requested target."""


class StiffnessError(RuntimeError):
    """The integrator step cannot resolve the fastest control timescale.

    Attributes
    ----------
    control : str
        Name of the offending rate ("g", "delta", "Delta" or "kappa").
    max_rate : float
        Largest magnitude of that rate over the schedule.
    dt : float
        Step that was requested.
    required_dt : float
        Largest step that would satisfy the resolution guard.
    """

    def __init__(self, control: str, max_rate: float, dt: float, required_dt: float):
        self.control = control
        self.max_rate = max_rate
        self.dt = dt
        self.required_dt = required_dt
        super().__init__(
            f"control '{control}' reaches |rate| = {max_rate:.6g} (units of kappa); "
            f"dt = {dt:.6g} violates the resolution guard dt*rate <= 0.05, "
            f"need dt <= {required_dt:.6g}"
        )
