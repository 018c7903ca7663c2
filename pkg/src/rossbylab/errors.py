"""Failure taxonomy: configuration, numerics, and physics are distinct.

The CLI maps these onto its exit-code contract (2: config, 3: numerical
failure, 4: blow-up event).
"""


class ConfigError(ValueError):
    """Rejected configuration input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NumericalError(RuntimeError):
    """The math failed: non-finite state, or an unusable solver result."""


class PressureConvergenceError(NumericalError):
    """Pressure fixed point did not reach tolerance within the iteration cap."""

    def __init__(self, iterations: int, last_residual: float, tol: float):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(
            f"pressure iteration stalled after {iterations} steps: "
            f"relative residual {last_residual:.3e} > tol {tol:.3e} "
            "(contraction needs eps*||a||_inf < 1)"
        )


class BlowUpError(RuntimeError):
    """Gradient proxy crossed the blow-up threshold; carries the event time."""

    def __init__(self, time: float, grad_norm: float, threshold: float):
        self.time = time
        self.grad_norm = grad_norm
        super().__init__(
            f"blow-up proxy at t={time:.6g}: ||grad u||_inf = {grad_norm:.3e} "
            f"> {threshold:.3e}"
        )
