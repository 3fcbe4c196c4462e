"""Runtime failure type shared by the steppers and the engine."""

from __future__ import annotations


class SimulationError(RuntimeError):
    """A stepper produced a non-finite or inconsistent value.

    Carries the step index at which the run aborted so the CLI can report
    it and exit with the runtime-error status.
    """

    def __init__(self, message: str, step: int | None = None,
                 state: dict | None = None):
        self.step = step
        self.state = state or {}
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
