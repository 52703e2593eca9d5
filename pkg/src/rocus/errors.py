class ControllerFailure(RuntimeError):
    """The controller aborted before producing a trajectory."""


class PlanFailure(ControllerFailure):
    """RRT exhausted its growth-tape budget without connecting to the goal."""


class DegenerateTrajectory(ValueError):
    """Trajectory too short (or zero-extent) for the requested behavior."""


class DegenerateMarginal(ValueError):
    """Prior behavior marginal has zero variance; maximal mode is undefined."""
