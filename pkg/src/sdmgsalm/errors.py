"""Exception types shared across the solver stack."""


class SolverError(Exception):
    """Base class for solver failures."""


class NumericalFailure(SolverError):
    """Simplex could not reach the required feasibility/optimality residuals."""


class NodeLimitExceeded(SolverError):
    """Branch-and-bound ran out of its node budget."""


class MaxInnerIterations(SolverError):
    """Simplex-QP solver could not reach the requested gap tolerance."""


class NondescentDirection(SolverError):
    """Armijo step requested along a direction with nonnegative slope."""


class DegenerateDenominator(SolverError):
    """Serious-step ratio requested with a nonpositive denominator."""


class MissingPacket(SolverError):
    """A reduce expected one packet per block and at least one was absent."""


class WorkerFailure(SolverError):
    """A block worker died; carries the offending block index."""

    def __init__(self, block_index, message=""):
        self.block_index = block_index
        super().__init__(f"worker failure on block {block_index}: {message}")


class InfeasibleBlock(SolverError):
    """A block's feasible set is empty (instance-level defect)."""


class EnumerationTooLarge(SolverError):
    """Block bound box exceeds the exhaustive-enumeration cap."""


class NotPureInteger(SolverError):
    """Enumeration requested on a block with free continuous variables."""


class NoCertificate(SolverError):
    """Oracle could not certify its answer to the required accuracy."""


class ParseError(SolverError):
    """Instance file is malformed; message carries field context."""


class InstanceValidationError(SolverError):
    """Instance violates model invariants; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NondeterministicTrajectory(SolverError):
    """Bound trajectories differed across thread counts in the speedup harness."""
