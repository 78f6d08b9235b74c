class PhysicsError(Exception):
    """Raised when a physical operation cannot be carried out as requested."""


class TruncationError(PhysicsError):
    """Population sits too close to the Fock-space cutoff for the requested map."""


class PropagationError(PhysicsError):
    """The time integrator could not reach the requested tolerance."""


class NoSolutionError(PhysicsError):
    """A duration search found no admissible solution within its bounds."""


class ProtocolFailure(PhysicsError):
    """A gate protocol ran but violated one of its post-conditions."""
