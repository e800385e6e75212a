"""Exception types shared across the package."""


class CapacityExceeded(Exception):
    """The request needs a larger enumeration or lattice than supported."""


class NotACircuit(Exception):
    """Removing the candidate set does not leave exactly two components."""


class IncompatibleConditioning(Exception):
    """The conditioning event has probability zero under the revealed sites."""


class RetryLimitExceeded(Exception):
    """Rejection sampling exhausted its attempt budget."""


class CircuitInvariantViolation(Exception):
    """The extracted boundary failed a property the construction guarantees."""


class DegenerateFit(Exception):
    """Power-law fit input contains an unusable probability estimate."""


class Exhausted(Exception):
    """The exploration has already revealed every site."""
