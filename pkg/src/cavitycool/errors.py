"""Exception and warning types raised by the simulator."""


class SimulationError(RuntimeError):
    """Base class for failures that invalidate a simulation result."""


class TruncationError(SimulationError):
    """The Fock truncation is too small to represent the requested state."""


class PositivityError(SimulationError):
    """A density matrix acquired a significantly negative eigenvalue."""


class DegenerateSelection(SimulationError):
    """Post-selection probability fell below the degeneracy threshold."""


class TruncationWarning(UserWarning):
    """Population or operator structure is approaching the Fock cutoff."""


class RegimeWarning(UserWarning):
    """An analytic approximation is evaluated outside its validity range."""
