"""Exception types shared across the engine."""


class DiracQError(Exception):
    """Base class for all engine errors."""


class UnsupportedForm(DiracQError):
    """Expression leaves the supported symbolic class."""


class ProbeDomainError(DiracQError):
    """A randomized numeric probe point hit a pole; resample."""


class CanonicalProbeMismatch(DiracQError):
    """Canonical equality and the numeric probe disagreed (internal defect)."""


class PoleError(DiracQError):
    """Numeric evaluation divided by a vanishing denominator."""


class UnregisteredSymbol(DiracQError):
    """An expression references a symbol unknown to the phase space."""


class SingularVelocityMap(DiracQError):
    """The Lagrangian velocity map cannot be inverted."""


class NonterminatingChain(DiracQError):
    """The conservation condition failed to terminate within the depth bound."""


class SingularOnShell(DiracQError):
    """The constraint matrix is singular on shell (first-class content)."""


class BasisDecompositionFailure(DiracQError):
    """A residual coefficient did not decompose in the expected function basis."""


class ParameterLeak(DiracQError):
    """A derived momentum retained unknown Hamiltonian parameters."""


class PhaseImbalance(DiracQError):
    """Half-integer azimuthal phase factors failed to cancel."""


class HalfPhaseResidue(DiracQError):
    """A coefficient still carries a half-integer phase at discretization."""


class PoleOnGrid(DiracQError):
    """A coefficient has a pole on the collocation grid."""


class NonConvergence(DiracQError):
    """A residual failed to decrease across the grid sweep."""


class SchemaMismatch(DiracQError):
    """Two reports do not share a comparable schema."""
