"""Exception types used across the package."""


class TowerhopfError(Exception):
    """Base class for all package errors."""


class SchemaError(TowerhopfError):
    """An inclusion spec file is malformed or violates the schema."""


class AlgebraStructureError(TowerhopfError):
    """Input matrices do not form the claimed algebraic structure
    (not closed under products, unit missing, not a group table, ...)."""


class NotIndexFiniteError(TowerhopfError):
    """The conditional expectation admits no quasi-basis: the frame
    operator of the inclusion is numerically singular."""


class NotConnectedError(TowerhopfError):
    """The inclusion graph is disconnected, so there is no unique
    minimal conditional expectation.  Supply a trace explicitly."""


class NotDepthTwoError(TowerhopfError):
    """A computation that requires a certified depth-2 inclusion was
    requested on an inclusion that failed (or never ran) the test."""


class DimensionCapError(TowerhopfError):
    """A floor of the tower would exceed the configured dimension cap."""


class NumericalInconsistencyError(TowerhopfError):
    """An internal identity that must hold exactly in the theory failed
    beyond tolerance.  Indicates a bug or an ill-conditioned input, not
    a property of the inclusion."""
