"""Exception types shared across the package.

Everything derives from :class:`AcdriveError` so callers can catch the
package's failures in one clause. The CLI maps config-layer errors to
exit code 2 and runtime invariant breaches to exit code 3.
"""


class AcdriveError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------- structure

class DimensionMismatch(AcdriveError):
    """Operands have incompatible shapes."""


class NonHermitianInput(AcdriveError):
    """A matrix required to be Hermitian is not (beyond tolerance)."""


class MissingBath(AcdriveError):
    """An open-system operation was asked of a model without bath parameters."""


class InvalidRange(AcdriveError):
    """A scan interval is empty or reversed."""


class NoCrossingFound(AcdriveError):
    """No avoided crossing exists in the scanned window."""


class ReferenceTooClose(AcdriveError):
    """Diabatic reference point sits too close to the crossing region."""


class NonpositiveVelocity(AcdriveError):
    """Sweep velocity must be > 0."""


# ------------------------------------------------------------------ control

class DegenerateGap(AcdriveError):
    """Gap too small to define a finite hold time."""


class NonpositiveSpeed(AcdriveError):
    """Ramp speed must be > 0."""


class ZeroSpan(AcdriveError):
    """Ramp endpoints coincide."""


class OutOfRange(AcdriveError):
    """A value lies outside its documented domain.

    Used both for schedule lookups (time outside [0, total]) and for
    config values; the config parser attaches the offending line.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnreachablePath(AcdriveError):
    """A protocol step cannot be reached from the current sweep position."""


class NotPureTrajectory(AcdriveError):
    """A pure-state-only report was asked of an open-system trajectory."""


class ZeroVariance(AcdriveError):
    """Speed-limit request degenerate: initial and goal states coincide."""


# ----------------------------------------------------------------- dynamics

class NormDrift(AcdriveError):
    """Closed-run state norm drifted beyond tolerance."""


class TraceDrift(AcdriveError):
    """Density-matrix trace drifted beyond tolerance."""


class HermiticityBreach(AcdriveError):
    """Per-step Hermiticity correction exceeded tolerance."""


class PositivityBreach(AcdriveError):
    """Density matrix developed a negative eigenvalue beyond tolerance."""


# -------------------------------------------------------------- experiments

class NoPathFound(AcdriveError):
    """Exhaustive path search found no candidate above the fidelity threshold."""


class BadSyntax(AcdriveError):
    """Config text violates the grammar."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownKey(AcdriveError):
    """Config key is not recognized for this scenario/section."""

    def __init__(self, key: str, line: int):
        super().__init__(f"line {line}: unknown key '{key}'")
        self.key = key
        self.line = line


class NonFiniteValue(AcdriveError):
    """A NaN or infinity was about to be written to an output file."""
