"""Error taxonomy shared across the library.

Every failure mode that callers are expected to branch on gets its own
exception class.  Each class carries the CLI exit code of its category so
the command-line layer can map errors to process status without a lookup
table of its own:

* 2 -- configuration / validation problems
* 3 -- signal ingestion problems
* 4 -- numeric budget exhausted (series domain, smoothness, grid, scan budget)
* 5 -- topology violations and degeneracies
* 6 -- unresolved scans (events that could not be separated or refined)
"""

from __future__ import annotations


class ScaletopError(Exception):
    """Base class for all scaletop errors."""

    exit_code = 1


class ConfigError(ScaletopError):
    """Invalid configuration or parameter combination."""

    exit_code = 2


class NonUniformSampling(ScaletopError):
    """Ingested samples are not uniformly spaced."""

    exit_code = 3


class NotTransient(ScaletopError):
    """Signal magnitude at the window edges is too large to treat as transient."""

    exit_code = 3


class TruncationFailure(ScaletopError):
    """Series evaluation could not reach the requested tolerance.

    Raised when the term cap is hit first, or when |z| exceeds the supported
    spatial-series domain; the frequency-domain route has no such limit.
    """

    exit_code = 4


class SmoothnessViolation(ScaletopError):
    """Empirical spectral decay order is too small for the requested operation."""

    exit_code = 4


class GridTooCoarse(ScaletopError):
    """Grid resolution cannot support the requested scales or stencils."""

    exit_code = 4


class BudgetExceeded(ScaletopError):
    """A parameter scan exceeds the derivative/smoothness budget."""

    exit_code = 4


class NoConvergence(ScaletopError):
    """Iterative refinement failed to converge within its iteration cap."""

    exit_code = 6


class UnresolvedEvent(ScaletopError):
    """Bisection could not separate two bifurcation events.

    Carries ``suggested_slices`` so callers can re-run with a denser scan.
    """

    exit_code = 6

    def __init__(self, message: str, suggested_slices: int | None = None):
        super().__init__(message)
        self.suggested_slices = suggested_slices


class DegenerateLevel(ScaletopError):
    """Level value coincides with the field on a positive-area set."""

    exit_code = 5


class TopologyViolation(ScaletopError):
    """Contour classification disagrees with the expected crossing counts."""

    exit_code = 5


class OrientationAmbiguous(ScaletopError):
    """Tangent alignment votes disagree on too many segments of a curve."""

    exit_code = 5


class NestingConflict(ScaletopError):
    """Contour axis intervals partially overlap; nesting is ill-defined."""

    exit_code = 5


class IndexMismatch(ScaletopError):
    """Kind-based and Hessian-based Morse indices disagree for an event."""

    exit_code = 5


class InconsistentEuler(ScaletopError):
    """Euler balance failed on a scan, indicating a missed event."""

    exit_code = 5
