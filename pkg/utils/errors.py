# utils/errors.py
from __future__ import annotations


class RocError(Exception):
    """Base error. `code` is the machine-readable name, `exit_code` the CLI status."""

    exit_code = 2

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


# ----- input / validation (exit 2) ------------------------------------------

class InvalidConfig(RocError, ValueError):
    pass

class MissingColumn(RocError, KeyError):
    def __str__(self):
        # KeyError quotes its message; keep it plain
        return str(self.args[0]) if self.args else ""

class NonBinaryOutcome(RocError, ValueError):
    pass

class DegenerateOutcome(RocError, ValueError):
    pass

class NonFiniteValue(RocError, ValueError):
    pass

class DegenerateIndex(RocError, ValueError):
    pass

class InvalidWeights(RocError, ValueError):
    pass

class DimensionMismatch(RocError, ValueError):
    pass

class TooFewPerClass(RocError, ValueError):
    pass


# ----- statistical degeneracy (exit 3) --------------------------------------

class StatisticalError(RocError):
    exit_code = 3

class FitFailure(StatisticalError):
    """First-stage failure; the weighted bootstrap redraws weights on these."""

class Separation(FitFailure):
    pass

class RankDeficient(FitFailure):
    pass

class AllZeroClassWeight(FitFailure):
    pass

class SingularAMatrix(StatisticalError):
    pass

class BandwidthDegenerate(StatisticalError):
    pass

class RatioUnavailable(StatisticalError):
    pass

class BoundaryEstimate(StatisticalError):
    pass

class VarianceUnavailable(StatisticalError):
    pass

class DegenerateDifference(StatisticalError):
    pass

class ExcessiveFailures(StatisticalError):
    pass


# ----- convergence (exit 4) -------------------------------------------------

class NoConvergence(FitFailure):
    exit_code = 4
