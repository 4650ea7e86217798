"""Reduced rank extrapolation for vector and low-rank matrix sequences, with a
RADI solver for large sparse Riccati and Lyapunov equations."""

from .errors import (DegenerateInput, DimensionMismatch, IncompleteCache, IndefiniteY,
                     NotConverged, OracleFailed, ParseError, PrerequisiteViolated, RRexError,
                     SingularShiftedSystem, UnstableProblem, UnsupportedField)
from .extrapolation import (DriverConfig, DriverResult, FixedPointMap, Weights, rre_delta,
                            rre_residual, rre_weights, run_driver)
from .lowrank import (Increment, IncrementSequence, LowRankSym, assemble_extrapolant,
                      lowrank_rre_delta, projected_norm, residual_weights, sym_vec)
from .radi import AreProblem, RadiResult, ShiftStrategy, radi_solve, radi_step
from .trace import TraceRow

__version__ = "0.1.0"
