"""Band calculus, SO(3) moment invariants and third-moment orbit recovery."""

from .errors import (
    AlignmentUnavailable,
    BispecError,
    DomainError,
    GenericityError,
    InconsistencyError,
    MarchingBreak,
    ParameterError,
    UnrecoverableError,
)
from .moments import MomentBlocks, cg_project, moment1, moment2, moment3, moments, recover_m1_m2_from_m3
from .recovery import RecoveryReport, factor_gram, frequency_march, recover_orbit, resolve_sign, resolve_unitary
from .signal import RealStructure, RepSpec, Signal, act, distance_up_to_group, random_signal
from .su2 import CGTable, Rotation, clebsch_gordan, get_table, wigner_D

__version__ = "0.1.0"
