"""Back-and-forth nudging for one-dimensional transport equations."""

from .bfn import BfnConfig, BfnReport, decrease_rate_profile, illposedness_diagnostic, oracle_deviation, run_bfn
from .core import (
    BC,
    BfnError,
    ConstantAdvection,
    CrossingError,
    EquationSpec,
    Field,
    Gain,
    Grid1D,
    NamedProfile,
    NoOracle,
    PositivityError,
    ProfileAdvection,
    SelfAdvection,
    StabilityError,
    Trajectory,
    TruncationError,
    UnsupportedRegime,
    l2_norm,
    linf_grad,
)

__version__ = "0.1.0"

__all__ = [
    "BC", "BfnConfig", "BfnError", "BfnReport", "ConstantAdvection", "CrossingError",
    "EquationSpec", "Field", "Gain", "Grid1D", "NamedProfile", "NoOracle", "PositivityError",
    "ProfileAdvection", "SelfAdvection", "StabilityError", "Trajectory", "TruncationError",
    "UnsupportedRegime", "decrease_rate_profile", "illposedness_diagnostic", "l2_norm",
    "linf_grad", "oracle_deviation", "run_bfn",
]
