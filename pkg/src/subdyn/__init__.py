"""Online minimization of time-varying set functions over binary domains.

Submodular round objectives are handled through their convex continuous
extension and through tractable surrogates; decisions are scored against
per-round optima with cumulative regret and drift ledgers.  Two bundled
applications exercise the machinery: thermostatic-load dispatch tracking a
regulation signal, and real-time radial reconfiguration of a distribution
feeder.
"""

from subdyn.core import (
    FeasibleFamily,
    GroundSet,
    SetFunctionHandle,
    SubsetMask,
    VariationLedger,
)

__version__ = "0.1.0"

__all__ = [
    "GroundSet",
    "SubsetMask",
    "SetFunctionHandle",
    "FeasibleFamily",
    "VariationLedger",
    "__version__",
]
