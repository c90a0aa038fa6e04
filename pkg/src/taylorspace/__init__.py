"""Taylor sequence spaces t_p^r: transforms, duals, matrix classes and geometry.

The Taylor (circle) method T(r) has entries C(k, n) (1-r)^(n+1) r^(k-n) for
k >= n; t_p^r is the set of sequences whose image lies in ell_p.
"""

from .numerics_core import (
    DEFAULT_BUDGET,
    CheckReport,
    PreconditionError,
    TaylorParams,
    TruncationBudget,
    Verdict,
)
from .sequences import FiniteSupport, Geometric, SpaceId, Tabulated
from .taylor_ops import (
    Preimage,
    apply_euler,
    apply_inverse,
    apply_taylor,
    basis_expand,
    compose_defect,
    roundtrip_defect,
    space_norm,
    transform_geometric,
)

__all__ = [
    "DEFAULT_BUDGET", "CheckReport", "PreconditionError", "TaylorParams",
    "TruncationBudget", "Verdict", "FiniteSupport", "Geometric", "SpaceId",
    "Tabulated", "Preimage", "apply_euler", "apply_inverse", "apply_taylor",
    "basis_expand", "compose_defect", "roundtrip_defect", "space_norm",
    "transform_geometric",
]

__version__ = "0.1.0"
