"""Approximate closest vector problems under general norms via coverings."""

from .boost import (CvpInstance, SolveReport, boost_deterministic, boost_randomized,
                    normalize_instance, solve_cvp)
from .coverings import (Covering, CoveringBody, cover_grid, cover_polytope, cover_smooth,
                        cover_zonotope, local_cover_sample, symmetrize, validate_cover)
from .errors import (BudgetExceeded, DimensionMismatch, DomainError, Infeasible,
                     InvalidCovering, LatcoverError, MissingSandwich, MissingSmoothness,
                     NoCertifiedSparsifier, NotPrime, UnboundedGauge)
from .lattice import Lattice, closest_l2, enumerate_l2, exact_cvp, hnf_sublattice
from .norms import (HalfspaceBody, Lp, NormBody, PolytopeH, Scaled, SmoothnessProfile,
                    Zonotope, cube, modulus_estimate, modulus_lp)
from .sparsify import (certify_sparsifier, check_smoothness_lemma, g_count, sparsifier_cvp,
                       sparsify_candidates)

__version__ = "0.1.0"
