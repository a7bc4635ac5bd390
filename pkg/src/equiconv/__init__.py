"""Numerical equiconvergence toolkit for Hill operators with singular potentials."""
from .coeffs import (CoeffSeq, Lattice, PotentialSpec, Weight, derive_potential_coeffs,
                     exp_to_sine, hilbert_transform, make_potential, remainder, sine_to_exp,
                     synthesize_on_grid, weighted_norm)
from .operators import (ContourRect, IndexWindow, TruncatedOperator, ab_sums, assemble_operator,
                        index_window, k_lambda_diag, kvk_hs_norm, kvk_matrix, psi_and_bound,
                        resolvent_apply)
from .projections import (ProjectorSet, deviation_set, free_projector, riesz_projector,
                          scalar_contour_oracle, selection_sets, tn_matrix)

__version__ = "0.1.0"
