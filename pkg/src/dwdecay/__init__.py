"""Spectra and tunneling decay of one and two contact-interacting bosons
in a one-dimensional asymmetric double-well potential."""

from .spsolver import (PotentialSpec, SpBasis, SpEigenpair, box_eigenpair,
                       solve_double_well, region_overlap_matrix, p_left)
from .bethe import BetheMomenta, solve_bethe, bethe_energy_curve
from .twobody import (PairBasis, TwoBodyEigensystem, SpectralDecomposition,
                      interaction_element, assemble_and_diagonalize,
                      prepare_initial_state, expand_initial)
from .spectral import (participation_ratio, weighted_pr, region_projections,
                       width_estimators, decay_rate_from_pr, dos_theory,
                       dos_numeric, pr_sweep)
from .dynamics import (evolve, t_max, region_probabilities_t, reduced_density,
                       exp_fit, peak_analysis)
from .scattering import ResonancePole, find_resonances

__version__ = "0.1.0"
