"""lclab: a numerical laboratory for light cones in long-range spin systems.

Exact small-system dynamics, the analytic bound apparatus with explicit
constants, and the state-transfer protocol that saturates the bound.
"""

from .bounds import (BoundParams, LogBound, OutOfRegimeError, assemble,
                     assemble_for_model, connector_c, connector_c_prime,
                     derived_exponents, ell_ladder, find_ell1, long_range_bound,
                     main_bound, middle_range_bound, quasi_local_lr_bound,
                     short_range_bound, v0, velocity_recursion)
from .dynamics import (DenseOperator, LightConeScan, ResourceLimitError,
                       approx_error, commutator_norm, decompose_evolved_operator,
                       embed, evolve_operator, front_extract, lightcone_scan,
                       local_approx, partial_trace, realize, site_operator,
                       spectral_norm, term_operator)
from .hamiltonian import (HamiltonianSpec, InteractionTerm, band,
                          build_power_law_ising, check_assumptions,
                          one_site_energy, split_by_diameter,
                          truncate_by_diameter)
from .lattice import (GammaReport, Lattice, SiteSet, ball, build_lattice,
                      coarse_grain, coarse_grain_total, estimate_gamma,
                      set_distance, site_set, validate_summation_lemma)
from .protocol import (ProtocolConfig, ProtocolResult, analytic_signal,
                       chain_protocol_config, protocol_result, run_protocol,
                       saturation_scan, trace_distance)

__version__ = "0.1.0"
