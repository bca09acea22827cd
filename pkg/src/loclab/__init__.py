"""Finite-volume numerics for the lattice Anderson model: spectra, resolvent regularity,
eigenfunction-correlation decay, Fermi-projection decay and transport moments."""

__version__ = "0.1.0"

from .errors import (ConfigError, FitInfeasibleError, InvalidParameterError, LoclabError,
                     NearEigenvalueError, PreconditionError, ResourceError, SolverError)
from .model import (Box, DisorderSpec, FiniteVolumeHamiltonian, build_hamiltonian,
                    chain_hamiltonian, hamiltonian_from_potential, sample_potential,
                    separation_pairs, weight_vector)
from .spectral import (EigenCluster, EigenSolution, cluster_eigenvalues, eigendecompose,
                       fermi_projection, resolvent_apply, spectral_measure)
from .msa import (ScaleSequence, belt_geometry, certify_over_interval, estimate_probability,
                  event_R, regularity_check, run_scale_sequence)
from .localization import (compute_W, compute_Z, correlation_tables, count_NL,
                           multiplicity_histogram, sudec_profile, sudec_sup_product, sule_centers)
from .fermi_dynamics import (fermi_kernel_profile, fermi_kernel_sup, smooth_bump,
                             transport_moment)
from .stats import DecayFit, EnsembleEstimate, ensemble_mean, fit_decay
from .config import RunConfig, parse_config
from .experiments import RunManifest, run_experiment, verify_manifest
