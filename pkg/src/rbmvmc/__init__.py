"""Variational Monte Carlo for complex RBM quantum states.

Finds ground states of lattice spin Hamiltonians by stochastic
reconfiguration (natural-gradient descent with the quantum Fisher matrix)
and exposes the Fisher matrix's spectral geometry, including rank, kinks,
trace and eigenvector entanglement, as first-class diagnostics.
"""

__version__ = "0.1.0"

from .errors import (FrozenSector, IllConditioned, NonFiniteEnergy, NotHermitian,
                     SingularAmplitude, SystemTooLarge, VmcError, ZeroWeightBlock)
from .estimator import (FisherMatrix, GradientVector, fisher_exact,
                        fisher_from_batch, gradient_exact, gradient_from_batch,
                        jz2_estimate)
from .exact import (EdResult, enumerate_configs, exact_expectations,
                    exact_ground, local_energies)
from .gibbsmap import IsingModel, ferromagnet, gibbs_to_rbm, verify_gibbs_state
from .hamiltonian import (ConnectedSet, Hamiltonian, classical_ising, connected,
                          local_energy, transverse_field_ising, xxz)
from .lattice import Lattice, build_chain, build_square, from_edges
from .optimizer import (EpochRecord, RmsState, RunSchedule, SrConfig,
                        initial_params, rmsprop_classic_step, rmsprop_gs_step,
                        run_optimization, sr_step)
from .rbm import (LookupState, RbmParams, apply_flips, init_random,
                  load_checkpoint, log_psi, log_psi_ratio, lookup_state,
                  o_vector, save_checkpoint)
from .sampler import (ChainState, SampleBatch, draw_batch, make_chains,
                      metropolis_flip_sweep, metropolis_swap_sweep,
                      parallel_tempering_exchange, wolff_sweep)
from .spectral import (SpectrumReport, detect_kinks, eigvec_entanglement,
                       fisher_information_trace, random_rbm_predictor, spectrum)

__all__ = [name for name in dir() if not name.startswith("_")]
