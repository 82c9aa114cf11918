"""Parameter-update engines and the optimization loop.

Stochastic reconfiguration solves (S + eps I) v = R with a direct Hermitian
factorization and steps theta -> theta - eta v. The step is applied to the
complex parameter vector directly; no projection to real parts.

The ground-state RMSProp variant estimates curvature from the mean
log-derivative vector <O> rather than from the gradient, which is what
distinguishes it from the classic recursion: the running second moment is
built from |<O>|^2 while the update direction remains the energy gradient.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import exact as exact_mod
from .errors import IllConditioned, NonFiniteEnergy
from .estimator import (FisherMatrix, GradientVector, fisher_from_batch,
                        gradient_from_batch)
from .hamiltonian import Hamiltonian
from .rbm import RbmParams, init_random
from .sampler import draw_batch, make_chains
from .spectral import SpectrumReport, spectrum

_SOLVE_RESIDUAL_TOL = 1e-8


@dataclass
class SrConfig:
    """Stochastic-reconfiguration hyper-parameters."""

    eta: float = 0.01
    epsilon: float = 1e-3
    epochs: int = 1000

    def __post_init__(self):
        if self.eta <= 0 or self.epsilon <= 0:
            raise ValueError("eta and epsilon must be positive")


@dataclass
class RmsState:
    """Running second-moment state for the RMSProp recursions."""

    v: np.ndarray
    t: int = 0
    beta: float = 0.9
    eps_denom: float = 1e-8

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        if np.any(self.v < 0):
            raise ValueError("second-moment vector must be nonnegative")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")


def rms_state(dim: int, beta: float = 0.9, eps_denom: float = 1e-8) -> RmsState:
    return RmsState(v=np.zeros(dim), beta=beta, eps_denom=eps_denom)


def sr_step(params: RbmParams, fisher: FisherMatrix, gradient: GradientVector,
            cfg: SrConfig) -> RbmParams:
    """theta - eta (S + eps I)^{-1} R via Cholesky, residual-checked."""
    s = fisher.entries
    r = gradient.entries
    if s.shape[0] != r.size or r.size != params.dim:
        raise ValueError("dimension mismatch between parameters, S and R")
    r_norm = np.linalg.norm(r)
    if r_norm == 0.0:
        return params.copy()
    a = s + cfg.epsilon * np.eye(s.shape[0])
    try:
        factor = scipy.linalg.cho_factor(a, check_finite=False)
        v = scipy.linalg.cho_solve(factor, r, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise IllConditioned(f"Hermitian factorization failed: {exc}") from exc
    residual = np.linalg.norm(a @ v - r) / r_norm
    if residual > _SOLVE_RESIDUAL_TOL:
        raise IllConditioned(f"solve residual {residual:.3e} above {_SOLVE_RESIDUAL_TOL}")
    theta = params.flatten() - cfg.eta * v
    return RbmParams.unflatten(theta, params.n_visible, params.n_hidden)


def rmsprop_gs_step(params: RbmParams, gradient: GradientVector, mean_o,
                    state: RmsState, eta: float):
    """Ground-state RMSProp: curvature from <O>, direction from the gradient."""
    mean_o = np.asarray(mean_o)
    if mean_o.size != params.dim or gradient.entries.size != params.dim:
        raise ValueError("dimension mismatch")
    v = state.beta * state.v + (1.0 - state.beta) * np.abs(mean_o) ** 2
    theta = params.flatten() - eta * gradient.entries / (np.sqrt(v) + state.eps_denom)
    new_params = RbmParams.unflatten(theta, params.n_visible, params.n_hidden)
    return new_params, RmsState(v=v, t=state.t + 1, beta=state.beta,
                                eps_denom=state.eps_denom)


def rmsprop_classic_step(params: RbmParams, gradient: GradientVector,
                         state: RmsState, eta: float):
    """Classic RMSProp: curvature from the gradient itself."""
    return rmsprop_gs_step(params, gradient, gradient.entries, state, eta)


@dataclass
class RunSchedule:
    """Everything needed to drive one optimization run."""

    method: str = "sr"            # sr | rmsprop | rmsprop-classic
    backend: str = "exact"        # exact | mcmc
    eta: float = 0.01
    epsilon: float = 1e-3
    epochs: int = 1000
    rms_beta: float = 0.9
    rms_eps: float = 1e-8
    sector: str | None = None     # exact backend: None or "jz-zero"
    n_samples: int = 1000
    n_chains: int = 16
    thinning: int = 1
    burn_in: int | None = None    # first epoch; default 10 N
    inter_epoch_sweeps: int = 5   # re-equilibration after each update
    update: str = "flip"          # flip | swap
    chain_init: str = "random"    # random | balanced
    spectrum_every: int = 5       # 0 disables spectrum checkpoints
    reference_energy: float | None = None
    seed: int = 0
    enum_cap: int = 20


@dataclass
class EpochRecord:
    epoch: int
    energy: complex
    variance: float
    rescaled: float | None
    acceptance: dict | None
    wall_time: float
    spectrum: SpectrumReport | None = None


def _needs_fisher(method: str, want_spectrum: bool) -> bool:
    return method == "sr" or want_spectrum


def run_optimization(ham: Hamiltonian, params: RbmParams, schedule: RunSchedule,
                     on_epoch=None):
    """Optimize and return (records, final params).

    Record 0 is the initial point; each later record holds the energy
    measured at the parameters after that many updates, so a schedule with
    zero epochs yields exactly the initial record. The rescaled energy is
    (E - E_ref) / (E_0 - E_ref) when a reference energy is supplied.
    Spectra of the Fisher matrix are attached every `spectrum_every` epochs.
    Aborts with NonFiniteEnergy if the energy estimate diverges.
    """
    if schedule.method not in ("sr", "rmsprop", "rmsprop-classic"):
        raise ValueError(f"unknown method {schedule.method!r}")
    if schedule.backend not in ("exact", "mcmc"):
        raise ValueError(f"unknown backend {schedule.backend!r}")

    sr_cfg = SrConfig(eta=schedule.eta, epsilon=schedule.epsilon,
                      epochs=schedule.epochs)
    rms = rms_state(params.dim, beta=schedule.rms_beta, eps_denom=schedule.rms_eps)
    chains = None
    if schedule.backend == "mcmc":
        chains = make_chains(params, n_chains=schedule.n_chains,
                             seed=schedule.seed, init=schedule.chain_init)

    records: list[EpochRecord] = []
    params = params.copy()
    e0 = None
    fisher = gradient = mean_o = None

    def want_spectrum(epoch: int) -> bool:
        if schedule.spectrum_every <= 0:
            return False
        return epoch % schedule.spectrum_every == 0 or epoch == schedule.epochs

    def estimate(epoch: int):
        """(fisher | None, gradient, mean_o, acceptance) at current params."""
        need_fisher = _needs_fisher(schedule.method, want_spectrum(epoch))
        if schedule.backend == "exact":
            fisher, grad, _, mean = exact_mod.moments(
                params, ham=ham, sector=schedule.sector, cap=schedule.enum_cap,
                need_fisher=need_fisher)
            return fisher, grad, mean, None
        before = [(c.n_proposed, c.n_accepted) for c in chains]
        burn = schedule.burn_in if epoch == 0 else schedule.inter_epoch_sweeps
        batch = draw_batch(chains, params, ham, schedule.n_samples,
                           thinning=schedule.thinning, burn_in=burn,
                           update=schedule.update, _sweep_offset=epoch)
        acc = {
            "flip" if schedule.update == "flip" else "swap": [
                (c.n_accepted - b[1]) / max(c.n_proposed - b[0], 1)
                for c, b in zip(chains, before)
            ],
        }
        fish = fisher_from_batch(batch) if need_fisher else None
        grad = gradient_from_batch(batch)
        mean = fish.mean_o if fish is not None else batch.o_vectors.mean(axis=0)
        return fish, grad, mean, acc

    start = time.perf_counter()
    for epoch in range(schedule.epochs + 1):
        if epoch > 0:
            if schedule.method == "sr":
                params = sr_step(params, fisher, gradient, sr_cfg)
            elif schedule.method == "rmsprop":
                params, rms = rmsprop_gs_step(params, gradient, mean_o, rms,
                                              schedule.eta)
            else:
                params, rms = rmsprop_classic_step(params, gradient, rms,
                                                   schedule.eta)
        fisher, gradient, mean_o, acceptance = estimate(epoch)
        energy = gradient.energy_mean
        if not np.isfinite(energy):
            raise NonFiniteEnergy(f"energy diverged at epoch {epoch}: {energy}")
        if e0 is None:
            e0 = energy.real
        rescaled = None
        if schedule.reference_energy is not None:
            denom = e0 - schedule.reference_energy
            rescaled = (energy.real - schedule.reference_energy) / denom \
                if denom != 0.0 else 0.0
        report = spectrum(fisher) if (want_spectrum(epoch) and fisher is not None) \
            else None
        record = EpochRecord(
            epoch=epoch,
            energy=complex(energy),
            variance=gradient.energy_variance,
            rescaled=rescaled,
            acceptance=acceptance,
            wall_time=time.perf_counter() - start,
            spectrum=report,
        )
        records.append(record)
        if on_epoch is not None:
            on_epoch(record, params)
    return records, params


def initial_params(n_sites: int, alpha: int = 3, sigma: float = 1e-2,
                   seed=0) -> RbmParams:
    """Random small-parameter start with the default hidden-unit ratio."""
    return init_random(n_sites, alpha * n_sites, sigma, seed)
