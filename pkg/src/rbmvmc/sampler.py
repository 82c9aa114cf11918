"""Markov-chain samplers over |psi(x)|^2 and the classical Wolff sampler.

A chain at temperature T in (0, 1] targets |psi(x)|^(2T); the T = 1 chain is
the physical one and is the only chain that contributes samples. Parallel
tempering exchanges configurations between adjacent temperatures, proposing
even or odd pairs on alternating calls (the caller passes the parity).

Each chain owns a private LookupState and RNG stream, spawned from a single
master seed, so runs are reproducible regardless of how chains are
scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FrozenSector
from .hamiltonian import Hamiltonian, local_energy
from .lattice import Lattice, adjacency
from .rbm import LookupState, RbmParams, _log_psi_ratio_raw, apply_flips, lookup_state, o_vector


@dataclass
class ChainState:
    lookup: LookupState
    temperature: float
    rng: np.random.Generator
    n_proposed: int = 0
    n_accepted: int = 0
    n_exchange_proposed: int = 0
    n_exchange_accepted: int = 0

    def __post_init__(self):
        if not 0.0 < self.temperature <= 1.0:
            raise ValueError("chain temperature must lie in (0, 1]")

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else 0.0


def _chain_log_psi(chain: ChainState, params: RbmParams) -> complex:
    return chain.lookup.log_psi(params)


def make_chains(params: RbmParams, n_chains: int = 16, seed=0,
                init: str = "random", temperatures=None) -> list[ChainState]:
    """Chains sorted by temperature, default grid k/n_chains for k = 1..n.

    `init` is "random" (independent uniform +-1 per chain), "balanced"
    (random zero-magnetization configuration, for sector-conserving swap
    updates) or an explicit +-1 configuration shared by all chains.
    """
    n = params.n_visible
    if temperatures is None:
        temperatures = [(k + 1) / n_chains for k in range(n_chains)]
    if sorted(temperatures) != list(temperatures):
        raise ValueError("temperatures must be sorted ascending")
    streams = np.random.SeedSequence(seed).spawn(len(temperatures))
    chains = []
    for t, ss in zip(temperatures, streams):
        rng = np.random.default_rng(ss)
        if isinstance(init, str) and init == "random":
            spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        elif isinstance(init, str) and init == "balanced":
            if n % 2:
                raise ValueError("balanced init requires an even site count")
            spins = np.array([1] * (n // 2) + [-1] * (n // 2), dtype=np.int8)
            rng.shuffle(spins)
        elif isinstance(init, str):
            raise ValueError(f"unknown init {init!r}")
        else:
            spins = np.asarray(init, dtype=np.int8).copy()
        chains.append(ChainState(lookup=lookup_state(spins, params),
                                 temperature=float(t), rng=rng))
    return chains


def _metropolis_accept(chain: ChainState, dlog: complex) -> bool:
    # target density |psi|^(2T): acceptance exp(2 T Re dlog), capped at 1
    logp = 2.0 * chain.temperature * dlog.real
    u = chain.rng.random()
    return logp >= 0.0 or u < np.exp(logp)


def metropolis_flip_sweep(chain: ChainState, params: RbmParams) -> ChainState:
    """N single-site flip proposals at uniformly random sites."""
    n = chain.lookup.spins.size
    for _ in range(n):
        site = int(chain.rng.integers(n))
        dlog = _log_psi_ratio_raw(chain.lookup, (site,), params)
        chain.n_proposed += 1
        if _metropolis_accept(chain, dlog):
            apply_flips(chain.lookup, (site,), params)
            chain.n_accepted += 1
    return chain


def metropolis_swap_sweep(chain: ChainState, params: RbmParams) -> ChainState:
    """N exchange proposals between a random up-site and a random down-site.

    Conserves total magnetization exactly. The (up, down) pair count is the
    same before and after a swap, so the proposal is symmetric and the
    Metropolis ratio is the bare amplitude ratio. Raises FrozenSector on a
    fully polarized configuration.
    """
    n = chain.lookup.spins.size
    for _ in range(n):
        ups = np.flatnonzero(chain.lookup.spins > 0)
        downs = np.flatnonzero(chain.lookup.spins < 0)
        if ups.size == 0 or downs.size == 0:
            raise FrozenSector("no antiparallel pair available for a swap update")
        i = int(ups[chain.rng.integers(ups.size)])
        j = int(downs[chain.rng.integers(downs.size)])
        dlog = _log_psi_ratio_raw(chain.lookup, (i, j), params)
        chain.n_proposed += 1
        if _metropolis_accept(chain, dlog):
            apply_flips(chain.lookup, (i, j), params)
            chain.n_accepted += 1
    return chain


def parallel_tempering_exchange(chains: list[ChainState], params: RbmParams,
                                pair_parity: int = 0) -> list[ChainState]:
    """Propose configuration swaps between adjacent-temperature chains.

    Only pairs (k, k+1) with k = pair_parity (mod 2) are proposed; callers
    alternate the parity between sweeps. Acceptance is
    min(1, exp((T_k - T_{k+1}) (log|psi_{k+1}|^2 - log|psi_k|^2))).
    """
    for k in range(pair_parity % 2, len(chains) - 1, 2):
        lo, hi = chains[k], chains[k + 1]
        l_lo = 2.0 * _chain_log_psi(lo, params).real
        l_hi = 2.0 * _chain_log_psi(hi, params).real
        log_acc = (lo.temperature - hi.temperature) * (l_hi - l_lo)
        lo.n_exchange_proposed += 1
        u = lo.rng.random()
        if log_acc >= 0.0 or u < np.exp(log_acc):
            lo.lookup, hi.lookup = hi.lookup, lo.lookup
            lo.n_exchange_accepted += 1
    return chains


@dataclass
class SampleBatch:
    """Parallel records drawn from the physical (T = 1) chain."""

    configs: np.ndarray
    o_vectors: np.ndarray
    local_energies: np.ndarray | None
    count: int


_SWEEPS = {
    "flip": metropolis_flip_sweep,
    "swap": metropolis_swap_sweep,
}


def draw_batch(chains: list[ChainState], params: RbmParams, ham: Hamiltonian,
               n_samples: int, thinning: int = 1, burn_in=None,
               update: str = "flip", exchange: bool = True,
               _sweep_offset: int = 0) -> SampleBatch:
    """Sample configurations, O vectors and local energies from the T=1 chain.

    Performs `burn_in` sweeps (default 10 N), then records one sample every
    `thinning` sweeps. Every sweep advances all chains and, when more than
    one chain is present, proposes tempering exchanges with alternating pair
    parity.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    sweep = _SWEEPS[update]
    n = params.n_visible
    if burn_in is None:
        burn_in = 10 * n
    d = params.dim

    configs = np.empty((n_samples, n), dtype=np.int8)
    o_vecs = np.empty((n_samples, d), dtype=np.complex128)
    e_loc = np.empty(n_samples, dtype=np.complex128)

    sweep_count = _sweep_offset

    def one_sweep():
        nonlocal sweep_count
        for chain in chains:
            sweep(chain, params)
        if exchange and len(chains) > 1:
            parallel_tempering_exchange(chains, params, pair_parity=sweep_count % 2)
        sweep_count += 1

    for _ in range(burn_in):
        one_sweep()
    physical = chains[-1]
    for s in range(n_samples):
        for _ in range(thinning):
            one_sweep()
        configs[s] = physical.lookup.spins
        o_vecs[s] = o_vector(physical.lookup, params)
        e_loc[s] = local_energy(physical.lookup, ham, params)
    return SampleBatch(configs=configs, o_vectors=o_vecs, local_energies=e_loc,
                       count=n_samples)


def wolff_sweep(spins, beta: float, lattice: Lattice, rng) -> np.ndarray:
    """One Wolff cluster update for the ferromagnetic classical Ising model.

    Targets exp(-beta H)/Z with H = -sum_<ij> x_i x_j. Grows a cluster from
    a random seed site, adding aligned neighbors with probability
    1 - exp(-2 beta), then flips the whole cluster. Mutates and returns the
    configuration.
    """
    spins = np.asarray(spins)
    p_add = 1.0 - np.exp(-2.0 * beta)
    nbrs = adjacency(lattice)
    seed_site = int(rng.integers(spins.size))
    seed_spin = int(spins[seed_site])
    in_cluster = np.zeros(spins.size, dtype=bool)
    in_cluster[seed_site] = True
    stack = [seed_site]
    while stack:
        site = stack.pop()
        for nb in nbrs[site]:
            if not in_cluster[nb] and spins[nb] == seed_spin and rng.random() < p_add:
                in_cluster[nb] = True
                stack.append(nb)
    spins[in_cluster] *= -1
    return spins
