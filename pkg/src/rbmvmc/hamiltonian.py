"""Lattice spin Hamiltonians: transverse-field Ising, XXZ, classical Ising.

With the +-1 spin encoding, matrix elements in the computational (z) basis
are:

  transverse-field Ising  H = -sum_<ij> sz_i sz_j - h sum_i sx_i
      diagonal -sum_edges x_i x_j; one single-site flip per site, element -h.

  XXZ chain  H = sum_<ij> sx_i sx_j + sy_i sy_j + delta sz_i sz_j
      diagonal delta * sum_edges x_i x_j; the exchange part connects only
      antiparallel pairs, flipping both spins with element 2 (aligned pairs
      give sx sx and sy sy contributions that cancel).

  classical Ising (diagnostic)  H = -sum_<ij> sz_i sz_j, purely diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularAmplitude
from .lattice import Lattice
from .rbm import LookupState, RbmParams, _log_psi_ratio_raw

KINDS = ("tfi", "xxz", "ising")


@dataclass(frozen=True)
class Hamiltonian:
    kind: str
    lattice: Lattice
    h: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if not (math.isfinite(self.h) and math.isfinite(self.delta)):
            raise ValueError("Hamiltonian parameters must be finite")

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites


def transverse_field_ising(lattice: Lattice, h: float) -> Hamiltonian:
    return Hamiltonian(kind="tfi", lattice=lattice, h=float(h))


def xxz(lattice: Lattice, delta: float) -> Hamiltonian:
    return Hamiltonian(kind="xxz", lattice=lattice, delta=float(delta))


def classical_ising(lattice: Lattice) -> Hamiltonian:
    return Hamiltonian(kind="ising", lattice=lattice)


@dataclass
class ConnectedSet:
    """Matrix elements <x|H|x'> reachable from one configuration.

    `moves` holds (flip-site tuple, element) pairs for off-diagonal terms;
    the diagonal element <x|H|x> is listed once, separately.
    """

    diagonal: float
    moves: list[tuple[tuple[int, ...], float]]


def connected(spins, ham: Hamiltonian) -> ConnectedSet:
    x = np.asarray(spins)
    if x.size != ham.n_sites:
        raise ValueError("configuration length does not match lattice size")
    edges = ham.lattice.edges
    zz = float(sum(int(x[i]) * int(x[j]) for i, j in edges))
    if ham.kind == "tfi":
        moves = [((i,), -ham.h) for i in range(ham.n_sites)]
        return ConnectedSet(diagonal=-zz, moves=moves)
    if ham.kind == "xxz":
        moves = [((i, j), 2.0) for i, j in edges if x[i] != x[j]]
        return ConnectedSet(diagonal=ham.delta * zz, moves=moves)
    # classical Ising diagnostic: diagonal only
    return ConnectedSet(diagonal=-zz, moves=[])


def local_energy(lookup: LookupState, ham: Hamiltonian, params: RbmParams) -> complex:
    """H_loc(x) = <x|H|psi> / <x|psi>.

    Off-diagonal terms use amplitude ratios from the lookup cache; moves into
    zero-amplitude configurations contribute nothing. Kept complex; only the
    real part of its mean is the variational energy, the imaginary part must
    vanish statistically.
    """
    if not np.all(np.isfinite(lookup.log2cosh_chi.real)):
        raise SingularAmplitude("local energy undefined: current amplitude is zero")
    cs = connected(lookup.spins, ham)
    e = complex(cs.diagonal)
    for flips, elt in cs.moves:
        if elt == 0.0:
            continue
        ratio = _log_psi_ratio_raw(lookup, flips, params)
        e += elt * np.exp(ratio)
    return e
