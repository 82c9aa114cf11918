"""Exact RBM parameters for coherent Gibbs states of classical Ising models.

The target state has amplitudes proportional to exp(-beta H(x) / 2) for the
classical energy H(x) = sum_over_edges J_e x_i x_j (note the sign: J_e = -1
is ferromagnetic in this convention; the common ferromagnet written as
H = -J sum x_i x_j with J = 1 maps to J_e = -1 here).

One hidden unit is assigned per edge, biases vanish, and the two nonzero
weights of edge e = (i, j) solve

    2 cosh(w_ie + w_je) = c_e exp(-beta J_e / 2)   (aligned pair)
    2 cosh(w_ie - w_je) = c_e exp(+beta J_e / 2)   (antiparallel pair)

The per-edge constant c_e only rescales the unnormalized state, so any
choice gives the same physical state. We pick c_e = 2 exp(beta |J_e| / 2),
which makes the principal inverse-cosh branch real for every real coupling:
one of the two equations then has right-hand side 1 (solved by 0) and the
other has right-hand side exp(beta |J_e|) >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Lattice
from .rbm import RbmParams


@dataclass(frozen=True)
class IsingModel:
    """Classical Ising model H(x) = sum_e J_e x_i x_j at inverse temperature beta."""

    lattice: Lattice
    couplings: tuple[float, ...]
    beta: float

    def __post_init__(self):
        if len(self.couplings) != self.lattice.n_edges:
            raise ValueError("one coupling per edge required")
        if not all(np.isfinite(self.couplings)):
            raise ValueError("couplings must be finite")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


def ferromagnet(lattice: Lattice, beta: float) -> IsingModel:
    """Uniform ferromagnet (J_e = -1 in the stored sign convention)."""
    return IsingModel(lattice=lattice, couplings=(-1.0,) * lattice.n_edges,
                      beta=float(beta))


def classical_energies(model: IsingModel, configs) -> np.ndarray:
    """H(x) for one or many configurations."""
    x = np.atleast_2d(np.asarray(configs, dtype=np.float64))
    e = np.zeros(x.shape[0])
    for (i, j), coupling in zip(model.lattice.edges, model.couplings):
        e += coupling * x[:, i] * x[:, j]
    return e


def gibbs_to_rbm(model: IsingModel) -> RbmParams:
    """RBM parameters whose state satisfies |psi(x)|^2 prop. exp(-beta H(x)).

    Zero biases, one hidden unit per lattice edge (in lattice edge order),
    exactly two nonzero weights per column. Every vertex must touch at
    least one edge, otherwise its spin would not appear in the state.
    """
    lat = model.lattice
    touched = np.zeros(lat.n_sites, dtype=bool)
    for i, j in lat.edges:
        touched[i] = touched[j] = True
    if not touched.all():
        isolated = np.flatnonzero(~touched).tolist()
        raise ValueError(f"isolated vertices {isolated}: every site needs an edge")

    n, m = lat.n_sites, lat.n_edges
    w = np.zeros((n, m), dtype=np.complex128)
    for e, ((i, j), coupling) in enumerate(zip(lat.edges, model.couplings)):
        bj = model.beta * coupling
        # with c_e = 2 exp(beta|J_e|/2): cosh(sum) = exp((|bj| - bj)/2),
        # cosh(diff) = exp((|bj| + bj)/2); both arguments are >= 1, real
        s = np.arccosh(np.exp(0.5 * (abs(bj) - bj)))
        d = np.arccosh(np.exp(0.5 * (abs(bj) + bj)))
        w[i, e] = 0.5 * (s + d)
        w[j, e] = 0.5 * (s - d)
    return RbmParams(a=np.zeros(n, dtype=np.complex128),
                     b=np.zeros(m, dtype=np.complex128), w=w)


def verify_gibbs_state(params: RbmParams, model: IsingModel, cap: int = 20) -> float:
    """Max relative amplitude error of |psi|^2 against the Boltzmann weights.

    Compares log|psi(x)|^2 + beta H(x) across all configurations after
    matching the free normalization; returns max |exp(deviation) - 1|.
    """
    from .exact import enumerate_configs, log_psi_bulk

    configs = enumerate_configs(model.lattice.n_sites, cap=cap)
    log_w = 2.0 * log_psi_bulk(params, configs).real
    resid = log_w + model.beta * classical_energies(model, configs)
    resid -= resid.mean()
    return float(np.abs(np.expm1(resid)).max())
