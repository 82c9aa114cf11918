"""Quantum Fisher matrix, energy gradient and auxiliary observables.

The quantum Fisher matrix is the covariance of the log-derivative operators,

    S[alpha, beta] = E[conj(O_alpha) O_beta] - E[conj(O_alpha)] E[O_beta],

and the energy gradient uses the conjugated form

    R[alpha] = E[conj(O_alpha) H_loc] - E[conj(O_alpha)] E[H_loc],

which is the one that makes the natural-gradient update descend for complex
parameters. Expectations are taken in |psi(x)|^2, either from a Monte Carlo
batch or from full enumeration (see the `exact` module).

Covariances are assembled from mean-subtracted outer products (two passes)
rather than the naive E[O^dag O] - E[O]^dag E[O] difference, which loses
precision when means are large. The reduction order over samples is fixed,
so repeated runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FisherMatrix:
    """Hermitian positive-semidefinite covariance of log-derivative operators.

    `source` records how the expectations were taken: "sampled" (Monte
    Carlo), "exact" (full enumeration) or "analytic" (perturbative
    predictor). The visible/hidden counts are carried along because the
    block structure (a, b, vec(w)) of the entries depends on them.
    """

    entries: np.ndarray
    mean_o: np.ndarray
    source: str
    n_visible: int
    n_hidden: int

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass
class GradientVector:
    entries: np.ndarray
    energy_mean: complex
    energy_variance: float


class CovarianceAccumulator:
    """Accumulates sum_x weight(x) * (O(x)-mu)^dag (O(x)-mu) over chunks."""

    def __init__(self, dim: int, mean: np.ndarray):
        self._s = np.zeros((dim, dim), dtype=np.complex128)
        self._mean = mean

    def add(self, o_chunk: np.ndarray, weights: np.ndarray) -> None:
        oc = (o_chunk - self._mean) * np.sqrt(weights)[:, None]
        self._s += oc.conj().T @ oc

    def value(self) -> np.ndarray:
        # enforce Hermiticity against rounding by averaging with the adjoint
        return 0.5 * (self._s + self._s.conj().T)


def _dims_from_batch(batch) -> tuple[int, int]:
    n = batch.configs.shape[1]
    d = batch.o_vectors.shape[1]
    m = (d - n) // (n + 1)
    if n + m + n * m != d:
        raise ValueError("o_vector length inconsistent with configuration size")
    return n, m


def fisher_from_batch(batch) -> FisherMatrix:
    """Sample covariance of the O vectors with 1/count normalization."""
    if batch.count < 2:
        raise ValueError("Fisher estimation needs at least 2 samples")
    n, m = _dims_from_batch(batch)
    o = batch.o_vectors
    mean = o.mean(axis=0)
    acc = CovarianceAccumulator(o.shape[1], mean)
    acc.add(o, np.full(batch.count, 1.0 / batch.count))
    return FisherMatrix(entries=acc.value(), mean_o=mean, source="sampled",
                        n_visible=n, n_hidden=m)


def gradient_from_batch(batch) -> GradientVector:
    if batch.count < 2:
        raise ValueError("gradient estimation needs at least 2 samples")
    if batch.local_energies is None:
        raise ValueError("batch carries no local energies")
    o = batch.o_vectors
    eloc = batch.local_energies
    mean_o = o.mean(axis=0)
    mean_e = eloc.mean()
    oc = o - mean_o
    ec = eloc - mean_e
    r = oc.conj().T @ ec / batch.count
    var = float(np.mean(np.abs(ec) ** 2))
    return GradientVector(entries=r, energy_mean=complex(mean_e), energy_variance=var)


def fisher_exact(params, sector=None, cap: int = 20) -> FisherMatrix:
    """Exact Fisher matrix by enumeration of all configurations.

    `sector` may be "jz-zero" to restrict (and renormalize) the distribution
    to the zero-magnetization sector. Systems above `cap` sites are rejected.
    """
    from . import exact

    fisher, _, _, _ = exact.moments(params, ham=None, sector=sector, cap=cap,
                                    need_fisher=True)
    return fisher


def gradient_exact(params, ham, sector=None, cap: int = 20) -> GradientVector:
    from . import exact

    _, grad, _, _ = exact.moments(params, ham=ham, sector=sector, cap=cap,
                                  need_fisher=False)
    return grad


def jz2_estimate(source, sector=None, cap: int = 20) -> float:
    """E[(sum_i x_i)^2] / N^2 from a sample batch or, for RbmParams, exactly."""
    from .rbm import RbmParams

    if isinstance(source, RbmParams):
        from . import exact

        return exact.jz2_exact(source, sector=sector, cap=cap)
    configs = source.configs.astype(np.float64)
    n = configs.shape[1]
    return float(np.mean(configs.sum(axis=1) ** 2) / n**2)
