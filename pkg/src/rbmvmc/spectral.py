"""Spectral diagnostics of the quantum Fisher matrix.

Reports the ordered eigenvalue profile together with derived quantities:
numerical rank, kink locations (abrupt drops in the ordered spectrum),
the Fisher-information trace, and the visible/hidden entanglement entropy
of each eigenvector's weight block. Also provides the perturbative
predictor for the Fisher matrix of a small-random-parameter RBM, whose
block structure explains the characteristic spectral steps at N and
N(N+1)/2 seen at random initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, ZeroWeightBlock
from .estimator import FisherMatrix
from .rbm import RbmParams

#: eigenvalues above this count toward the numerical rank
RANK_THRESHOLD = 1e-10

#: diagonal entries above this count as active parameter directions
DIAG_THRESHOLD = 1e-4

#: ratio of consecutive ordered eigenvalues that registers as a kink
KINK_RATIO = 100.0

_HERMITICITY_TOL = 1e-8
_DEGENERACY_GAP = 1e-12
_WBLOCK_TOL = 1e-12


@dataclass
class SpectrumReport:
    """Eigenvalues sorted descending plus derived diagnostics.

    `entanglement[k]` is the weight-block entanglement of eigenvector k in
    nats, or NaN where the weight block vanishes. `degenerate[k]` flags
    eigenvalues whose neighbors are equal to relative precision, where the
    eigenvector basis (and hence its entanglement) is an arbitrary choice.
    """

    eigenvalues: np.ndarray
    rank: int
    kinks: list[tuple[int, float]]
    trace: float
    entanglement: np.ndarray
    diag_count: int
    degenerate: np.ndarray


def detect_kinks(eigenvalues, ratio_threshold: float = KINK_RATIO) -> list[tuple[int, float]]:
    """Indices where the ordered spectrum drops by more than the threshold.

    Input must be sorted descending; only strictly positive pairs are
    examined. The reported index is the number of eigenvalues above the
    drop, so a spectrum with N large values then small ones kinks at N.
    """
    vals = np.asarray(eigenvalues, dtype=np.float64)
    out = []
    for i in range(vals.size - 1):
        if vals[i] > 0.0 and vals[i + 1] > 0.0:
            ratio = vals[i] / vals[i + 1]
            if ratio > ratio_threshold:
                out.append((i + 1, float(ratio)))
    return out


def eigvec_entanglement(eigvec, n_visible: int, n_hidden: int) -> float:
    """Entanglement entropy (nats) of an eigenvector's weight block.

    Drops the first N + M bias entries, reshapes the remaining N*M entries
    to an N x M matrix, normalizes it to unit Hilbert-Schmidt norm and
    returns the von Neumann entropy of its squared singular values. Raises
    ZeroWeightBlock when the weight block vanishes.
    """
    vec = np.asarray(eigvec, dtype=np.complex128)
    if vec.size != n_visible + n_hidden + n_visible * n_hidden:
        raise ValueError("eigenvector length inconsistent with (N, M)")
    wpart = vec[n_visible + n_hidden:].reshape(n_visible, n_hidden)
    norm = np.linalg.norm(wpart)
    if norm < _WBLOCK_TOL:
        raise ZeroWeightBlock("weight block norm below 1e-12; entanglement undefined")
    s = np.linalg.svd(wpart / norm, compute_uv=False)
    lam = s**2
    lam = lam[lam > 0.0]
    return float(-(lam * np.log(lam)).sum())


def fisher_information_trace(fisher: FisherMatrix) -> float:
    """Sum of the diagonal, which equals the eigenvalue sum."""
    return float(np.trace(fisher.entries).real)


def spectrum(fisher: FisherMatrix, rank_threshold: float = RANK_THRESHOLD,
             relative_rank: bool = False, kink_ratio: float = KINK_RATIO,
             diag_threshold: float = DIAG_THRESHOLD) -> SpectrumReport:
    """Full Hermitian eigendecomposition with derived diagnostics.

    `relative_rank` switches the rank threshold to 1e-6 times the largest
    eigenvalue, a more forgiving mode for noisy sampled matrices.
    """
    s = fisher.entries
    dev = np.abs(s - s.conj().T).max()
    if dev > _HERMITICITY_TOL:
        raise NotHermitian(f"max |S - S^dag| = {dev:.3e} exceeds {_HERMITICITY_TOL}")
    vals, vecs = np.linalg.eigh(0.5 * (s + s.conj().T))
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]

    threshold = rank_threshold
    if relative_rank and vals.size:
        threshold = 1e-6 * max(vals[0], 0.0)
    rank = int(np.count_nonzero(vals > threshold))

    n, m = fisher.n_visible, fisher.n_hidden
    ent = np.full(vals.size, np.nan)
    for k in range(vals.size):
        try:
            ent[k] = eigvec_entanglement(vecs[:, k], n, m)
        except ZeroWeightBlock:
            pass

    degenerate = np.zeros(vals.size, dtype=bool)
    scale = np.abs(vals).max() if vals.size else 0.0
    if scale > 0.0:
        close = np.abs(np.diff(vals)) <= _DEGENERACY_GAP * scale
        degenerate[:-1] |= close
        degenerate[1:] |= close

    return SpectrumReport(
        eigenvalues=vals,
        rank=rank,
        kinks=detect_kinks(vals, kink_ratio),
        trace=fisher_information_trace(fisher),
        entanglement=ent,
        diag_count=int(np.count_nonzero(np.real(np.diag(s)) > diag_threshold)),
        degenerate=degenerate,
    )


def random_rbm_predictor(params: RbmParams) -> FisherMatrix:
    """Perturbative Fisher matrix for small random parameters.

    Valid when all parameter magnitudes are small (|theta| <~ 0.1); the
    truncation error is cubic in the parameter scale. The visible-bias
    block is the identity, the unary (bias) sector has rank N, and the
    weight sector contributes rank N(N-1)/2 through the projector onto
    non-diagonal symmetric index pairs, so the predicted total rank is
    N + N(N-1)/2 for generic small weights and biases.
    """
    n, m = params.n_visible, params.n_hidden
    b, w = params.b, params.w
    d = n + m + n * m
    s = np.zeros((d, d), dtype=np.complex128)

    ua = slice(0, n)
    ub = slice(n, n + m)
    uw = slice(n + m, d)

    s[ua, ua] = np.eye(n)
    s[ua, ub] = w
    s[ub, ua] = w.conj().T
    s[ub, ub] = w.conj().T @ w

    # bias-weight coupling blocks, first order in b
    s[ua, uw] = np.kron(np.eye(n), b[None, :])
    s[uw, ua] = s[ua, uw].conj().T
    s[ub, uw] = np.kron(w.conj().T, b[None, :])
    s[uw, ub] = s[ub, uw].conj().T

    # weight-weight block: delta_ii' [(w^dag w)_jj' + conj(b_j) b_j'
    #                                 - 2 conj(w_ij) w_ij'] + conj(w_i'j) w_ij'
    ww = np.kron(np.eye(n), w.conj().T @ w + np.outer(b.conj(), b))
    for i in range(n):
        blk = slice(i * m, (i + 1) * m)
        ww[blk, blk] -= 2.0 * np.outer(w[i].conj(), w[i])
    ww += np.einsum("ib,ja->ijab", w, w.conj().T).reshape(n * m, n * m)
    s[uw, uw] = ww

    mean = np.concatenate([np.zeros(n, dtype=np.complex128), b, w.reshape(-1)])
    return FisherMatrix(entries=0.5 * (s + s.conj().T), mean_o=mean,
                        source="analytic", n_visible=n, n_hidden=m)


def exchange_projector(n: int) -> np.ndarray:
    """X = 1 + V - 2 sum_j |jj><jj| on the doubled visible index space.

    V is the swap operator. X projects (up to a factor 2) onto symmetric
    index pairs excluding the diagonal ones, and has rank n(n-1)/2.
    """
    eye = np.eye(n * n)
    v = np.zeros((n * n, n * n))
    for i in range(n):
        for k in range(n):
            v[i * n + k, k * n + i] = 1.0
    x = eye + v
    for j in range(n):
        x[j * n + j, j * n + j] -= 2.0
    return x


def write_spectrum_table(report: SpectrumReport, path) -> None:
    """Tab-separated table: one row per eigen-index (eigenvalue, entanglement)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("index\teigenvalue\tentanglement\n")
        for k in range(report.eigenvalues.size):
            ent = report.entanglement[k]
            ent_s = "nan" if np.isnan(ent) else f"{ent:.17g}"
            f.write(f"{k}\t{report.eigenvalues[k]:.17g}\t{ent_s}\n")


def summary_dict(report: SpectrumReport) -> dict:
    return {
        "rank": report.rank,
        "trace": report.trace,
        "kinks": [[int(i), float(r)] for i, r in report.kinks],
        "diag_count": report.diag_count,
    }
