"""Exact oracles: full-enumeration expectations and exact diagonalization.

Basis convention: configuration index c encodes site k in bit k, with bit
value 0 meaning spin +1 and bit value 1 meaning spin -1. This fixed order
makes checkpointed runs and ground-state vectors reproducible.

Enumeration-based expectations ("exact reconfiguration" backend) evaluate
the normalization sum Z = sum_x |psi(x)|^2 and all moments over the full
2^N configuration space, optionally restricted to the zero-magnetization
sector. Intermediate quantities are scaled by sqrt(p(x)) so that states
with vanishing amplitude cannot overflow local-energy ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.special import logsumexp

from .errors import SystemTooLarge
from .estimator import CovarianceAccumulator, FisherMatrix, GradientVector
from .hamiltonian import Hamiltonian, connected
from .rbm import RbmParams, log2cosh

#: default enumeration cap (2^20 configurations)
DEFAULT_CAP = 20

#: dense diagonalization below this many sites, sparse iterative above
DENSE_CUTOFF = 14

_CHUNK = 8192


def _check_cap(n_sites: int, cap: int) -> None:
    if n_sites > cap:
        raise SystemTooLarge(f"{n_sites} sites exceeds enumeration cap {cap}")


def _codes(n_sites: int, sector=None) -> np.ndarray:
    codes = np.arange(1 << n_sites, dtype=np.int64)
    if sector is None or sector == "full":
        return codes
    if sector == "jz-zero":
        if n_sites % 2:
            raise ValueError("jz-zero sector requires an even number of sites")
        bits = (codes[:, None] >> np.arange(n_sites)) & 1
        return codes[bits.sum(axis=1) == n_sites // 2]
    raise ValueError(f"unknown sector {sector!r}")


def _decode(codes: np.ndarray, n_sites: int) -> np.ndarray:
    bits = (codes[:, None] >> np.arange(n_sites)) & 1
    return (1 - 2 * bits).astype(np.int8)


def enumerate_configs(n_sites: int, sector=None, cap: int = DEFAULT_CAP) -> np.ndarray:
    """All configurations as a (B, N) array of +-1, in basis order."""
    _check_cap(n_sites, cap)
    return _decode(_codes(n_sites, sector), n_sites)


def _chi_chunk(params: RbmParams, xf: np.ndarray) -> np.ndarray:
    # two real GEMMs beat one complex GEMM on a real configuration matrix
    return (xf @ params.w.real + 1j * (xf @ params.w.imag)) + params.b


def log_psi_bulk(params: RbmParams, configs: np.ndarray) -> np.ndarray:
    """Log-amplitudes for many configurations; -inf real part at exact zeros."""
    out = np.empty(configs.shape[0], dtype=np.complex128)
    for lo in range(0, configs.shape[0], _CHUNK):
        xf = configs[lo:lo + _CHUNK].astype(np.float64)
        chi = _chi_chunk(params, xf)
        out[lo:lo + _CHUNK] = xf @ params.a + log2cosh(chi).sum(axis=1)
    return out


def distribution(params: RbmParams, configs: np.ndarray) -> np.ndarray:
    """Normalized probabilities |psi|^2 / Z over the given configurations."""
    logp = 2.0 * log_psi_bulk(params, configs).real
    return np.exp(logp - logsumexp(logp))


def _o_chunk(xf: np.ndarray, chi: np.ndarray) -> np.ndarray:
    bs, n = xf.shape
    m = chi.shape[1]
    t = np.tanh(chi)
    out = np.empty((bs, n + m + n * m), dtype=np.complex128)
    out[:, :n] = xf
    out[:, n:n + m] = t
    out[:, n + m:] = (xf[:, :, None] * t[:, None, :]).reshape(bs, n * m)
    return out


def _diag_chunk(ham: Hamiltonian, xf: np.ndarray) -> np.ndarray:
    zz = np.zeros(xf.shape[0])
    for i, j in ham.lattice.edges:
        zz += xf[:, i] * xf[:, j]
    if ham.kind == "xxz":
        return ham.delta * zz
    return -zz


def _scaled_local_chunk(params, ham, xf, chi, l2c, logpsi, log_z):
    """A(x) = sqrt(p(x)) * H_loc(x) for one chunk, overflow-safe.

    Each off-diagonal term is exp(log psi(x') - i Im log psi(x) - log(Z)/2),
    whose magnitude is sqrt(p(x')) <= 1, so ratios from vanishing amplitudes
    never overflow.
    """
    shift = logpsi.real - 0.5 * log_z
    sqp = np.exp(shift)
    l2c_sum = l2c.sum(axis=1)
    a = _diag_chunk(ham, xf).astype(np.complex128) * sqp
    if ham.kind == "tfi":
        if ham.h != 0.0:
            for i in range(xf.shape[1]):
                chi2 = chi - (2.0 * xf[:, i:i + 1]) * params.w[i][None, :]
                dlog = (
                    -2.0 * params.a[i] * xf[:, i]
                    + log2cosh(chi2).sum(axis=1) - l2c_sum
                )
                a += -ham.h * np.exp(dlog + shift)
    elif ham.kind == "xxz":
        for i, j in ham.lattice.edges:
            mask = xf[:, i] != xf[:, j]
            if not mask.any():
                continue
            chi2 = (
                chi[mask]
                - (2.0 * xf[mask, i:i + 1]) * params.w[i][None, :]
                - (2.0 * xf[mask, j:j + 1]) * params.w[j][None, :]
            )
            dlog = (
                -2.0 * (params.a[i] * xf[mask, i] + params.a[j] * xf[mask, j])
                + log2cosh(chi2).sum(axis=1) - l2c_sum[mask]
            )
            a[mask] += 2.0 * np.exp(dlog + shift[mask])
    return a


def local_energies(params: RbmParams, ham: Hamiltonian, configs: np.ndarray) -> np.ndarray:
    """H_loc(x) for many configurations (direct ratios, not overflow-guarded)."""
    out = np.empty(configs.shape[0], dtype=np.complex128)
    logpsi = log_psi_bulk(params, configs)
    for lo in range(0, configs.shape[0], _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        xf = configs[sl].astype(np.float64)
        chi = _chi_chunk(params, xf)
        l2c = log2cosh(chi)
        # reuse the scaled form with log Z := 2 Re log psi(x), i.e. sqp = 1
        a = _scaled_local_chunk(params, ham, xf, chi, l2c,
                                logpsi[sl], 2.0 * logpsi[sl].real)
        out[sl] = a
    return out


def moments(params: RbmParams, ham=None, sector=None, cap: int = DEFAULT_CAP,
            need_fisher: bool = True):
    """Exact (FisherMatrix | None, GradientVector | None, energy, mean_o).

    The gradient and energy require a Hamiltonian; pass ham=None to compute
    the Fisher matrix (or just the mean log-derivative vector) alone.
    """
    n = params.n_visible
    _check_cap(n, cap)
    configs = enumerate_configs(n, sector, cap=cap)
    logpsi = log_psi_bulk(params, configs)
    logp = 2.0 * logpsi.real
    log_z = logsumexp(logp)
    p = np.exp(logp - log_z)
    sqp = np.exp(0.5 * (logp - log_z))

    d = params.dim
    mean_o = np.zeros(d, dtype=np.complex128)
    a_loc = np.empty(configs.shape[0], dtype=np.complex128) if ham is not None else None

    for lo in range(0, configs.shape[0], _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        xf = configs[sl].astype(np.float64)
        chi = _chi_chunk(params, xf)
        mean_o += p[sl] @ _o_chunk(xf, chi)
        if ham is not None:
            l2c = log2cosh(chi)
            a_loc[sl] = _scaled_local_chunk(params, ham, xf, chi, l2c,
                                            logpsi[sl], log_z)

    gradient = None
    energy = None
    if ham is not None:
        energy = complex(sqp @ a_loc)
        e2 = float(np.abs(a_loc) @ np.abs(a_loc))
        variance = max(e2 - abs(energy) ** 2, 0.0)

    fisher = None
    r_vec = np.zeros(d, dtype=np.complex128) if ham is not None else None
    acc = CovarianceAccumulator(d, mean_o) if need_fisher else None
    if need_fisher or ham is not None:
        for lo in range(0, configs.shape[0], _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            xf = configs[sl].astype(np.float64)
            chi = _chi_chunk(params, xf)
            o = _o_chunk(xf, chi)
            if need_fisher:
                acc.add(o, p[sl])
            if ham is not None:
                oc = (o - mean_o) * sqp[sl, None]
                r_vec += oc.conj().T @ (a_loc[sl] - sqp[sl] * energy)

    if need_fisher:
        fisher = FisherMatrix(entries=acc.value(), mean_o=mean_o, source="exact",
                              n_visible=n, n_hidden=params.n_hidden)
    if ham is not None:
        gradient = GradientVector(entries=r_vec, energy_mean=energy,
                                  energy_variance=variance)
    return fisher, gradient, energy, mean_o


def exact_expectations(params: RbmParams, ham: Hamiltonian, sector=None,
                       cap: int = DEFAULT_CAP):
    """Exact-reconfiguration backend: (FisherMatrix, GradientVector, energy)."""
    fisher, gradient, energy, _ = moments(params, ham=ham, sector=sector,
                                          cap=cap, need_fisher=True)
    return fisher, gradient, energy


def jz2_exact(params: RbmParams, sector=None, cap: int = DEFAULT_CAP) -> float:
    """Exact E[(sum_i x_i)^2] / N^2."""
    n = params.n_visible
    configs = enumerate_configs(n, sector, cap=cap)
    p = distribution(params, configs)
    mags = configs.astype(np.float64).sum(axis=1)
    return float(p @ mags**2 / n**2)


# -- exact diagonalization ---------------------------------------------------

@dataclass
class EdResult:
    ground_energy: float
    ground_vector: np.ndarray | None
    sector: str


def _hamiltonian_matrix(ham: Hamiltonian, codes: np.ndarray):
    """Sparse Hamiltonian over the given basis codes, built from connected()."""
    n = ham.n_sites
    pos = np.full(1 << n, -1, dtype=np.int64)
    pos[codes] = np.arange(codes.size)
    spins_all = _decode(codes, n)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for row, code in enumerate(codes):
        cs = connected(spins_all[row], ham)
        if cs.diagonal != 0.0:
            rows.append(row)
            cols.append(row)
            vals.append(cs.diagonal)
        for flips, elt in cs.moves:
            if elt == 0.0:
                continue
            mask = 0
            for i in flips:
                mask |= 1 << i
            tgt = pos[code ^ mask]
            if tgt >= 0:
                rows.append(row)
                cols.append(tgt)
                vals.append(float(elt))
    mat = scipy.sparse.coo_matrix(
        (vals, (rows, cols)), shape=(codes.size, codes.size), dtype=np.float64
    )
    return mat.tocsr()


def exact_ground(ham: Hamiltonian, sector=None, want_vector: bool = True,
                 cap: int = DEFAULT_CAP, dense_cutoff: int = DENSE_CUTOFF) -> EdResult:
    """Lowest eigenpair of the (sector-restricted) Hamiltonian.

    Dense diagonalization up to `dense_cutoff` sites, sparse Lanczos above.
    The returned vector, when kept, lives in the full 2^N space with zeros
    outside the sector, normalized, with residual below 1e-10.
    """
    n = ham.n_sites
    _check_cap(n, cap)
    codes = _codes(n, sector)
    mat = _hamiltonian_matrix(ham, codes)
    if n <= dense_cutoff:
        dense = mat.toarray()
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, 0])
        e0 = float(vals[0])
        vec = vecs[:, 0]
    else:
        v0 = np.full(codes.size, 1.0 / np.sqrt(codes.size))
        vals, vecs = scipy.sparse.linalg.eigsh(mat, k=1, which="SA", v0=v0)
        e0 = float(vals[0])
        vec = vecs[:, 0]

    full_vec = None
    if want_vector:
        residual = np.linalg.norm(mat @ vec - e0 * vec) / np.linalg.norm(vec)
        if residual > 1e-10:
            raise ArithmeticError(f"eigenpair residual {residual:.2e} above 1e-10")
        full_vec = np.zeros(1 << n, dtype=np.complex128)
        full_vec[codes] = vec / np.linalg.norm(vec)
    return EdResult(ground_energy=e0, ground_vector=full_vec,
                    sector="jz-zero" if sector == "jz-zero" else "full")
