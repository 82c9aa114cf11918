"""Complex RBM wavefunction: parameters, log-amplitudes, ratios, log-derivatives.

The ansatz over spin configurations x in {-1,+1}^N, after tracing out the
hidden layer analytically, is

    psi(x) = exp(a . x) * prod_j 2 cosh(chi_j(x)),
    chi_j(x) = b_j + sum_i w[i, j] * x_i,

with complex visible biases a (length N), hidden biases b (length M) and
weights w (N x M). Spins are encoded as +-1 so that the log-derivative with
respect to a_i is exactly the spin value x_i.

The canonical flattening order of the parameter vector is (a, b, vec(w))
with w flattened row-major ((i, j) -> i * M + j). This order is part of the
public contract: the block structure of the quantum Fisher matrix and the
eigenvector entanglement measure both depend on it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularAmplitude

#: accepted incremental updates between from-scratch resynchronizations of
#: cached effective angles; bounds floating-point drift at negligible cost
RESYNC_INTERVAL = 1000

#: |2 cosh chi| below this is treated as an exact zero of the amplitude
COSH_ZERO_TOL = 1e-300

#: |2 cosh chi| below this makes tanh(chi) numerically meaningless
TANH_POLE_TOL = 1e-12


def log2cosh(z):
    """log(2 cosh z) for complex z, stable against overflow for large |Re z|.

    Uses log(2 cosh z) = z + log(1 + exp(-2z)) for Re z >= 0 and the mirrored
    form otherwise. Where cosh z vanishes to double precision the real part
    of the result is -inf instead of raising, so bulk callers can treat the
    corresponding amplitudes as exact zeros.
    """
    z = np.asarray(z, dtype=np.complex128)
    zp = np.where(z.real < 0.0, -z, z)
    u = np.exp(-2.0 * zp)
    one_plus = 1.0 + u
    with np.errstate(divide="ignore", invalid="ignore"):
        out = zp + np.log(one_plus)
    bad = np.abs(one_plus) < COSH_ZERO_TOL
    if np.any(bad):
        out = np.where(bad, complex(-np.inf, 0.0), out)
    return out


@dataclass
class RbmParams:
    """Complex RBM parameters (visible bias a, hidden bias b, weights w)."""

    a: np.ndarray
    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.a = np.ascontiguousarray(self.a, dtype=np.complex128)
        self.b = np.ascontiguousarray(self.b, dtype=np.complex128)
        self.w = np.ascontiguousarray(self.w, dtype=np.complex128)
        if self.a.ndim != 1 or self.b.ndim != 1 or self.w.ndim != 2:
            raise ValueError("a and b must be vectors and w a matrix")
        if self.w.shape != (self.a.size, self.b.size):
            raise ValueError(
                f"weight shape {self.w.shape} inconsistent with biases "
                f"({self.a.size}, {self.b.size})"
            )

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    @property
    def dim(self) -> int:
        """Total parameter count N + M + N*M."""
        return self.a.size + self.b.size + self.w.size

    def flatten(self) -> np.ndarray:
        """Concatenate (a, b, vec(w)) in the canonical order."""
        return np.concatenate([self.a, self.b, self.w.reshape(-1)])

    @classmethod
    def unflatten(cls, vec, n_visible: int, n_hidden: int) -> "RbmParams":
        vec = np.asarray(vec, dtype=np.complex128)
        if vec.size != n_visible + n_hidden + n_visible * n_hidden:
            raise ValueError("flat vector length inconsistent with (N, M)")
        a = vec[:n_visible]
        b = vec[n_visible:n_visible + n_hidden]
        w = vec[n_visible + n_hidden:].reshape(n_visible, n_hidden)
        return cls(a=a.copy(), b=b.copy(), w=w.copy())

    def copy(self) -> "RbmParams":
        return RbmParams(a=self.a.copy(), b=self.b.copy(), w=self.w.copy())


def init_random(n_visible: int, n_hidden: int, sigma: float, seed) -> RbmParams:
    """Gaussian initialization; real and imaginary parts drawn independently.

    Every parameter gets N(0, sigma^2) noise on both its real and imaginary
    part. Deterministic for a given seed.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)

    def draw(*shape):
        return rng.normal(0.0, sigma, size=shape) + 1j * rng.normal(0.0, sigma, size=shape)

    return RbmParams(
        a=draw(n_visible),
        b=draw(n_hidden),
        w=draw(n_visible, n_hidden),
    )


def _check_spins(spins) -> np.ndarray:
    spins = np.asarray(spins)
    if not np.all(np.abs(spins) == 1):
        raise ValueError("spin configurations must contain only +1 and -1")
    return spins.astype(np.int8)


def log_psi(spins, params: RbmParams) -> complex:
    """Log-amplitude a.x + sum_j log(2 cosh chi_j(x)), principal branches.

    Raises SingularAmplitude when the amplitude is exactly zero.
    """
    x = np.asarray(spins, dtype=np.float64)
    if x.size != params.n_visible:
        raise ValueError("configuration length does not match parameter count")
    chi = params.b + x @ params.w
    terms = log2cosh(chi)
    if not np.all(np.isfinite(terms.real)):
        raise SingularAmplitude("amplitude is exactly zero (cosh chi vanished)")
    return complex(params.a @ x + terms.sum())


@dataclass
class LookupState:
    """Cached effective angles chi_j(x) for one configuration.

    Enables O(M)-per-flip Metropolis ratios. The cached log(2 cosh chi)
    values are kept alongside chi so ratio evaluations reuse them. The
    cache is rebuilt from scratch every RESYNC_INTERVAL accepted updates.
    """

    spins: np.ndarray
    chi: np.ndarray
    log2cosh_chi: np.ndarray = field(repr=False, default=None)
    updates_since_sync: int = 0

    def __post_init__(self):
        if self.log2cosh_chi is None:
            self.log2cosh_chi = log2cosh(self.chi)

    def log_psi(self, params: RbmParams) -> complex:
        """Log-amplitude of the stored configuration from the cache."""
        return complex(
            params.a @ self.spins.astype(np.float64) + self.log2cosh_chi.sum()
        )

    def resync(self, params: RbmParams) -> None:
        """Recompute chi from scratch for the stored configuration."""
        x = self.spins.astype(np.float64)
        self.chi = params.b + x @ params.w
        self.log2cosh_chi = log2cosh(self.chi)
        self.updates_since_sync = 0


def lookup_state(spins, params: RbmParams) -> LookupState:
    """Build a synchronized LookupState for a configuration."""
    x = _check_spins(spins)
    if x.size != params.n_visible:
        raise ValueError("configuration length does not match parameter count")
    chi = params.b + x.astype(np.float64) @ params.w
    return LookupState(spins=x.copy(), chi=chi)


def _flip_delta(lookup: LookupState, flips, params: RbmParams):
    """(delta chi, delta visible-term) for flipping the given sites."""
    idx = np.fromiter(flips, dtype=np.intp)
    if idx.size == 0:
        return np.zeros_like(lookup.chi), 0.0 + 0.0j
    xf = lookup.spins[idx].astype(np.float64)
    dchi = -2.0 * (xf @ params.w[idx])
    dvis = -2.0 * (params.a[idx] @ xf)
    return dchi, dvis


def _log_psi_ratio_raw(lookup: LookupState, flips, params: RbmParams) -> complex:
    """Ratio of log-amplitudes; real part -inf when the target amplitude is 0.

    Internal tolerant variant: samplers use it to reject moves into
    zero-amplitude states (exp(-inf) = 0) and local-energy sums use it to
    drop zero-amplitude contributions.
    """
    dchi, dvis = _flip_delta(lookup, flips, params)
    new_l2c = log2cosh(lookup.chi + dchi)
    return complex(dvis + new_l2c.sum() - lookup.log2cosh_chi.sum())


def log_psi_ratio(lookup: LookupState, flips, params: RbmParams) -> complex:
    """log psi(x') - log psi(x) where x' flips the given sites; O(|flips| M).

    Raises SingularAmplitude when the flipped configuration has exactly zero
    amplitude.
    """
    out = _log_psi_ratio_raw(lookup, flips, params)
    if not np.isfinite(out.real):
        raise SingularAmplitude("flipped configuration has zero amplitude")
    return out


def apply_flips(lookup: LookupState, flips, params: RbmParams) -> LookupState:
    """Flip sites in place, updating chi incrementally; returns the lookup."""
    idx = np.fromiter(flips, dtype=np.intp)
    if idx.size:
        dchi, _ = _flip_delta(lookup, idx, params)
        lookup.chi = lookup.chi + dchi
        lookup.spins[idx] = -lookup.spins[idx]
        lookup.updates_since_sync += 1
        if lookup.updates_since_sync >= RESYNC_INTERVAL:
            lookup.resync(params)
        else:
            lookup.log2cosh_chi = log2cosh(lookup.chi)
    return lookup


def o_vector(lookup: LookupState, params: RbmParams) -> np.ndarray:
    """Log-derivative vector O(x) = (x, tanh chi, x (x) tanh chi), length D.

    The weight block satisfies O_w[i*M + j] = x_i * O_b[j] exactly. Raises
    SingularAmplitude at tanh poles (cosh chi numerically zero).
    """
    if np.any(np.abs(2.0 * np.cosh(lookup.chi)) < TANH_POLE_TOL):
        raise SingularAmplitude("tanh pole: cosh chi is numerically zero")
    x = lookup.spins.astype(np.float64)
    t = np.tanh(lookup.chi)
    return np.concatenate([x.astype(np.complex128), t, np.outer(x, t).reshape(-1)])


# -- checkpoint I/O ----------------------------------------------------------
#
# Checkpoints are JSON documents with parameter blocks stored as [real, imag]
# pairs. Python's shortest round-trip float repr makes the round trip
# bit-exact.

def _complex_block(arr: np.ndarray):
    return [[float(z.real), float(z.imag)] for z in arr.reshape(-1)]


def _block_complex(pairs, shape) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)
    return flat.reshape(shape)


def save_checkpoint(path, params: RbmParams, epoch: int = 0, seed=0) -> None:
    doc = {
        "format": "rbmvmc-checkpoint-v1",
        "n_visible": params.n_visible,
        "n_hidden": params.n_hidden,
        "epoch": int(epoch),
        "seed": int(seed) if seed is not None else None,
        "a": _complex_block(params.a),
        "b": _complex_block(params.b),
        "w": _complex_block(params.w),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
        f.write("\n")


def load_checkpoint(path):
    """Returns (params, epoch, seed); raises ValueError on malformed files."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    try:
        n, m = int(doc["n_visible"]), int(doc["n_hidden"])
        params = RbmParams(
            a=_block_complex(doc["a"], (n,)),
            b=_block_complex(doc["b"], (m,)),
            w=_block_complex(doc["w"], (n, m)),
        )
        return params, int(doc["epoch"]), doc.get("seed")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed checkpoint {path}: {exc}") from exc
