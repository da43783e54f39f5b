"""Spectra, von Neumann / Renyi entropies, and (tripartite) mutual information.

All entropies are reported in the base selected by :class:`EntropyConfig`
(natural log by default).  Eigenvalues with magnitude below ``clip_eps``
are set to zero and excluded from every sum; the spectrum is never
renormalized afterwards.  Negative eigenvalues are tolerated down to
-1e-10 (partial-trace roundoff) and clipped here, not upstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence, Union

import numpy as np

from .states import DensityMatrix, PartitionSpec, QuditState, partial_trace

PSD_ATOL = 1e-10
HERM_CHECK_ATOL = 1e-8
TRACE_SUM_ATOL = 1e-9


@dataclass(frozen=True)
class EntropyConfig:
    """Logarithm base and eigenvalue clipping threshold."""

    log_base: str = "e"  # "e" (nats) or "2" (bits)
    clip_eps: float = 1e-12

    def __post_init__(self) -> None:
        if self.log_base not in ("e", "2"):
            raise ValueError(f"log_base must be 'e' or '2', got {self.log_base!r}")
        if not 0.0 < self.clip_eps <= 1e-6:
            raise ValueError(f"clip_eps must lie in (0, 1e-6], got {self.clip_eps!r}")

    @property
    def log_divisor(self) -> float:
        """Entropies in nats are divided by this to reach the configured base."""
        return 1.0 if self.log_base == "e" else math.log(2.0)


DEFAULT_ENTROPY = EntropyConfig()


@dataclass(frozen=True)
class Spectrum:
    """Descending, clipped eigenvalues of a density matrix."""

    eigenvalues: np.ndarray
    clip_eps: float

    def __post_init__(self) -> None:
        vals = np.asarray(self.eigenvalues, dtype=np.float64).copy()
        vals.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)


def clipped_eigenvalues(vals: np.ndarray, clip_eps: float) -> np.ndarray:
    """Apply the clipping rule to raw eigenvalues of a density matrix.

    Values in (-clip_eps, clip_eps) become 0; residual negatives down to
    -1e-10 are roundoff and become 0 as well; anything below -1e-10 is a
    genuine positivity violation and raises.
    """
    vals = np.asarray(vals, dtype=np.float64)
    if vals.size and float(vals.min()) < -PSD_ATOL:
        raise ValueError(f"matrix is not positive semidefinite: min eigenvalue {vals.min()!r}")
    out = vals.copy()
    out[np.abs(out) < clip_eps] = 0.0
    out[out < 0.0] = 0.0
    return out


def hermitian_spectrum(
    rho: Union[DensityMatrix, np.ndarray], clip_eps: float = DEFAULT_ENTROPY.clip_eps
) -> Spectrum:
    """Descending eigenvalues of a Hermitian unit-trace matrix, clipped.

    Raises if the input deviates from Hermiticity by more than 1e-8, if its
    eigenvalues violate positivity beyond -1e-10, or if the raw spectrum
    does not sum to 1 within 1e-9.
    """
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    if np.max(np.abs(mat - mat.conj().T)) > HERM_CHECK_ATOL:
        raise ValueError("matrix is not Hermitian within tolerance")
    vals = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
    if abs(float(vals.sum()) - 1.0) > TRACE_SUM_ATOL:
        raise ValueError(f"spectrum sums to {vals.sum()!r}, expected 1")
    out = clipped_eigenvalues(vals, clip_eps)
    return Spectrum(out[::-1], clip_eps)


def entropy_from_spectrum(vals: np.ndarray, q: float, config: EntropyConfig) -> float:
    """Renyi-q entropy of an already-clipped spectrum (q=1 -> von Neumann)."""
    if q <= 0.0:
        raise ValueError(f"Renyi index must be positive, got {q!r}")
    pos = vals[vals > 0.0]
    if pos.size == 0:
        return 0.0
    if q == 1.0:
        s = float(-np.sum(pos * np.log(pos)))
    else:
        s = float(np.log(np.sum(pos**q)) / (1.0 - q))
    return s / config.log_divisor


def von_neumann(rho: DensityMatrix, config: EntropyConfig = DEFAULT_ENTROPY) -> float:
    """Von Neumann entropy -sum(p log p) over the clipped spectrum."""
    spec = hermitian_spectrum(rho, config.clip_eps)
    return entropy_from_spectrum(spec.eigenvalues, 1.0, config)


def renyi(rho: DensityMatrix, q: float, config: EntropyConfig = DEFAULT_ENTROPY) -> float:
    """Renyi-q entropy log(sum p^q)/(1-q); dispatches to von Neumann at q == 1."""
    spec = hermitian_spectrum(rho, config.clip_eps)
    return entropy_from_spectrum(spec.eigenvalues, float(q), config)


def _marginal_entropy(
    psi: QuditState, sites: Sequence[int], config: EntropyConfig
) -> float:
    return von_neumann(partial_trace(psi, sorted(sites)), config)


def mutual_info(
    psi: QuditState,
    x_sites: Sequence[int],
    y_sites: Sequence[int],
    config: EntropyConfig = DEFAULT_ENTROPY,
) -> float:
    """Bipartite mutual information S(X) + S(Y) - S(XY) of a pure state."""
    x, y = tuple(x_sites), tuple(y_sites)
    if set(x) & set(y):
        raise ValueError(f"regions overlap: {x} and {y}")
    return (
        _marginal_entropy(psi, x, config)
        + _marginal_entropy(psi, y, config)
        - _marginal_entropy(psi, x + y, config)
    )


def tmi(
    psi: QuditState,
    x_sites: Sequence[int],
    y_sites: Sequence[int],
    z_sites: Sequence[int],
    config: EntropyConfig = DEFAULT_ENTROPY,
) -> float:
    """Tripartite mutual information I2(X:Y) + I2(Y:Z) - I2(Y:XZ)."""
    x, y, z = tuple(x_sites), tuple(y_sites), tuple(z_sites)
    if set(x) & set(y) or set(y) & set(z) or set(x) & set(z):
        raise ValueError(f"regions overlap: {x}, {y}, {z}")
    return (
        mutual_info(psi, x, y, config)
        + mutual_info(psi, y, z, config)
        - mutual_info(psi, y, x + z, config)
    )


def max_tmi(
    psi: QuditState, partition: PartitionSpec, config: EntropyConfig = DEFAULT_ENTROPY
) -> float:
    """Maximum tripartite mutual information over the four 3-party subsets."""
    partition.validate_for(psi.dims)
    parties = (
        partition.a_sites,
        partition.b_sites,
        partition.ap_sites,
        partition.bp_sites,
    )
    return max(tmi(psi, *triple, config) for triple in combinations(parties, 3))
