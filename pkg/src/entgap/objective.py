"""Unitary parametrization, gap objectives, and their analytic gradients.

The search state is ``psi = exp(M - M^dag) @ chi`` where ``chi`` is the
equal superposition and ``M`` is an upper-triangular complex matrix whose
entries are the optimization variables.  The objective is

    gap = S(AA') - 1/2 * S_R^(q)(A:B)

optionally plus a hinge penalty on the maximal tripartite mutual
information.  Gradients are computed analytically by spectral calculus:
first-divided-difference (Daleckii-Krein) matrices propagate perturbations
through the matrix exponential and the density-matrix square root, and
entropy terms differentiate to spectral functions of their density
matrices.  Eigenvalue pairs closer than 1e-10 fall back to the pointwise
derivative; eigenvalues below the clipping threshold contribute nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import prod
from typing import Sequence

import numpy as np

from .entropy import DEFAULT_ENTROPY, EntropyConfig, clipped_eigenvalues, max_tmi, von_neumann
from .reflect import reflected_entropy
from .states import (
    DensityMatrix,
    Dims,
    PartitionSpec,
    QuditState,
    equal_superposition,
    partial_trace,
    permute_and_group,
)

DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class UTParams:
    """Row-major upper triangle (diagonal included) of the generator matrix M."""

    d: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        ent = np.asarray(self.entries, dtype=np.complex128).reshape(-1).copy()
        object.__setattr__(self, "entries", ent)
        want = self.d * (self.d + 1) // 2
        if ent.shape[0] != want:
            raise ValueError(f"expected {want} entries for d={self.d}, got {ent.shape[0]}")
        if not np.all(np.isfinite(ent)):
            raise ValueError("parameter entries must be finite")
        ent.setflags(write=False)

    @staticmethod
    def num_entries(d: int) -> int:
        return d * (d + 1) // 2


@dataclass(frozen=True)
class ObjectiveConfig:
    """Everything needed to evaluate the (penalized) gap of a parametrized state."""

    dims: Dims
    partition: PartitionSpec
    q: float = 1.0
    penalty_enabled: bool = False
    penalty_weight: float = 1.0
    entropy: EntropyConfig = field(default_factory=EntropyConfig)

    def __post_init__(self) -> None:
        self.partition.validate_for(self.dims)
        if self.q <= 0.0:
            raise ValueError(f"Renyi index must be positive, got {self.q!r}")
        if self.penalty_weight < 0.0:
            raise ValueError("penalty weight must be non-negative")


@lru_cache(maxsize=64)
def _ut_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(d)
    return rows, cols


def matrix_from_params(p: UTParams) -> np.ndarray:
    """Dense upper-triangular M from the packed entry vector."""
    m = np.zeros((p.d, p.d), dtype=np.complex128)
    rows, cols = _ut_indices(p.d)
    m[rows, cols] = p.entries
    return m


def _exp_antihermitian(m: np.ndarray):
    """U = exp(M - M^dag) via eigendecomposition of the Hermitian i(M - M^dag).

    Returns (U, theta, V) with H = i(M - M^dag) = V diag(theta) V^dag and
    U = V diag(exp(-i theta)) V^dag.
    """
    h = 1j * (m - m.conj().T)
    theta, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * theta)) @ v.conj().T
    return u, theta, v


def _exp_adjoint(theta: np.ndarray, v: np.ndarray, g_u: np.ndarray) -> np.ndarray:
    """Pull a gradient on U back to a Hermitian gradient on H = i(M - M^dag)."""
    diff = theta[:, None] - theta[None, :]
    ph = np.exp(-1j * theta)
    near = np.abs(diff) < DEGENERACY_TOL
    mean = 0.5 * (theta[:, None] + theta[None, :])
    num = ph[:, None] - ph[None, :]
    phi = np.where(near, -1j * np.exp(-1j * mean), num / np.where(near, 1.0, diff))
    b = v.conj().T @ g_u @ v
    g_h = v @ (b * phi.conj()) @ v.conj().T
    return 0.5 * (g_h + g_h.conj().T)


def unitary_from_params(p: UTParams) -> np.ndarray:
    """The unitary exp(M - M^dag)."""
    u, _, _ = _exp_antihermitian(matrix_from_params(p))
    return u


def state_from_params(p: UTParams, config: ObjectiveConfig) -> QuditState:
    """Apply the parametrized unitary to the equal superposition."""
    if p.d != config.dims.total:
        raise ValueError(f"parameter dimension {p.d} does not match dims {config.dims.sites}")
    u = unitary_from_params(p)
    chi = equal_superposition(config.dims).amplitudes
    return QuditState(config.dims, u @ chi)


def two_party_density(psi: QuditState, partition: PartitionSpec) -> DensityMatrix:
    """rho_AB of a four-party pure state, with A fused before B."""
    partition.validate_for(psi.dims)
    grouped = permute_and_group(
        psi,
        [
            list(partition.a_sites),
            list(partition.b_sites),
            list(partition.ap_sites),
            list(partition.bp_sites),
        ],
    )
    return partial_trace(grouped, (0, 1))


def gap(
    psi: QuditState,
    partition: PartitionSpec,
    q: float = 1.0,
    config: EntropyConfig = DEFAULT_ENTROPY,
) -> float:
    """S(AA') minus half the q-Renyi reflected entropy of rho_AB."""
    partition.validate_for(psi.dims)
    keep = tuple(sorted(partition.a_sites + partition.ap_sites))
    s_aap = von_neumann(partial_trace(psi, keep), config)
    s_r = reflected_entropy(two_party_density(psi, partition), q, config)
    return s_aap - 0.5 * s_r


def penalized_gap(
    psi: QuditState,
    partition: PartitionSpec,
    q: float = 1.0,
    config: EntropyConfig = DEFAULT_ENTROPY,
    weight: float = 1.0,
) -> float:
    """gap plus weight * max(Max(I3), 0)."""
    return gap(psi, partition, q, config) + weight * max(max_tmi(psi, partition, config), 0.0)


# ---------------------------------------------------------------------------
# analytic value-and-gradient machinery


class _Marginal:
    """Cached permutation data for one reduced density matrix of a pure state."""

    __slots__ = ("shape", "perm", "inv_perm", "dk", "dr")

    def __init__(self, sites: Sequence[int], keep_order: Sequence[int]):
        n = len(sites)
        rest = [i for i in range(n) if i not in set(keep_order)]
        self.shape = tuple(sites)
        self.perm = list(keep_order) + rest
        self.inv_perm = list(np.argsort(self.perm))
        self.dk = prod(sites[i] for i in keep_order)
        self.dr = prod(sites[i] for i in rest) if rest else 1

    def forward(self, amps: np.ndarray):
        t = amps.reshape(self.shape).transpose(self.perm).reshape(self.dk, self.dr)
        return t @ t.conj().T, t

    def backward(self, g_rho: np.ndarray, t: np.ndarray) -> np.ndarray:
        # d f = Re tr(G^dag d rho) with Hermitian G gives G_T = 2 G T
        g_t = 2.0 * (g_rho @ t)
        shp = tuple(self.shape[i] for i in self.perm)
        return g_t.reshape(shp).transpose(self.inv_perm).reshape(-1)


def _entropy_grad_diag(vals: np.ndarray, q: float, clip_eps: float, log_div: float):
    """Entropy value and d(entropy)/d(eigenvalue), on a raw eigh spectrum.

    Clipped eigenvalues (|v| < clip_eps, plus roundoff negatives) carry zero
    derivative, consistent with their exclusion from the entropy sum.
    """
    clipped = clipped_eigenvalues(vals, clip_eps)
    pos = clipped > 0.0
    g = np.zeros_like(clipped)
    if not np.any(pos):
        return 0.0, g
    lam = clipped[pos]
    if q == 1.0:
        value = float(-np.sum(lam * np.log(lam)))
        g[pos] = -np.log(lam) - 1.0
    else:
        s = float(np.sum(lam**q))
        value = float(np.log(s) / (1.0 - q))
        g[pos] = (q / (1.0 - q)) * lam ** (q - 1.0) / s
    return value / log_div, g / log_div


def _sqrt_dk_matrix(vals: np.ndarray, clip_eps: float) -> np.ndarray:
    """Daleckii-Krein first-divided-difference matrix for the matrix square root.

    Eigenvalue pairs closer than the degeneracy tolerance use f'(mean);
    pairs inside the clipped kernel get 0 (their perturbation block vanishes
    to first order for reduced densities of pure states, since rho = T T^dag).
    """
    lam = np.clip(vals, 0.0, None)
    root = np.sqrt(lam)
    diff = lam[:, None] - lam[None, :]
    near = np.abs(diff) < DEGENERACY_TOL
    mean = 0.5 * (lam[:, None] + lam[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(near, 0.0, (root[:, None] - root[None, :]) / np.where(near, 1.0, diff))
        deriv = np.where(mean > clip_eps, 0.5 / np.sqrt(np.where(mean > 0, mean, 1.0)), 0.0)
    return np.where(near, deriv, k)


class _StateObjective:
    """Value and state-space gradient of the (penalized) gap for one config.

    Instances cache every site permutation needed for the marginals, so a
    single object can be reused across thousands of optimizer steps.
    """

    def __init__(self, config: ObjectiveConfig):
        config.partition.validate_for(config.dims)
        self.config = config
        sites = config.dims.sites
        part = config.partition
        self.q = float(config.q)
        self.clip = config.entropy.clip_eps
        self.log_div = config.entropy.log_divisor

        self.marg_aap = _Marginal(sites, sorted(part.a_sites + part.ap_sites))
        self.marg_ab = _Marginal(sites, list(part.a_sites) + list(part.b_sites))
        self.d_ab = self.marg_ab.dk
        da = prod(sites[i] for i in part.a_sites)
        db = prod(sites[i] for i in part.b_sites)
        pdims = (da, db, da, db)
        self.marg_ref = _Marginal(pdims, (0, 2))

        self.penalty = bool(config.penalty_enabled)
        self.weight = float(config.penalty_weight)
        if self.penalty:
            parties = (part.a_sites, part.b_sites, part.ap_sites, part.bp_sites)
            self.triples = list(combinations(range(4), 3))
            subsets: dict[tuple[int, ...], _Marginal] = {}
            self.triple_terms = []
            for tri in self.triples:
                # I3 = sum singles - sum pairs + triple, all von Neumann
                terms = []
                for r, sign in [(1, 1.0), (2, -1.0), (3, 1.0)]:
                    for comb in combinations(tri, r):
                        key = tuple(sorted(i for p in comb for i in parties[p]))
                        if key not in subsets:
                            subsets[key] = _Marginal(sites, key)
                        terms.append((key, sign))
                self.triple_terms.append(terms)
            self.subsets = subsets

    def __call__(self, amps: np.ndarray, want_grad: bool = True):
        """Return (value, grad_wrt_amps or None, extras dict)."""
        q, clip, log_div = self.q, self.clip, self.log_div

        rho1, t1 = self.marg_aap.forward(amps)
        lam1, w1 = np.linalg.eigh(rho1)
        s_aap, g1 = _entropy_grad_diag(lam1, 1.0, clip, log_div)

        rho_ab, t_ab = self.marg_ab.forward(amps)
        mu, vr = np.linalg.eigh(rho_ab)
        if float(mu.min()) < -1e-8:
            raise FloatingPointError(f"rho_AB lost positivity: min eigenvalue {mu.min()!r}")
        # sub-clip eigenvalues are structural zeros of the rank-deficient
        # marginal; rooting them would inject sqrt(roundoff) noise
        root = np.where(mu >= clip, np.sqrt(np.clip(mu, 0.0, None)), 0.0)
        x = (vr * root) @ vr.conj().T
        phi = x.reshape(-1)

        rho2, t2 = self.marg_ref.forward(phi)
        lam2, w2 = np.linalg.eigh(rho2)
        s_ref, g2 = _entropy_grad_diag(lam2, q, clip, log_div)

        gap_value = s_aap - 0.5 * s_ref
        value = gap_value
        extras = {"gap": gap_value, "s_aap": s_aap, "s_reflected": s_ref}

        pen_cache = None
        if self.penalty:
            ent: dict[tuple[int, ...], tuple[float, np.ndarray, np.ndarray, np.ndarray]] = {}
            for key, marg in self.subsets.items():
                rho_s, t_s = marg.forward(amps)
                lam_s, w_s = np.linalg.eigh(rho_s)
                s_val, g_s = _entropy_grad_diag(lam_s, 1.0, clip, log_div)
                ent[key] = (s_val, g_s, w_s, t_s)
            i3 = [sum(sign * ent[key][0] for key, sign in terms) for terms in self.triple_terms]
            best = int(np.argmax(i3))
            m_i3 = i3[best]
            extras["max_tmi"] = m_i3
            if m_i3 > 0.0:
                value = value + self.weight * m_i3
                pen_cache = (best, ent)

        if not np.isfinite(value):
            raise FloatingPointError(f"objective is not finite: {value!r}")
        if not want_grad:
            return value, None, extras

        g_rho1 = (w1 * g1) @ w1.conj().T
        g_psi = self.marg_aap.backward(g_rho1, t1)

        g_rho2 = (w2 * (-0.5 * g2)) @ w2.conj().T
        g_phi = self.marg_ref.backward(g_rho2, t2)
        g_x = g_phi.reshape(self.d_ab, self.d_ab)
        g_x = 0.5 * (g_x + g_x.conj().T)
        k = _sqrt_dk_matrix(mu, clip)
        g_rho_ab = vr @ ((vr.conj().T @ g_x @ vr) * k) @ vr.conj().T
        g_psi = g_psi + self.marg_ab.backward(g_rho_ab, t_ab)

        if pen_cache is not None:
            best, ent = pen_cache
            for key, sign in self.triple_terms[best]:
                _, g_s, w_s, t_s = ent[key]
                g_rho_s = (w_s * (self.weight * sign * g_s)) @ w_s.conj().T
                g_psi = g_psi + self.subsets[key].backward(g_rho_s, t_s)

        if not np.all(np.isfinite(g_psi)):
            raise FloatingPointError("state-space gradient is not finite")
        return value, g_psi, extras


@lru_cache(maxsize=32)
def _cached_state_objective(config: ObjectiveConfig) -> _StateObjective:
    return _StateObjective(config)


def _chi(dims: Dims) -> np.ndarray:
    return equal_superposition(dims).amplitudes


def objective_value(p: UTParams, config: ObjectiveConfig) -> float:
    """The optimized objective: gap, or penalized gap when the penalty is on."""
    value, _, _ = objective_value_and_gradient(p, config, want_grad=False)
    return value


def objective_value_and_gradient(
    p: UTParams, config: ObjectiveConfig, want_grad: bool = True
):
    """Objective value, its gradient, and diagnostic extras.

    The gradient is a real vector of length d(d+1): interleaved
    (d/dRe, d/dIm) pairs for each upper-triangular entry of M in row-major
    order.  Raises FloatingPointError on non-finite intermediates.
    """
    if p.d != config.dims.total:
        raise ValueError(f"parameter dimension {p.d} does not match dims {config.dims.sites}")
    obj = _cached_state_objective(config)
    m = matrix_from_params(p)
    u, theta, v = _exp_antihermitian(m)
    chi = _chi(config.dims)
    psi = u @ chi
    value, g_psi, extras = obj(psi, want_grad=want_grad)
    if not want_grad:
        return value, None, extras
    g_u = np.outer(g_psi, chi.conj())
    g_h = _exp_adjoint(theta, v, g_u)
    rows, cols = _ut_indices(p.d)
    g_entries = -2j * g_h[rows, cols]
    grad = np.empty(2 * g_entries.shape[0], dtype=np.float64)
    grad[0::2] = g_entries.real
    grad[1::2] = g_entries.imag
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("parameter gradient is not finite")
    return value, grad, extras


def objective_gradient(p: UTParams, config: ObjectiveConfig) -> np.ndarray:
    """Analytic gradient of the (penalized) gap objective; see above for layout."""
    _, grad, _ = objective_value_and_gradient(p, config)
    return grad
