"""ADAM descent on the unitary parametrization, batched shots, and q-sweeps.

Reproducibility contract: every shot owns a PCG64 generator seeded with its
shot seed, shot seeds derive from a master seed as ``master ^ shot_index``,
and batch results are returned in seed order regardless of the execution
parallelism, so (seed, configs) fully determine each record.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .entropy import EntropyConfig, entropy_from_spectrum, hermitian_spectrum, von_neumann
from .objective import (
    ObjectiveConfig,
    UTParams,
    gap,
    objective_value_and_gradient,
    two_party_density,
)
from .reflect import canonical_purification
from .states import Dims, PartitionSpec, QuditState, partial_trace


@dataclass(frozen=True)
class AdamConfig:
    """Standard first/second-moment bias-corrected descent hyperparameters."""

    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    steps: int = 5000

    def __post_init__(self) -> None:
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class AdamState:
    """First and second moment accumulators."""

    m: np.ndarray
    v: np.ndarray

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(np.zeros(n), np.zeros(n))


def adam_step(
    params: np.ndarray, grad: np.ndarray, moment_state: AdamState, t: int, cfg: AdamConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected ADAM update on a real parameter vector (t >= 1)."""
    if t < 1:
        raise ValueError("step index t must be >= 1")
    if params.shape != grad.shape or params.shape != moment_state.m.shape:
        raise ValueError("parameter, gradient, and moment shapes disagree")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient in adam_step")
    m = cfg.beta1 * moment_state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * moment_state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return new_params, AdamState(m, v)


@dataclass(frozen=True)
class ShotRecord:
    """Outcome of one seeded optimization shot."""

    seed: int
    dims: tuple[int, ...]
    partition: PartitionSpec
    q_trained: float
    best_gap: float
    best_params: np.ndarray  # complex entries at the best objective
    steps_run: int
    objective_trace: np.ndarray
    failed: bool = False
    note: str = ""
    family: str = "unitary"


@dataclass(frozen=True)
class SweepRecord:
    """One (q, minimal gap) sample over a state set."""

    q: float
    min_gap: float
    argmin_state_id: str


def derive_seed(master_seed: int, shot_index: int) -> int:
    """Per-shot seed: master_seed XOR shot_index."""
    return int(master_seed) ^ int(shot_index)


def derive_seeds(master_seed: int, count: int) -> list[int]:
    return [derive_seed(master_seed, i) for i in range(count)]


def initial_params(d: int, rng: np.random.Generator) -> UTParams:
    """I.i.d. complex Gaussian entries of std 1/sqrt(d) (per complex entry)."""
    n = UTParams.num_entries(d)
    raw = rng.standard_normal(2 * n)
    return UTParams(d, (raw[0::2] + 1j * raw[1::2]) / np.sqrt(2.0 * d))


def _complex_to_real(entries: np.ndarray) -> np.ndarray:
    out = np.empty(2 * entries.shape[0])
    out[0::2] = entries.real
    out[1::2] = entries.imag
    return out


def _real_to_complex(vec: np.ndarray) -> np.ndarray:
    return vec[0::2] + 1j * vec[1::2]


ValueGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def descend(
    x0: np.ndarray,
    value_and_grad: ValueGrad,
    adam: AdamConfig,
) -> tuple[float, np.ndarray, int, list[float], bool, str]:
    """Run ADAM from x0, tracking the best objective over the whole trajectory.

    Returns (best_value, best_x, steps_run, trace, failed, note).  The
    objective is evaluated at the pre-update point of every step, so the
    trace has one entry per completed step and best_value == min(trace).
    """
    x = x0.copy()
    state = AdamState.zeros(x.shape[0])
    trace: list[float] = []
    best_value = np.inf
    best_x = x.copy()
    for t in range(1, adam.steps + 1):
        try:
            value, grad = value_and_grad(x)
        except FloatingPointError as exc:
            return best_value, best_x, t - 1, trace, True, str(exc)
        if not np.isfinite(value):
            return best_value, best_x, t - 1, trace, True, f"non-finite objective {value!r}"
        trace.append(value)
        if value < best_value:
            best_value = value
            best_x = x.copy()
        x, state = adam_step(x, grad, state, t, adam)
    return best_value, best_x, len(trace), trace, False, ""


def run_shot(cfg: ObjectiveConfig, adam: AdamConfig, seed: int) -> ShotRecord:
    """One seeded shot of the gap search; deterministic in (cfg, adam, seed)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    d = cfg.dims.total
    p0 = initial_params(d, rng)

    def vg(x: np.ndarray) -> tuple[float, np.ndarray]:
        value, grad, _ = objective_value_and_gradient(UTParams(d, _real_to_complex(x)), cfg)
        return value, grad

    best, best_x, steps_run, trace, failed, note = descend(_complex_to_real(p0.entries), vg, adam)
    return ShotRecord(
        seed=int(seed),
        dims=cfg.dims.sites,
        partition=cfg.partition,
        q_trained=cfg.q,
        best_gap=float(best),
        best_params=_real_to_complex(best_x),
        steps_run=steps_run,
        objective_trace=np.asarray(trace),
        failed=failed,
        note=note,
    )


def _shot_worker(args) -> ShotRecord:
    cfg, adam, seed = args
    try:
        return run_shot(cfg, adam, seed)
    except Exception as exc:  # record the failure, keep the batch going
        return ShotRecord(
            seed=int(seed),
            dims=cfg.dims.sites,
            partition=cfg.partition,
            q_trained=cfg.q,
            best_gap=float("inf"),
            best_params=np.zeros(UTParams.num_entries(cfg.dims.total), dtype=np.complex128),
            steps_run=0,
            objective_trace=np.zeros(0),
            failed=True,
            note=f"{type(exc).__name__}: {exc}",
        )


def run_batch(
    cfg: ObjectiveConfig,
    adam: AdamConfig,
    seeds: Sequence[int],
    parallelism: int = 1,
) -> list[ShotRecord]:
    """Independent shots for every seed, results in seed order."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds must be non-empty")
    jobs = [(cfg, adam, s) for s in seeds]
    if parallelism <= 1 or len(seeds) == 1:
        return [_shot_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_shot_worker, jobs))


# ---------------------------------------------------------------------------
# q-sweeps


class GapProfile:
    """Per-state cache turning gap(q) evaluation into a spectrum sum.

    S(AA') and the reflected-entropy spectrum do not depend on q, so a
    sweep over many q values only re-evaluates the Renyi sum.
    """

    def __init__(self, state: QuditState, partition: PartitionSpec, config: EntropyConfig):
        partition.validate_for(state.dims)
        keep = tuple(sorted(partition.a_sites + partition.ap_sites))
        self.s_aap = von_neumann(partial_trace(state, keep), config)
        pur = canonical_purification(two_party_density(state, partition))
        rho_aap = partial_trace(pur.state, (0, 2))
        self.spectrum = hermitian_spectrum(rho_aap, config.clip_eps).eigenvalues
        self.config = config

    def gap_at(self, q: float) -> float:
        return self.s_aap - 0.5 * entropy_from_spectrum(self.spectrum, float(q), self.config)


def state_gap_curve(
    state: QuditState,
    q_grid: Sequence[float],
    partition: PartitionSpec,
    config: EntropyConfig = EntropyConfig(),
) -> list[tuple[float, float]]:
    """The gap of a single state at each q on the grid (no minimization)."""
    prof = GapProfile(state, partition, config)
    return [(float(q), prof.gap_at(q)) for q in q_grid]


def sweep_min_gap(
    states: Sequence[QuditState],
    q_grid: Sequence[float],
    partition: PartitionSpec,
    config: EntropyConfig = EntropyConfig(),
    ids: Optional[Sequence[str]] = None,
) -> list[SweepRecord]:
    """At each q, the smallest gap over the state set and which state attains it."""
    if not states or not len(q_grid):
        raise ValueError("states and q_grid must be non-empty")
    if ids is None:
        ids = [f"state{i}" for i in range(len(states))]
    if len(ids) != len(states):
        raise ValueError("ids must match states")
    profiles = [GapProfile(s, partition, config) for s in states]
    out = []
    for q in q_grid:
        gaps = [prof.gap_at(q) for prof in profiles]
        k = int(np.argmin(gaps))
        out.append(SweepRecord(q=float(q), min_gap=float(gaps[k]), argmin_state_id=str(ids[k])))
    return out


def state_from_record(record: ShotRecord) -> QuditState:
    """Rebuild the state at a shot's best parameters."""
    from .objective import state_from_params

    cfg = ObjectiveConfig(Dims(record.dims), record.partition, q=record.q_trained)
    return state_from_params(UTParams(cfg.dims.total, record.best_params), cfg)
