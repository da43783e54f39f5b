"""Parametrized binary MERA states on 8 and 16 qubits.

Circuit family (open boundary, top-down): the register starts as |00> and
one top unitary acts on it; each subsequent layer doubles the register by
inserting a fresh |0> to the right of every qubit, applies an
isometry-generating two-qubit unitary to each (old, fresh) pair, then
disentanglers across every adjacent pair straddling sibling branches.
Every gate is exp(M - M^dag) of an upper-triangular 4x4 generator (10
complex entries), so an all-zero parameter vector gives |0...0>.

Reduced density matrices are always contracted straight from the state
vector (see ``states.reduced_density_vector``); a 2^16 x 2^16 operator is
never materialized.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .objective import (
    ObjectiveConfig,
    UTParams,
    _cached_state_objective,
    _exp_adjoint,
    _exp_antihermitian,
    matrix_from_params,
)
from .optimize import AdamConfig, ShotRecord, descend
from .states import Dims, PartitionSpec, QuditState

GATE_DIM = 4
ENTRIES_PER_GATE = GATE_DIM * (GATE_DIM + 1) // 2  # 10


@dataclass(frozen=True)
class MeraLayout:
    """Gate schedule of the binary MERA circuit for a given qubit count."""

    num_qubits: int
    layers: int
    ops: tuple[tuple, ...]  # ("embed", width) | ("gate", width, pos, kind)

    @property
    def num_gates(self) -> int:
        return sum(1 for op in self.ops if op[0] == "gate")

    @property
    def num_entries(self) -> int:
        return self.num_gates * ENTRIES_PER_GATE


def mera_layout(num_qubits: int) -> MeraLayout:
    """Build the op schedule; 8 qubits -> 3 layers / 11 gates, 16 -> 4 / 26."""
    if num_qubits not in (8, 16):
        raise ValueError(f"supported qubit counts are 8 and 16, got {num_qubits}")
    ops: list[tuple] = [("gate", 2, 0, "top")]
    width = 2
    layers = 1
    while width < num_qubits:
        ops.append(("embed", width))
        width *= 2
        layers += 1
        for i in range(width // 2):
            ops.append(("gate", width, 2 * i, "isometry"))
        for i in range(width // 2 - 1):
            ops.append(("gate", width, 2 * i + 1, "disentangler"))
    return MeraLayout(num_qubits=num_qubits, layers=layers, ops=tuple(ops))


@dataclass(frozen=True)
class MeraParams:
    """One packed 10-entry generator vector per gate, in schedule order."""

    entries: np.ndarray  # complex, shape (num_gates, 10)

    def __post_init__(self) -> None:
        ent = np.asarray(self.entries, dtype=np.complex128).copy()
        if ent.ndim != 2 or ent.shape[1] != ENTRIES_PER_GATE:
            raise ValueError(f"expected shape (num_gates, {ENTRIES_PER_GATE}), got {ent.shape}")
        if not np.all(np.isfinite(ent)):
            raise ValueError("gate parameters must be finite")
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @property
    def num_gates(self) -> int:
        return self.entries.shape[0]


def default_mera_partition(num_qubits: int) -> PartitionSpec:
    """Four contiguous equal blocks (A, B, A', B') along the qubit line."""
    w = num_qubits // 4
    blocks = [tuple(range(i * w, (i + 1) * w)) for i in range(4)]
    return PartitionSpec(*blocks)


def mera_objective_config(num_qubits: int, q: float = 1.0, **kwargs) -> ObjectiveConfig:
    dims = Dims((2,) * num_qubits)
    return ObjectiveConfig(dims, default_mera_partition(num_qubits), q=q, **kwargs)


def _apply_gate(amps: np.ndarray, u: np.ndarray, width: int, pos: int) -> np.ndarray:
    t = amps.reshape(2**pos, GATE_DIM, -1)
    return np.einsum("ab,ibj->iaj", u, t).reshape(-1)


def _embed_fresh(amps: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((2,) * (2 * width), dtype=np.complex128)
    idx = tuple(x for _ in range(width) for x in (slice(None), 0))
    out[idx] = amps.reshape((2,) * width)
    return out.reshape(-1)


def _gate_unitaries(layout: MeraLayout, params: MeraParams):
    if params.num_gates != layout.num_gates:
        raise ValueError(
            f"layout has {layout.num_gates} gates, parameters carry {params.num_gates}"
        )
    out = []
    for row in params.entries:
        u, theta, v = _exp_antihermitian(matrix_from_params(UTParams(GATE_DIM, row)))
        out.append((u, theta, v))
    return out


def mera_state(layout: MeraLayout, params: MeraParams) -> QuditState:
    """Run the circuit on |0...0>; all-identity gates return |0...0> itself."""
    amps = _run_circuit(layout, _gate_unitaries(layout, params))
    return QuditState(Dims((2,) * layout.num_qubits), amps)


def _run_circuit(layout: MeraLayout, gates, record=None) -> np.ndarray:
    amps = np.zeros(4, dtype=np.complex128)
    amps[0] = 1.0
    g = 0
    for op in layout.ops:
        if record is not None:
            record.append(amps)
        if op[0] == "embed":
            amps = _embed_fresh(amps, op[1])
        else:
            _, width, pos, _ = op
            amps = _apply_gate(amps, gates[g][0], width, pos)
            g += 1
    return amps


def _circuit_grad(layout: MeraLayout, gates, cotangent: np.ndarray, inputs) -> np.ndarray:
    """Backpropagate a state-space gradient through the circuit.

    ``inputs`` holds the state before each op (as recorded by _run_circuit).
    Returns the complex gradient array over gate entries, shape
    (num_gates, 10), in the df = Re(sum conj(G) dz) convention.
    """
    g_entries = np.zeros((layout.num_gates, ENTRIES_PER_GATE), dtype=np.complex128)
    rows, cols = np.triu_indices(GATE_DIM)
    c = cotangent
    g = layout.num_gates - 1
    for k in range(len(layout.ops) - 1, -1, -1):
        op = layout.ops[k]
        before = inputs[k]
        if op[0] == "embed":
            width = op[1]
            idx = tuple(x for _ in range(width) for x in (slice(None), 0))
            c = c.reshape((2,) * (2 * width))[idx].reshape(-1)
        else:
            _, width, pos, _ = op
            u, theta, v = gates[g]
            tb = before.reshape(2**pos, GATE_DIM, -1)
            tc = c.reshape(2**pos, GATE_DIM, -1)
            g_u = np.einsum("iaj,ibj->ab", tc, tb.conj())
            g_h = _exp_adjoint(theta, v, g_u)
            g_entries[g] = -2j * g_h[rows, cols]
            # cotangent through the gate: c_before = U^dag c_after
            c = np.einsum("ab,iaj->ibj", u.conj(), tc).reshape(-1)
            g -= 1
    return g_entries


def _flatten(params: MeraParams) -> np.ndarray:
    ent = params.entries.reshape(-1)
    out = np.empty(2 * ent.shape[0])
    out[0::2] = ent.real
    out[1::2] = ent.imag
    return out


def _unflatten(vec: np.ndarray, num_gates: int) -> MeraParams:
    ent = vec[0::2] + 1j * vec[1::2]
    return MeraParams(ent.reshape(num_gates, ENTRIES_PER_GATE))


def mera_objective_value(layout: MeraLayout, params: MeraParams, cfg: ObjectiveConfig) -> float:
    obj = _cached_state_objective(cfg)
    value, _, _ = obj(mera_state(layout, params).amplitudes, want_grad=False)
    return value


def mera_value_and_gradient(
    layout: MeraLayout,
    params: MeraParams,
    cfg: ObjectiveConfig,
    gradient: str = "fd",
    fd_step: float = 1e-6,
):
    """Objective value and real gradient over flattened gate parameters.

    ``gradient="fd"`` uses central finite differences over every real
    component (the default); ``"analytic"`` backpropagates through the
    circuit and matches the finite-difference oracle to tolerance.
    """
    obj = _cached_state_objective(cfg)
    if gradient == "analytic":
        gates = _gate_unitaries(layout, params)
        inputs: list[np.ndarray] = []
        amps = _run_circuit(layout, gates, record=inputs)
        value, g_psi, _ = obj(amps)
        g_entries = _circuit_grad(layout, gates, g_psi, inputs)
        flat = g_entries.reshape(-1)
        grad = np.empty(2 * flat.shape[0])
        grad[0::2] = flat.real
        grad[1::2] = flat.imag
        return value, grad
    if gradient != "fd":
        raise ValueError(f"gradient must be 'fd' or 'analytic', got {gradient!r}")
    x = _flatten(params)
    value = mera_objective_value(layout, params, cfg)
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        xp = x.copy()
        xp[i] += fd_step
        vp = mera_objective_value(layout, _unflatten(xp, params.num_gates), cfg)
        xp[i] -= 2.0 * fd_step
        vm = mera_objective_value(layout, _unflatten(xp, params.num_gates), cfg)
        grad[i] = (vp - vm) / (2.0 * fd_step)
    return value, grad


def initial_mera_params(layout: MeraLayout, rng: np.random.Generator) -> MeraParams:
    """Per-gate i.i.d. complex Gaussian entries of std 1/sqrt(4)."""
    n = layout.num_entries
    raw = rng.standard_normal(2 * n)
    ent = (raw[0::2] + 1j * raw[1::2]) / np.sqrt(2.0 * GATE_DIM)
    return MeraParams(ent.reshape(layout.num_gates, ENTRIES_PER_GATE))


def run_mera_shot(
    layout: MeraLayout,
    cfg: ObjectiveConfig,
    adam: AdamConfig,
    seed: int,
    gradient: str = "fd",
) -> ShotRecord:
    """One seeded MERA search shot; the protocol mirrors optimize.run_shot."""
    rng = np.random.Generator(np.random.PCG64(seed))
    p0 = initial_mera_params(layout, rng)

    def vg(x: np.ndarray):
        return mera_value_and_gradient(layout, _unflatten(x, layout.num_gates), cfg, gradient)

    best, best_x, steps_run, trace, failed, note = descend(_flatten(p0), vg, adam)
    return ShotRecord(
        seed=int(seed),
        dims=cfg.dims.sites,
        partition=cfg.partition,
        q_trained=cfg.q,
        best_gap=float(best),
        best_params=best_x[0::2] + 1j * best_x[1::2],
        steps_run=steps_run,
        objective_trace=np.asarray(trace),
        failed=failed,
        note=note,
        family="mera",
    )


def _mera_worker(args) -> ShotRecord:
    layout, cfg, adam, seed, gradient = args
    try:
        return run_mera_shot(layout, cfg, adam, seed, gradient)
    except Exception as exc:
        return ShotRecord(
            seed=int(seed),
            dims=cfg.dims.sites,
            partition=cfg.partition,
            q_trained=cfg.q,
            best_gap=float("inf"),
            best_params=np.zeros(layout.num_entries, dtype=np.complex128),
            steps_run=0,
            objective_trace=np.zeros(0),
            failed=True,
            note=f"{type(exc).__name__}: {exc}",
            family="mera",
        )


def run_mera_search(
    layout: MeraLayout,
    cfg: ObjectiveConfig,
    adam: AdamConfig,
    seeds: Sequence[int],
    gradient: str = "fd",
    parallelism: int = 1,
) -> list[ShotRecord]:
    """Batched MERA shots, results in seed order."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds must be non-empty")
    jobs = [(layout, cfg, adam, s, gradient) for s in seeds]
    if parallelism <= 1 or len(seeds) == 1:
        return [_mera_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_mera_worker, jobs))


def mera_state_from_record(record: ShotRecord) -> QuditState:
    layout = mera_layout(len(record.dims))
    return mera_state(layout, _unflatten_complex(record.best_params))


def _unflatten_complex(ent: np.ndarray) -> MeraParams:
    return MeraParams(np.asarray(ent).reshape(-1, ENTRIES_PER_GATE))
