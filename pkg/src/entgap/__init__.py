"""Reflected entropies, purification bounds, and gap-violation searches."""

from .entropy import (
    DEFAULT_ENTROPY,
    EntropyConfig,
    Spectrum,
    hermitian_spectrum,
    max_tmi,
    mutual_info,
    renyi,
    tmi,
    von_neumann,
)
from .reflect import CanonicalPurification, canonical_purification, reflected_entropy, sqrt_density
from .states import (
    DensityMatrix,
    Dims,
    PartitionSpec,
    QuditState,
    default_partition,
    density_from_state,
    equal_superposition,
    partial_trace,
    permute_and_group,
)

__version__ = "0.1.0"

from .objective import (  # noqa: E402
    ObjectiveConfig,
    UTParams,
    gap,
    objective_gradient,
    objective_value,
    objective_value_and_gradient,
    penalized_gap,
    state_from_params,
    two_party_density,
    unitary_from_params,
)
from .optimize import (  # noqa: E402
    AdamConfig,
    AdamState,
    GapProfile,
    ShotRecord,
    SweepRecord,
    adam_step,
    derive_seed,
    derive_seeds,
    run_batch,
    run_shot,
    state_from_record,
    state_gap_curve,
    sweep_min_gap,
)

__all__ = [
    "AdamConfig",
    "AdamState",
    "GapProfile",
    "ObjectiveConfig",
    "ShotRecord",
    "SweepRecord",
    "UTParams",
    "adam_step",
    "derive_seed",
    "derive_seeds",
    "gap",
    "objective_gradient",
    "objective_value",
    "objective_value_and_gradient",
    "penalized_gap",
    "run_batch",
    "run_shot",
    "state_from_params",
    "state_from_record",
    "state_gap_curve",
    "sweep_min_gap",
    "two_party_density",
    "unitary_from_params",
    "DEFAULT_ENTROPY",
    "CanonicalPurification",
    "DensityMatrix",
    "Dims",
    "EntropyConfig",
    "PartitionSpec",
    "QuditState",
    "Spectrum",
    "canonical_purification",
    "default_partition",
    "density_from_state",
    "equal_superposition",
    "hermitian_spectrum",
    "max_tmi",
    "mutual_info",
    "partial_trace",
    "permute_and_group",
    "reflected_entropy",
    "renyi",
    "sqrt_density",
    "tmi",
    "von_neumann",
    "__version__",
]
