"""File formats: state JSON, shot JSONL, CSV reports, and run manifests.

All amplitude data uses the package-wide big-endian mixed-radix index
convention (site 0 most significant).  Numbers in emitted text files carry
12 significant digits and rows are deterministically ordered, so repeated
runs with the same configuration are byte-identical; manifests carry a
timestamp and are the one exception.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .entropy import EntropyConfig, max_tmi, von_neumann
from .objective import gap, two_party_density
from .optimize import ShotRecord, SweepRecord
from .reflect import reflected_entropy
from .states import Dims, PartitionSpec, QuditState, partial_trace

PARTY_KEYS = ("A", "B", "Ap", "Bp")


class StateFileError(ValueError):
    """Raised when a state file fails to parse or validate."""


def fmt12(x: float) -> str:
    return f"{float(x):.12g}"


def _round12(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, float):
        return float(fmt12(obj))
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# state files


@dataclass(frozen=True)
class ParsedStateFile:
    """Raw (not yet renormalized) contents of a state file."""

    dims: Dims
    partition: PartitionSpec
    amplitudes: np.ndarray
    expected: Optional[dict]
    description: str = ""


def parse_state_file(path: Union[str, Path]) -> ParsedStateFile:
    """Parse and validate the JSON state format; raises StateFileError."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise StateFileError(f"cannot read state file {path}: {exc}") from exc
    for key in ("dims", "parties", "amplitudes"):
        if key not in data:
            raise StateFileError(f"state file is missing required field {key!r}")
    try:
        dims = Dims(tuple(int(d) for d in data["dims"]))
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"bad dims field: {exc}") from exc
    parties = data["parties"]
    missing = [k for k in PARTY_KEYS if k not in parties]
    if missing:
        raise StateFileError(f"parties field is missing {missing}")
    try:
        partition = PartitionSpec(*(tuple(parties[k]) for k in PARTY_KEYS))
        partition.validate_for(dims)
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"bad parties field: {exc}") from exc
    raw = data["amplitudes"]
    if len(raw) != dims.total:
        raise StateFileError(
            f"amplitude count {len(raw)} does not match dims {dims.sites} (need {dims.total})"
        )
    try:
        amps = np.array([complex(float(re), float(im)) for re, im in raw], dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"bad amplitude entry: {exc}") from exc
    return ParsedStateFile(
        dims=dims,
        partition=partition,
        amplitudes=amps,
        expected=data.get("expected"),
        description=data.get("description", ""),
    )


def write_state_file(
    path: Union[str, Path],
    state: QuditState,
    partition: PartitionSpec,
    expected: Optional[dict] = None,
    description: str = "",
) -> None:
    partition.validate_for(state.dims)
    doc = {
        "description": description,
        "index_convention": "big-endian mixed radix, site 0 most significant",
        "dims": list(state.dims.sites),
        "parties": {
            "A": list(partition.a_sites),
            "B": list(partition.b_sites),
            "Ap": list(partition.ap_sites),
            "Bp": list(partition.bp_sites),
        },
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }
    if expected is not None:
        doc["expected"] = expected
    Path(path).write_text(json.dumps(_round12(doc), indent=1) + "\n")


# ---------------------------------------------------------------------------
# verify


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of verifying a state file against its optional expected values."""

    path: str
    norm_before: float
    values_nats: dict
    values_bits: dict
    identity_error: float
    expected: Optional[dict]
    matched_base: Optional[str]
    checks: list  # (name, computed, expected, tolerance, passed)
    passed: bool

    def render(self) -> str:
        lines = [f"state file: {self.path}"]
        lines.append(f"norm before renormalization: {self.norm_before:.6f}")
        lines.append(
            "computed (nats): "
            + "  ".join(f"{k}={fmt12(v)}" for k, v in self.values_nats.items())
        )
        lines.append(
            "computed (bits): "
            + "  ".join(f"{k}={fmt12(v)}" for k, v in self.values_bits.items())
        )
        lines.append(
            f"internal identity |gap - (S(AA') - S_R/2)| = {self.identity_error:.3e}  "
            + ("PASS" if self.identity_error <= 1e-12 else "FAIL")
        )
        if self.expected is None:
            lines.append("no expected values supplied; nothing further to check")
        else:
            if self.matched_base is not None:
                lines.append(f"expected values matched in log base {self.matched_base}")
            else:
                lines.append("expected values matched in no log base")
            for name, comp, want, tol, ok in self.checks:
                lines.append(
                    f"  {name:8s} computed={fmt12(comp):>16s} expected={want:<10g} "
                    f"tol={tol:g}  {'PASS' if ok else 'FAIL'}"
                )
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


NORM_GUARD = 0.05


def _state_values(psi: QuditState, partition: PartitionSpec, config: EntropyConfig) -> dict:
    keep = tuple(sorted(partition.a_sites + partition.ap_sites))
    s_aap = von_neumann(partial_trace(psi, keep), config)
    s_r = reflected_entropy(two_party_density(psi, partition), 1.0, config)
    g = gap(psi, partition, 1.0, config)
    return {
        "s_aap": s_aap,
        "s_r": s_r,
        "gap": g,
        "max_i3": max_tmi(psi, partition, config),
        "identity_error": abs(g - (s_aap - 0.5 * s_r)),
    }


def verify_state_file(path: Union[str, Path]) -> VerifyReport:
    """Renormalize a parsed state, recompute its invariants, and check them.

    Values are computed in nats first; when expected values are present but
    fail in nats, they are re-checked in bits and the matching base is
    reported (published amplitudes are rounded, hence the loose tolerances
    carried in the file).
    """
    parsed = parse_state_file(path)
    norm = float(np.linalg.norm(parsed.amplitudes))
    if abs(norm - 1.0) > NORM_GUARD:
        raise StateFileError(f"state norm {norm:.6f} deviates from 1 by more than {NORM_GUARD}")
    psi = QuditState(parsed.dims, parsed.amplitudes / norm)

    nats = _state_values(psi, parsed.partition, EntropyConfig(log_base="e"))
    bits = _state_values(psi, parsed.partition, EntropyConfig(log_base="2"))
    identity_error = max(nats["identity_error"], bits["identity_error"])

    expected = parsed.expected
    matched_base = None
    checks: list = []
    passed = identity_error <= 1e-12
    if expected is not None:
        names = [("s_aap", "tol_s_aap"), ("s_r", "tol_s_r"), ("gap", "tol_gap")]

        def try_base(valdict):
            out = []
            for name, tolkey in names:
                if name not in expected:
                    continue
                want = float(expected[name])
                tol = float(expected.get(tolkey, 0.02))
                comp = valdict[name]
                out.append((name, comp, want, tol, abs(comp - want) <= tol))
            return out

        for base, vals in (("e", nats), ("2", bits)):
            checks = try_base(vals)
            if checks and all(ok for *_, ok in checks):
                matched_base = base
                break
        passed = passed and matched_base is not None
    return VerifyReport(
        path=str(path),
        norm_before=norm,
        values_nats={k: nats[k] for k in ("s_aap", "s_r", "gap", "max_i3")},
        values_bits={k: bits[k] for k in ("s_aap", "s_r", "gap", "max_i3")},
        identity_error=identity_error,
        expected=expected,
        matched_base=matched_base,
        checks=checks,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# shot logs


def _partition_dict(p: PartitionSpec) -> dict:
    return {
        "A": list(p.a_sites),
        "B": list(p.b_sites),
        "Ap": list(p.ap_sites),
        "Bp": list(p.bp_sites),
    }


def shot_to_dict(rec: ShotRecord) -> dict:
    # failed shots can carry best_gap = inf, which strict JSON cannot express
    best = rec.best_gap if np.isfinite(rec.best_gap) else None
    return {
        "family": rec.family,
        "seed": rec.seed,
        "dims": list(rec.dims),
        "parties": _partition_dict(rec.partition),
        "q_trained": rec.q_trained,
        "best_gap": best,
        "steps_run": rec.steps_run,
        "failed": rec.failed,
        "note": rec.note,
        "best_params": [[float(z.real), float(z.imag)] for z in rec.best_params],
        "objective_trace": [float(x) for x in rec.objective_trace],
    }


def shot_from_dict(doc: dict) -> ShotRecord:
    parties = doc["parties"]
    return ShotRecord(
        seed=int(doc["seed"]),
        dims=tuple(int(d) for d in doc["dims"]),
        partition=PartitionSpec(*(tuple(parties[k]) for k in PARTY_KEYS)),
        q_trained=float(doc["q_trained"]),
        best_gap=float("inf") if doc["best_gap"] is None else float(doc["best_gap"]),
        best_params=np.array([complex(re, im) for re, im in doc["best_params"]]),
        steps_run=int(doc["steps_run"]),
        objective_trace=np.array([float(x) for x in doc["objective_trace"]]),
        failed=bool(doc["failed"]),
        note=str(doc.get("note", "")),
        family=str(doc.get("family", "unitary")),
    )


def write_shots_jsonl(records: Sequence[ShotRecord], path: Union[str, Path]) -> None:
    """One JSON object per shot, seed-ascending."""
    records = sorted(records, key=lambda r: r.seed)
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(_round12(shot_to_dict(rec)), separators=(",", ":")))
            f.write("\n")


def read_shots_jsonl(path: Union[str, Path]) -> list[ShotRecord]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(shot_from_dict(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# CSV reports


def write_sweep_csv(records: Sequence[SweepRecord], path: Union[str, Path]) -> None:
    records = sorted(records, key=lambda r: r.q)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["q", "min_gap", "state_id"])
        for r in records:
            w.writerow([fmt12(r.q), fmt12(r.min_gap), r.argmin_state_id])


def read_sweep_csv(path: Union[str, Path]) -> list[SweepRecord]:
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.append(
                SweepRecord(
                    q=float(row["q"]),
                    min_gap=float(row["min_gap"]),
                    argmin_state_id=row["state_id"],
                )
            )
    return out


def write_curve_csv(points: Sequence[tuple[float, float]], path: Union[str, Path]) -> None:
    points = sorted(points, key=lambda p: p[0])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["q", "gap"])
        for q, g in points:
            w.writerow([fmt12(q), fmt12(g)])


def read_curve_csv(path: Union[str, Path]) -> list[tuple[float, float]]:
    with open(path, newline="") as f:
        return [(float(r["q"]), float(r["gap"])) for r in csv.DictReader(f)]


def write_tmi_csv(rows: Sequence[tuple[int, float, float]], path: Union[str, Path]) -> None:
    """Rows of (seed, best_gap, max_i3), seed-ascending."""
    rows = sorted(rows, key=lambda r: r[0])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["seed", "best_gap", "max_i3"])
        for seed, best_gap, mi3 in rows:
            w.writerow([int(seed), fmt12(best_gap), fmt12(mi3)])


def read_tmi_csv(path: Union[str, Path]) -> list[tuple[int, float, float]]:
    with open(path, newline="") as f:
        return [
            (int(r["seed"]), float(r["best_gap"]), float(r["max_i3"]))
            for r in csv.DictReader(f)
        ]


# ---------------------------------------------------------------------------
# manifests and the report dispatcher


def write_manifest(out_path: Union[str, Path], command: str, config: dict) -> Path:
    """Drop a replay manifest next to an emitted artifact."""
    out_path = Path(out_path)
    manifest = {
        "command": command,
        "config": _round12(config),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    mpath = out_path.with_name(out_path.name + ".manifest.json")
    mpath.write_text(json.dumps(manifest, indent=1) + "\n")
    return mpath


def emit_reports(records, kind: str, out_path: Union[str, Path], command: str = "", config: Optional[dict] = None) -> Path:
    """Write one report artifact plus its manifest; returns the artifact path.

    Kinds: ``sweep_csv``, ``curve_csv``, ``tmi_csv``, ``shots_jsonl``.
    """
    if not len(records):
        raise ValueError("records must be non-empty")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    writers = {
        "sweep_csv": write_sweep_csv,
        "curve_csv": write_curve_csv,
        "tmi_csv": write_tmi_csv,
        "shots_jsonl": write_shots_jsonl,
    }
    if kind not in writers:
        raise ValueError(f"unknown report kind {kind!r}")
    writers[kind](records, out_path)
    write_manifest(out_path, command, config or {})
    return out_path
