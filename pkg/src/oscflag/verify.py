"""Verification runs: sampling, the per-point pipeline, and report assembly.

A run samples chart points (rejecting non-1-regular ones), extracts the
pointwise invariants, classifies each point, evaluates the entry's declared
expectations plus the universal lemma checks, and assembles a deterministic
report.  Reports are byte-identical across runs with the same configuration
once timings are stripped.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import checks as chk
from .catalog import CatalogEntry, get_entry
from .errors import (DegeneracyError, NotImmersionError, OscflagError,
                     RegularityError, UsageError)
from .geometry import point_geometry, s_nullity
from .nonparallel import classify_case, nonparallel_data, phi_pairing

SCHEMA_VERSION = "1"


@dataclass
class RunConfig:
    """Everything a verification run depends on; serializes round-trip."""

    entry: str
    params: dict = field(default_factory=dict)
    samples: int = 20
    seed: int = 7
    rank_tol: float = 1e-8
    fd_step: float = 1e-3
    max_normal_order: int | None = None
    out: str | None = None

    def __post_init__(self):
        if self.samples < 1:
            raise UsageError("sample count must be at least 1")
        if not 0.0 < self.rank_tol < 1.0:
            raise UsageError("rank tolerance must lie in (0, 1)")
        if self.fd_step <= 0.0:
            raise UsageError("finite-difference step must be positive")

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "params": dict(sorted(self.params.items())),
            "samples": self.samples,
            "seed": self.seed,
            "rank_tol": self.rank_tol,
            "fd_step": self.fd_step,
            "max_normal_order": self.max_normal_order,
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(entry=data["entry"], params=dict(data.get("params", {})),
                   samples=int(data.get("samples", 20)),
                   seed=int(data.get("seed", 7)),
                   rank_tol=float(data.get("rank_tol", 1e-8)),
                   fd_step=float(data.get("fd_step", 1e-3)),
                   max_normal_order=data.get("max_normal_order"),
                   out=data.get("out"))


@dataclass
class Report:
    config: dict
    points: list[dict]
    verdicts: list[dict]
    findings: list[dict]
    timings: dict
    schema_version: str = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return not self.findings

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {
            "schema_version": self.schema_version,
            "config": self.config,
            "points": self.points,
            "verdicts": self.verdicts,
            "findings": self.findings,
        }
        if include_timings:
            out["timings"] = self.timings
        return out

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2,
                          sort_keys=True, default=_json_safe) + "\n"


def _json_safe(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _sample_points(entry: CatalogEntry, config: RunConfig,
                   mno: int) -> tuple[list, list[str]]:
    """Accepted sample records plus rejection notes.

    Points where the immersion or flag-rank audit fails are rejected and
    resampled, matching the constant-rank assumption of the analysis.
    """
    rng = np.random.default_rng(config.seed)
    records: list[chk.PointRecord] = []
    notes: list[str] = []
    attempts = 0
    max_attempts = 64 * config.samples
    while len(records) < config.samples and attempts < max_attempts:
        attempts += 1
        x = entry.sampler(rng)
        try:
            geom = point_geometry(entry.chart, x, mno, config.rank_tol)
            phi = phi_pairing(geom)
        except (NotImmersionError, RegularityError) as exc:
            notes.append(f"rejected sample {attempts}: {exc}")
            continue
        nd = nonparallel_data(geom, phi, config.rank_tol)
        records.append(chk.PointRecord(index=len(records), x=x, geom=geom,
                                       phi=phi, nd=nd, nu_s=[]))
    if len(records) < config.samples:
        raise DegeneracyError(
            f"only {len(records)}/{config.samples} usable points after "
            f"{attempts} attempts")
    return records, notes


def _nu_s_table(rec: chk.PointRecord, config: RunConfig) -> list[int]:
    p = rec.nd.p
    if p == 0:
        return []
    table = []
    hints = [rec.nd.S] if rec.nd.s else []
    for s in range(1, p + 1):
        table.append(s_nullity(rec.geom, s, restarts=16,
                               seed=np.random.default_rng(
                                   [config.seed, 7000 + rec.index, s]),
                               tol=config.rank_tol, hints=hints))
    # each witness plane for s+1 contains an s-plane with at least the same
    # kernel, so cascading keeps every entry a certified lower bound
    for i in range(p - 2, -1, -1):
        table[i] = max(table[i], table[i + 1])
    return table


def _point_dict(rec: chk.PointRecord) -> dict:
    label = rec.classification.label if rec.classification \
        else rec.nd.case_label
    return {
        "index": rec.index,
        "x": [round(float(v), 12) for v in rec.x],
        "p": rec.nd.p,
        "s": rec.nd.s,
        "d": rec.nd.D.dim,
        "nu": rec.nd.nu,
        "nu_s_lower_bounds": rec.nu_s,
        "k": rec.k,
        "case": label,
        "residuals": {key: float(val)
                      for key, val in sorted(rec.nd.diagnostics.items())},
        "consequences": [
            {"name": c.name, "passed": c.passed, "detail": c.detail}
            for c in (rec.classification.checks if rec.classification else ())
        ],
    }


def run_verification(config: RunConfig) -> Report:
    """Execute the full pipeline for one catalog entry."""
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    entry = get_entry(config.entry, config.params)
    mno = config.max_normal_order or entry.max_normal_order

    t0 = time.perf_counter()
    records, notes = _sample_points(entry, config, mno)
    timings["sampling_s"] = round(time.perf_counter() - t0, 4)

    t0 = time.perf_counter()
    for rec in records:
        rec.nu_s = _nu_s_table(rec, config)
    timings["nu_s_s"] = round(time.perf_counter() - t0, 4)

    ctx = chk.VerifyContext(entry=entry, config=config, records=records,
                            seed=config.seed, fd_step=config.fd_step,
                            rank_tol=config.rank_tol)

    verdicts: list[chk.CheckResult] = []

    # Ruledness first: its verdict feeds the trichotomy sub-label.
    t0 = time.perf_counter()
    d_ruled: bool | None = None
    if entry.ruled and any(rec.nd.s for rec in records):
        result = chk.check_d_ruled_leaves(ctx)
        verdicts.append(result)
        d_ruled = bool(result.passed)
    timings["ruledness_s"] = round(time.perf_counter() - t0, 4)

    # Splitting exercises: the derivative-span rank feeds classification.
    t0 = time.perf_counter()
    k_for_classify: int | None = None
    for i, exercise in enumerate(entry.split_exercises):
        result = chk.check_split_exercise(ctx, i)
        verdicts.append(result)
        if exercise.name == "default" and result.details.get("k"):
            k_for_classify = result.details["k"][0]
    timings["extensions_s"] = round(time.perf_counter() - t0, 4)

    for rec in records:
        rec.k = k_for_classify
        rec.classification = classify_case(rec.nd, rec.geom.n,
                                           k=k_for_classify, d_ruled=d_ruled)

    # Declared expectations.
    t0 = time.perf_counter()
    for expectation in entry.expected:
        fn = chk.CHECKS[expectation.check]
        try:
            result = fn(ctx, **expectation.params)
        except OscflagError as exc:
            result = chk.CheckResult(expectation.check, False,
                                     details={"error": str(exc)})
        result.description = result.description or expectation.description
        verdicts.append(result)
    timings["expectations_s"] = round(time.perf_counter() - t0, 4)

    # Universal lemma checks.
    t0 = time.perf_counter()
    verdicts.append(chk.check_trichotomy_consequences(ctx))
    verdicts.append(chk.check_nu_s_monotone(ctx))
    verdicts.append(chk.check_lemma_parallel_i(ctx))
    verdicts.append(chk.check_d_bound(ctx))
    verdicts.append(chk.check_phi_convergence(ctx))
    verdicts.append(chk.check_codazzi(ctx))
    if any(0 < rec.nd.s < rec.nd.p and rec.nd.D.dim for rec in records):
        verdicts.append(chk.check_p_parallel_drift(ctx))
    if entry.ruled:
        verdicts.append(chk.check_ricci_rulings(ctx))
        has_ratio = any(e.check == "s_constancy" for e in entry.expected)
        if not has_ratio and any(rec.nd.s for rec in records):
            verdicts.append(chk.check_s_constancy(ctx, ratio=False))
    timings["universal_s"] = round(time.perf_counter() - t0, 4)

    findings = []
    for v in verdicts:
        if not v.passed:
            findings.append({
                "check": v.name,
                "residual": v.residual,
                "tolerance": v.tolerance,
                "details": v.details,
            })

    timings["total_s"] = round(time.perf_counter() - t_start, 4)
    report = Report(
        config=config.to_dict(),
        points=[_point_dict(rec) for rec in records],
        verdicts=[v.to_dict() for v in verdicts],
        findings=findings,
        timings={**timings, "rejection_notes": notes},
    )
    return report
