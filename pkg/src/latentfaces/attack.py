"""Attack classification, the quality gate, and experiment orchestration.

A candidate dodges when its mean similarity to its own label drops below
the threshold; it impersonates a label when its mean similarity to that
other label rises above it. Both comparisons are strict: hitting the
threshold exactly counts as neither. Candidates must additionally pass a
quality gate, staying inside baseline bands, before they are counted as
usable attacks.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import autoencoder as ae
from . import latentpca as lp
from . import manipulate as mp
from .errors import InsufficientDataError, InvalidInputError, UnknownLabelError
from .recognition import BaselineStats, MatchResult, RecognitionClient

DEFAULT_THRESHOLD = 80.0
DEFAULT_GATE_K = 2.0
CONFIDENCE_SLACK = 5.0


@dataclass
class AttackOutcome:
    true_label: str
    mean_similarity: dict  # label -> mean similarity over that label's entries
    dodging: bool
    impersonated_labels: list[str]
    quality_pass: bool | None = None
    quality_reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "true_label": self.true_label,
            "mean_similarity": {k: float(v) for k, v in self.mean_similarity.items()},
            "dodging": self.dodging,
            "impersonated_labels": list(self.impersonated_labels),
            "quality_pass": self.quality_pass,
            "quality_reasons": list(self.quality_reasons),
        }


def classify(
    results: list[MatchResult], true_label: str, threshold: float = DEFAULT_THRESHOLD
) -> AttackOutcome:
    """Label-mean similarities -> dodging / impersonation flags (strict comparisons)."""
    if not results:
        raise InsufficientDataError("no match results to classify")
    by_label: dict = {}
    for r in results:
        by_label.setdefault(r.entry_label, []).append(r.similarity)
    if true_label not in by_label:
        raise UnknownLabelError(f"true label {true_label!r} not among gallery labels")
    means = {label: float(np.mean(vals)) for label, vals in by_label.items()}
    dodging = means[true_label] < threshold
    impersonated = sorted(
        label for label, m in means.items() if label != true_label and m > threshold
    )
    return AttackOutcome(
        true_label=true_label,
        mean_similarity=means,
        dodging=dodging,
        impersonated_labels=impersonated,
    )


def quality_gate(
    confidence: float,
    brightness: float,
    sharpness: float,
    baselines: BaselineStats,
    k: float = DEFAULT_GATE_K,
) -> tuple[bool, list[str]]:
    """Check probe quality against baseline bands.

    Brightness and sharpness must fall within mean +- k*stddev; confidence
    must reach the baseline mean minus a fixed slack. Returns the verdict
    plus the names of every violated metric.
    """
    reasons = []
    q = baselines.quality
    if confidence < q["confidence"]["mean"] - CONFIDENCE_SLACK:
        reasons.append("confidence")
    for name, value in (("brightness", brightness), ("sharpness", sharpness)):
        lo = q[name]["mean"] - k * q[name]["stddev"]
        hi = q[name]["mean"] + k * q[name]["stddev"]
        if not (lo <= value <= hi):
            reasons.append(name)
    return (not reasons, reasons)


@dataclass
class ExperimentRecord:
    candidate_id: str
    descriptor: dict  # strategy name + per-candidate parameters
    coords_before: np.ndarray
    coords_after: np.ndarray
    outcome: AttackOutcome | None
    results: list[MatchResult]
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "descriptor": self.descriptor,
            "coords_before": [float(v) for v in self.coords_before],
            "coords_after": [float(v) for v in self.coords_after],
            "outcome": self.outcome.to_dict() if self.outcome else None,
            "results": [r.to_dict() for r in self.results],
            "error": self.error,
        }


@dataclass
class ExperimentReport:
    run_id: str
    config: dict
    baselines: BaselineStats
    records: list[ExperimentRecord]
    summary: dict
    created_at: str

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": self.config,
            "baselines": self.baselines.to_dict(),
            "records": [r.to_dict() for r in self.records],
            "summary": self.summary,
            "created_at": self.created_at,
        }


def summarize(records: list[ExperimentRecord]) -> dict:
    """Recount the headline numbers from the records themselves."""
    impersonations: dict = {}
    quality_passed = 0
    dodging = 0
    errors = 0
    for rec in records:
        if rec.error is not None or rec.outcome is None:
            errors += 1
            continue
        if rec.outcome.quality_pass:
            quality_passed += 1
            if rec.outcome.dodging:
                dodging += 1
            for label in rec.outcome.impersonated_labels:
                impersonations[label] = impersonations.get(label, 0) + 1
    return {
        "candidates": len(records),
        "errors": errors,
        "quality_passed": quality_passed,
        "dodging_successes": dodging,
        "impersonation_successes": dict(sorted(impersonations.items())),
    }


@dataclass(frozen=True)
class Candidate:
    candidate_id: str
    true_label: str
    coords_before: np.ndarray
    coords_after: np.ndarray
    params: dict


class Strategy:
    """A named recipe producing candidate coordinates from the dataset context."""

    name = "strategy"

    def describe(self) -> dict:
        raise NotImplementedError

    def candidates(self, ctx: "ExperimentContext") -> list[Candidate]:
        raise NotImplementedError


@dataclass
class ExperimentContext:
    """Everything a strategy may draw on: per-sample coords and aggregates."""

    coords_by_sample: dict  # sample_id -> coords
    label_by_sample: dict  # sample_id -> label
    coords_by_label: dict  # label -> (n, 64) array
    class_means: dict  # label -> coords
    ranges: np.ndarray  # (64, 2) min/max over the dataset

    @classmethod
    def build(cls, dataset, ae_model, pca_model) -> "ExperimentContext":
        latents = ae.encode_many(ae_model, [s.image for s in dataset])
        coords = lp.transform_many(pca_model, latents)
        coords_by_sample = {s.sample_id: coords[i] for i, s in enumerate(dataset)}
        label_by_sample = {s.sample_id: s.label for s in dataset}
        coords_by_label: dict = {}
        for i, s in enumerate(dataset):
            coords_by_label.setdefault(s.label, []).append(coords[i])
        coords_by_label = {k: np.stack(v) for k, v in coords_by_label.items()}
        return cls(
            coords_by_sample=coords_by_sample,
            label_by_sample=label_by_sample,
            coords_by_label=coords_by_label,
            class_means=mp.class_mean_coords(coords_by_label),
            ranges=mp.component_ranges(coords),
        )

    def require_sample(self, sample_id: str) -> np.ndarray:
        if sample_id not in self.coords_by_sample:
            raise InvalidInputError(f"unknown sample {sample_id!r}")
        return self.coords_by_sample[sample_id]


@dataclass
class SweepStrategy(Strategy):
    """Stepped grid over chosen components, centered on a source sample.

    Ranges default to the dataset's own per-component min/max; an explicit
    base (coords + true label) replaces the source sample when given.
    """

    indices: list[int]
    steps: int = mp.DEFAULT_STEPS
    source_sample: str | None = None
    ranges: list[tuple[float, float]] | None = None
    base_coords: np.ndarray | None = None
    base_label: str | None = None
    name = "sweep"

    def describe(self) -> dict:
        d = {
            "name": self.name,
            "indices": [int(i) for i in self.indices],
            "steps": int(self.steps),
            "source_sample": self.source_sample,
        }
        if self.ranges is not None:
            d["ranges"] = [[float(a), float(b)] for a, b in self.ranges]
        if self.base_coords is not None:
            d["base_coords"] = [float(v) for v in self.base_coords]
            d["base_label"] = self.base_label
        return d

    def _base(self, ctx: ExperimentContext):
        if self.base_coords is not None:
            if self.base_label is None:
                raise InvalidInputError("explicit base coords need a base label")
            return np.asarray(self.base_coords, dtype=np.float64), self.base_label
        sample = self.source_sample or sorted(ctx.coords_by_sample)[0]
        return ctx.require_sample(sample), ctx.label_by_sample[sample]

    def candidates(self, ctx: ExperimentContext) -> list[Candidate]:
        base, label = self._base(ctx)
        ranges = self.ranges
        if ranges is None:
            ranges = [(float(ctx.ranges[i, 0]), float(ctx.ranges[i, 1])) for i in self.indices]
        spec = mp.SweepSpec(list(self.indices), list(ranges), self.steps)
        out = []
        for i, cand in enumerate(mp.sweep(base, spec)):
            out.append(
                Candidate(
                    candidate_id=f"sweep-{i:05d}",
                    true_label=label,
                    coords_before=base,
                    coords_after=cand.coords,
                    params={"grid_position": list(cand.grid_position)},
                )
            )
        return out


@dataclass
class TransitionStrategy(Strategy):
    """PC1 interpolation from one class mean toward another."""

    from_label: str
    to_label: str
    steps: int = mp.DEFAULT_STEPS
    name = "transition"

    def describe(self) -> dict:
        return {
            "name": self.name,
            "from_label": self.from_label,
            "to_label": self.to_label,
            "steps": int(self.steps),
        }

    def candidates(self, ctx: ExperimentContext) -> list[Candidate]:
        for label in (self.from_label, self.to_label):
            if label not in ctx.class_means:
                raise UnknownLabelError(f"label {label!r} not in dataset")
        a = ctx.class_means[self.from_label]
        b = ctx.class_means[self.to_label]
        steps = mp.pc1_transition(a, b, self.steps)
        return [
            Candidate(
                candidate_id=f"transition-{j:03d}",
                true_label=self.from_label,
                coords_before=a,
                coords_after=c,
                params={"t": j / (self.steps - 1)},
            )
            for j, c in enumerate(steps)
        ]


@dataclass
class SwapsStrategy(Strategy):
    """One-at-a-time component swaps from a reference sample into an original."""

    original_sample: str
    reference_sample: str
    name = "swaps"

    def describe(self) -> dict:
        return {
            "name": self.name,
            "original_sample": self.original_sample,
            "reference_sample": self.reference_sample,
        }

    def candidates(self, ctx: ExperimentContext) -> list[Candidate]:
        orig = ctx.require_sample(self.original_sample)
        ref = ctx.require_sample(self.reference_sample)
        label = ctx.label_by_sample[self.original_sample]
        return [
            Candidate(
                candidate_id=f"swap-{k:02d}",
                true_label=label,
                coords_before=orig,
                coords_after=c,
                params={"component": k},
            )
            for k, c in enumerate(mp.per_component_swaps(orig, ref))
        ]


@dataclass
class SubstituteStrategy(Strategy):
    """Impose a reference's components on an original except the kept indices."""

    original_sample: str
    reference_sample: str
    keep_indices: tuple = (0,)
    name = "substitute"

    def describe(self) -> dict:
        return {
            "name": self.name,
            "original_sample": self.original_sample,
            "reference_sample": self.reference_sample,
            "keep_indices": sorted(int(i) for i in self.keep_indices),
        }

    def candidates(self, ctx: ExperimentContext) -> list[Candidate]:
        orig = ctx.require_sample(self.original_sample)
        ref = ctx.require_sample(self.reference_sample)
        coords = mp.substitute_except(orig, ref, self.keep_indices)
        return [
            Candidate(
                candidate_id="substitute-00",
                true_label=ctx.label_by_sample[self.original_sample],
                coords_before=orig,
                coords_after=coords,
                params={"keep_indices": sorted(int(i) for i in self.keep_indices)},
            )
        ]


@dataclass
class ExploreStrategy(Strategy):
    """A single externally-chosen coordinate vector (the interactive path)."""

    coords: np.ndarray
    true_label: str
    name = "explore"

    def describe(self) -> dict:
        return {
            "name": self.name,
            "true_label": self.true_label,
            "coords": [float(v) for v in self.coords],
        }

    def candidates(self, ctx: ExperimentContext) -> list[Candidate]:
        c = np.asarray(self.coords, dtype=np.float64)
        return [
            Candidate(
                candidate_id="explore-00",
                true_label=self.true_label,
                coords_before=c,
                coords_after=c,
                params={},
            )
        ]


def run_id_for(descriptor: dict) -> str:
    """Deterministic run id from the strategy descriptor."""
    blob = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    return f"{descriptor.get('name', 'run')}-{hashlib.sha256(blob).hexdigest()[:8]}"


def run_experiment(
    dataset,
    ae_model,
    pca_model,
    client: RecognitionClient,
    strategy: Strategy,
    baselines: BaselineStats,
    threshold: float = DEFAULT_THRESHOLD,
    gate_k: float = DEFAULT_GATE_K,
    record_sink=None,
) -> ExperimentReport:
    """Evaluate every candidate: inverse PCA, decode, compare, classify, gate.

    A failing candidate is recorded with its error and the run continues;
    only missing artifacts abort. record_sink, when given, receives each
    record dict as it is produced (the JSONL stream).
    """
    ctx = ExperimentContext.build(dataset, ae_model, pca_model)
    descriptor = strategy.describe()
    records = []
    for cand in strategy.candidates(ctx):
        rec_descriptor = {**descriptor, "candidate": cand.params}
        try:
            latent = lp.inverse(pca_model, cand.coords_after)
            image = ae.decode(ae_model, latent)
            results = client.compare(image)
            outcome = classify(results, cand.true_label, threshold)
            ok, reasons = quality_gate(
                results[0].confidence,
                results[0].brightness,
                results[0].sharpness,
                baselines,
                gate_k,
            )
            outcome.quality_pass = ok
            outcome.quality_reasons = reasons
            rec = ExperimentRecord(
                candidate_id=cand.candidate_id,
                descriptor=rec_descriptor,
                coords_before=cand.coords_before,
                coords_after=cand.coords_after,
                outcome=outcome,
                results=results,
            )
        except Exception as exc:  # per-candidate isolation
            rec = ExperimentRecord(
                candidate_id=cand.candidate_id,
                descriptor=rec_descriptor,
                coords_before=cand.coords_before,
                coords_after=cand.coords_after,
                outcome=None,
                results=[],
                error=f"{type(exc).__name__}: {exc}",
            )
        records.append(rec)
        if record_sink is not None:
            record_sink(rec.to_dict())

    config = {
        "strategy": descriptor,
        "threshold": threshold,
        "gate_k": gate_k,
        "labels": sorted(ctx.class_means),
        "candidates": len(records),
    }
    return ExperimentReport(
        run_id=run_id_for(descriptor),
        config=config,
        baselines=baselines,
        records=records,
        summary=summarize(records),
        created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    )


def find_attacks(report: ExperimentReport) -> list[ExperimentRecord]:
    """Quality-passing records that dodge or impersonate, strongest first.

    Sorted by the maximum off-label mean similarity, descending.
    """
    hits = [
        r
        for r in report.records
        if r.outcome is not None
        and r.outcome.quality_pass
        and (r.outcome.dodging or r.outcome.impersonated_labels)
    ]

    def off_label_peak(rec: ExperimentRecord) -> float:
        means = rec.outcome.mean_similarity
        off = [v for k, v in means.items() if k != rec.outcome.true_label]
        return max(off) if off else float("-inf")

    hits.sort(key=off_label_peak, reverse=True)
    return hits
