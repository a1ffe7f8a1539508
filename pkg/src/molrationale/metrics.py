"""Success, diversity and novelty of generated molecule batches."""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .chemgraph import MolGraph
from .fingerprint import BitFingerprint, morgan_fingerprint, tanimoto
from .forest import PropertySpec

NOVELTY_CUTOFF = 0.4


class MetricsError(ValueError):
    pass


@dataclass
class EvalReport:
    n: int
    success: float
    diversity: float | None
    novelty: float | None
    per_property: dict[str, float]
    diversity_all: float | None = None
    novelty_all: float | None = None

    CSV_FIELDS = (
        "n",
        "success",
        "diversity",
        "novelty",
        "diversity_all",
        "novelty_all",
        "per_property",
    )

    def csv_row(self) -> list[str]:
        def fmt(x):
            return "" if x is None else f"{x:.6f}"

        props = ";".join(f"{k}={self.per_property[k]:.6f}" for k in sorted(self.per_property))
        return [
            str(self.n),
            fmt(self.success),
            fmt(self.diversity),
            fmt(self.novelty),
            fmt(self.diversity_all),
            fmt(self.novelty_all),
            props,
        ]


def _fps(mols: list[MolGraph]) -> list[BitFingerprint]:
    return [morgan_fingerprint(g) for g in mols]


def success_rate(samples: list[MolGraph], props: list[PropertySpec]) -> float:
    """Fraction of samples scoring at or above every property threshold."""
    if not samples:
        raise MetricsError("success_rate requires at least one sample")
    hits = sum(1 for g in samples if all(p.is_positive(g) for p in props))
    return hits / len(samples)


def diversity(positives: list[MolGraph]) -> float:
    """1 - (2 / n(n-1)) * sum of pairwise Tanimoto similarities."""
    n = len(positives)
    if n < 2:
        raise MetricsError("diversity requires at least two molecules")
    fps = _fps(positives)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += tanimoto(fps[i], fps[j])
    return 1.0 - (2.0 / (n * (n - 1))) * total


def novelty_from_fingerprints(
    fps: list[BitFingerprint], ref: list[BitFingerprint]
) -> float:
    """Fraction whose nearest-neighbor similarity to the reference is strictly
    below the cutoff (a tie at the cutoff is not novel)."""
    if not fps:
        raise MetricsError("novelty requires at least one molecule")
    if not ref:
        raise MetricsError("novelty requires a non-empty reference set")
    count = 0
    for fp in fps:
        nearest = max(tanimoto(fp, r) for r in ref)
        if nearest < NOVELTY_CUTOFF:
            count += 1
    return count / len(fps)


def novelty(positives: list[MolGraph], train_positives: list[MolGraph]) -> float:
    return novelty_from_fingerprints(_fps(positives), _fps(train_positives))


def evaluate(
    samples: list[MolGraph],
    props: list[PropertySpec],
    train_positives: list[MolGraph],
    csv_path=None,
) -> EvalReport:
    """Assemble the metric suite; diversity and novelty are computed over the
    positive samples only, with all-sample variants carried for debugging."""
    if not samples:
        raise MetricsError("evaluate requires at least one sample")
    positives = [g for g in samples if all(p.is_positive(g) for p in props)]
    per_property = {
        p.name: sum(1 for g in samples if p.is_positive(g)) / len(samples)
        for p in props
    }
    report = EvalReport(
        n=len(samples),
        success=len(positives) / len(samples),
        diversity=diversity(positives) if len(positives) >= 2 else None,
        novelty=novelty(positives, train_positives) if positives and train_positives else None,
        per_property=per_property,
        diversity_all=diversity(samples) if len(samples) >= 2 else None,
        novelty_all=novelty(samples, train_positives) if train_positives else None,
    )
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EvalReport.CSV_FIELDS)
            writer.writerow(report.csv_row())
    return report
