"""Classification quality: purity, entropy, resampled confidence intervals.

A contingency table counts verification changes per (cluster, class).
Purity of a cluster is its mapped-class share; entropy is the normalized
class-distribution entropy.  Corpus-level values weight clusters by size;
class-level values first merge rows mapped to the same class.  Confidence
intervals come from leave-one-part-out resampling with a Student-t
half-width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .classify import ClassSet, ClusterClassMap
from .clustering import Clustering
from .errors import (
    EmptyVerificationSet,
    TooFewForResampling,
    UnclusteredVerificationChange,
)


@dataclass(frozen=True)
class ContingencyRow:
    counts: tuple[int, ...]
    mapped_class: str
    mapped_count: int

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass
class ContingencyTable:
    class_names: tuple[str, ...]
    rows: list[ContingencyRow]

    @property
    def grand_total(self) -> int:
        return sum(row.total for row in self.rows)

    @property
    def mapped_total(self) -> int:
        """Verification changes landing in their cluster's mapped class."""
        return sum(row.mapped_count for row in self.rows)

    @classmethod
    def from_counts(cls, counts, mapped_classes, class_names) -> "ContingencyTable":
        class_names = tuple(class_names)
        rows = []
        for row, mapped in zip(counts, mapped_classes):
            row = tuple(int(c) for c in row)
            rows.append(
                ContingencyRow(
                    counts=row,
                    mapped_class=mapped,
                    mapped_count=row[class_names.index(mapped)],
                )
            )
        return cls(class_names=class_names, rows=rows)

    @classmethod
    def from_clustering(
        cls,
        clustering: Clustering,
        cmap: ClusterClassMap,
        verif_pairs,
        classes: ClassSet,
    ) -> "ContingencyTable":
        """Count verification changes per (cluster, class); empty clusters
        produce zero rows."""
        names = classes.names
        counts = [[0] * len(names) for _ in range(clustering.k)]
        for change_id, class_name in verif_pairs:
            cluster = clustering.assignment.get(change_id)
            if cluster is None:
                raise UnclusteredVerificationChange(change_id)
            counts[cluster][names.index(class_name)] += 1
        mapped = [cmap.mapping[j] for j in range(clustering.k)]
        return cls.from_counts(counts, mapped, names)

    def merged_by_class(self) -> "ContingencyTable":
        """Sum rows sharing a mapped class into one row per class."""
        merged: dict[str, list[int]] = {}
        for row in self.rows:
            acc = merged.setdefault(row.mapped_class, [0] * len(self.class_names))
            for i, c in enumerate(row.counts):
                acc[i] += c
        order = [name for name in self.class_names if name in merged]
        return ContingencyTable.from_counts(
            [merged[name] for name in order], order, self.class_names
        )

    def render_text(self) -> str:
        """Human-readable table: one cluster per row plus a totals row."""
        n = len(self.class_names)
        header = ["cluster", "mapped", *self.class_names, "total", "purity", "entropy"]
        lines = ["  ".join(f"{h:>8}" for h in header)]
        for j, row in enumerate(self.rows):
            cells = [
                str(j),
                row.mapped_class,
                *(str(c) for c in row.counts),
                str(row.total),
                f"{cluster_purity(row):.2f}",
                f"{cluster_entropy(row, n):.2f}",
            ]
            lines.append("  ".join(f"{c:>8}" for c in cells))
        totals = [sum(r.counts[i] for r in self.rows) for i in range(n)]
        purity, entropy = corpus_quality(self)
        cells = [
            "total",
            "",
            *(str(t) for t in totals),
            str(self.grand_total),
            f"{purity:.2f}",
            f"{entropy:.2f}",
        ]
        lines.append("  ".join(f"{c:>8}" for c in cells))
        return "\n".join(lines) + "\n"


def cluster_purity(row: ContingencyRow) -> float:
    """Mapped-class share of the row; an empty row is pure by convention."""
    if row.total == 0:
        return 1.0
    return row.mapped_count / row.total


def cluster_entropy(row: ContingencyRow, n_classes: int) -> float:
    """Normalized class-distribution entropy; 0 for empty or pure rows."""
    if row.total == 0:
        return 0.0
    acc = 0.0
    for count in row.counts:
        if count:
            p = count / row.total
            acc -= p * math.log(p)
    return acc / math.log(n_classes)


def corpus_quality(table: ContingencyTable) -> tuple[float, float]:
    """Size-weighted (purity, entropy) over all rows.

    Purity is computed as the exact ratio mapped_total / grand_total,
    which equals the size-weighted mean of row purities.
    """
    total = table.grand_total
    if total == 0:
        raise EmptyVerificationSet("no verification changes in the table")
    n = len(table.class_names)
    purity = table.mapped_total / total
    entropy = sum((row.total / total) * cluster_entropy(row, n) for row in table.rows)
    return purity, entropy


def merged_class_quality(table: ContingencyTable) -> tuple[float, float]:
    """(purity, entropy) of the class-merged table."""
    return corpus_quality(table.merged_by_class())


def t_interval(samples, alpha: float) -> tuple[float, float]:
    """(mean, two-sided Student-t half-width) over a small sample."""
    values = np.asarray(samples, dtype=float)
    m = len(values)
    if m < 2:
        raise TooFewForResampling("need at least two samples for an interval")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    quantile = float(stats.t.ppf(1.0 - alpha / 2.0, df=m - 1))
    return mean, quantile * sd / math.sqrt(m)


@dataclass
class ResampleResult:
    purity_mean: float
    purity_half_width: float
    entropy_mean: float
    entropy_half_width: float
    sample_count: int  # total changes across the M leave-one-part-out samples
    parts: int
    alpha: float
    seed: int
    per_sample: list = field(default_factory=list)  # (purity, entropy) per sample
    method: str = "student-t"


def resample_quality(
    clustering: Clustering,
    cmap: ClusterClassMap,
    verif_pairs,
    classes: ClassSet,
    parts: int = 5,
    alpha: float = 0.05,
    seed: int = 0,
    recompute_mapping: bool = False,
) -> ResampleResult:
    """Leave-one-part-out estimate of the class-merged quality.

    The verification set is shuffled once under the recorded seed and cut
    into ``parts`` near-equal parts; each sample drops one part.  The
    cluster-to-class mapping stays fixed unless ``recompute_mapping`` is
    set, in which case each sample re-derives row classes by in-sample
    plurality (falling back to the fixed mapping on ties and empties).
    """
    verif_pairs = list(verif_pairs)
    if parts < 2:
        raise TooFewForResampling("need at least two parts")
    if len(verif_pairs) < parts:
        raise TooFewForResampling(
            f"{len(verif_pairs)} verification changes for {parts} parts"
        )
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(verif_pairs))
    part_indices = np.array_split(perm, parts)
    purities, entropies = [], []
    sample_count = 0
    for drop in range(parts):
        keep = [
            verif_pairs[i]
            for p, idx in enumerate(part_indices)
            if p != drop
            for i in idx
        ]
        sample_count += len(keep)
        table = ContingencyTable.from_clustering(clustering, cmap, keep, classes)
        if recompute_mapping:
            table = _replurality(table, cmap)
        purity, entropy = merged_class_quality(table)
        purities.append(purity)
        entropies.append(entropy)
    purity_mean, purity_hw = t_interval(purities, alpha)
    entropy_mean, entropy_hw = t_interval(entropies, alpha)
    return ResampleResult(
        purity_mean=purity_mean,
        purity_half_width=purity_hw,
        entropy_mean=entropy_mean,
        entropy_half_width=entropy_hw,
        sample_count=sample_count,
        parts=parts,
        alpha=alpha,
        seed=seed,
        per_sample=list(zip(purities, entropies)),
    )


def _replurality(table: ContingencyTable, cmap: ClusterClassMap) -> ContingencyTable:
    """Re-map each row by in-sample plurality; keep the fixed class on ties."""
    mapped = []
    for j, row in enumerate(table.rows):
        best = max(row.counts) if row.counts else 0
        winners = [
            table.class_names[i] for i, c in enumerate(row.counts) if c == best and c > 0
        ]
        mapped.append(winners[0] if len(winners) == 1 else cmap.mapping[j])
    return ContingencyTable.from_counts(
        [row.counts for row in table.rows], mapped, table.class_names
    )


@dataclass
class HypothesisVerdict:
    passed: bool
    purity_margin: float  # lower CI bound minus the required minimum
    entropy_margin: float  # required maximum minus the upper CI bound


@dataclass
class QualityReport:
    table: ContingencyTable
    per_cluster: list  # (purity, entropy) per cluster row
    corpus_purity: float
    corpus_entropy: float
    class_purity: float
    class_entropy: float
    resample: ResampleResult | None = None
    verdict: HypothesisVerdict | None = None
    purity_min: float | None = None
    entropy_max: float | None = None


def hypothesis_check(report: QualityReport, p_min: float, e_max: float) -> HypothesisVerdict:
    """True iff the purity CI clears p_min from above and the entropy CI
    clears e_max from below."""
    rs = report.resample
    if rs is None:
        purity_low = report.class_purity
        entropy_high = report.class_entropy
    else:
        purity_low = rs.purity_mean - rs.purity_half_width
        entropy_high = rs.entropy_mean + rs.entropy_half_width
    purity_margin = purity_low - p_min
    entropy_margin = e_max - entropy_high
    return HypothesisVerdict(
        passed=purity_margin > 0 and entropy_margin > 0,
        purity_margin=purity_margin,
        entropy_margin=entropy_margin,
    )


def build_quality_report(
    clustering: Clustering,
    cmap: ClusterClassMap,
    verif_pairs,
    classes: ClassSet,
    parts: int = 5,
    alpha: float = 0.05,
    seed: int = 0,
    purity_min: float | None = None,
    entropy_max: float | None = None,
) -> QualityReport:
    table = ContingencyTable.from_clustering(clustering, cmap, verif_pairs, classes)
    n = len(classes.names)
    corpus_purity, corpus_entropy = corpus_quality(table)
    class_purity, class_entropy = merged_class_quality(table)
    resample = None
    if len(list(verif_pairs)) >= parts:
        resample = resample_quality(
            clustering, cmap, verif_pairs, classes, parts=parts, alpha=alpha, seed=seed
        )
    report = QualityReport(
        table=table,
        per_cluster=[
            (cluster_purity(row), cluster_entropy(row, n)) for row in table.rows
        ],
        corpus_purity=corpus_purity,
        corpus_entropy=corpus_entropy,
        class_purity=class_purity,
        class_entropy=class_entropy,
        resample=resample,
        purity_min=purity_min,
        entropy_max=entropy_max,
    )
    if purity_min is not None and entropy_max is not None:
        report.verdict = hypothesis_check(report, purity_min, entropy_max)
    return report


def report_to_dict(report: QualityReport) -> dict:
    """Machine-readable form of the report (JSON-serializable)."""
    out = {
        "class_names": list(report.table.class_names),
        "contingency": [
            {
                "cluster": j,
                "mapped_class": row.mapped_class,
                "counts": list(row.counts),
                "total": row.total,
                "purity": report.per_cluster[j][0],
                "entropy": report.per_cluster[j][1],
            }
            for j, row in enumerate(report.table.rows)
        ],
        "verification_total": report.table.grand_total,
        "cluster_weighted": {
            "purity": report.corpus_purity,
            "entropy": report.corpus_entropy,
        },
        "class_merged": {
            "purity": report.class_purity,
            "entropy": report.class_entropy,
        },
    }
    if report.resample is not None:
        rs = report.resample
        out["resampled"] = {
            "purity_mean": rs.purity_mean,
            "purity_half_width": rs.purity_half_width,
            "entropy_mean": rs.entropy_mean,
            "entropy_half_width": rs.entropy_half_width,
            "sample_count": rs.sample_count,
            "parts": rs.parts,
            "alpha": rs.alpha,
            "seed": rs.seed,
            "per_sample": [list(s) for s in rs.per_sample],
            "method": rs.method,
        }
    if report.verdict is not None:
        out["hypothesis"] = {
            "purity_min": report.purity_min,
            "entropy_max": report.entropy_max,
            "passed": report.verdict.passed,
            "purity_margin": report.verdict.purity_margin,
            "entropy_margin": report.verdict.entropy_margin,
        }
    return out


def render_report_text(report: QualityReport) -> str:
    lines = [report.table.render_text()]
    lines.append(
        f"cluster-weighted: purity {report.corpus_purity:.4f}, "
        f"entropy {report.corpus_entropy:.4f}"
    )
    lines.append(
        f"class-merged:     purity {report.class_purity:.4f}, "
        f"entropy {report.class_entropy:.4f}"
    )
    if report.resample is not None:
        rs = report.resample
        lines.append(
            f"resampled ({rs.parts} parts, alpha {rs.alpha}, seed {rs.seed}, "
            f"{rs.sample_count} changes): "
            f"purity {rs.purity_mean:.4f} +/- {rs.purity_half_width:.4f}, "
            f"entropy {rs.entropy_mean:.4f} +/- {rs.entropy_half_width:.4f}"
        )
    if report.verdict is not None:
        v = report.verdict
        lines.append(
            f"hypothesis (purity > {report.purity_min}, entropy < {report.entropy_max}): "
            f"{'holds' if v.passed else 'fails'} "
            f"(purity margin {v.purity_margin:+.4f}, entropy margin {v.entropy_margin:+.4f})"
        )
    return "\n".join(lines) + "\n"
