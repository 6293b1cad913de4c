"""Cluster-to-class mapping and corpus classification.

Representatives closest to each centroid go to the expert; plurality of
the resulting labels maps each cluster to a class; the mapping then
classifies everything, with expert labels taking precedence and all-zero
changes routed to the reserved no-op class.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

from .clustering import Clustering, VectorSet, unit_rows
from .errors import (
    InconsistentClustering,
    LabelForUnknownChange,
    SameExpert,
    UnknownClassName,
    UnresolvedClusters,
)

_TIE_DECIMALS = 12

NOOP_CLASS = "no-op"


@dataclass(frozen=True)
class ClassSet:
    """Ordered expert class names, plus the reserved no-op class name."""

    names: tuple[str, ...]
    noop_class: str = NOOP_CLASS

    def __post_init__(self):
        if len(self.names) < 2:
            raise ValueError("at least two change classes required")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")
        if any(not n for n in self.names):
            raise ValueError("class names must be non-empty")
        if self.noop_class in self.names:
            raise ValueError("the no-op class name must not collide with a class")

    def __contains__(self, name):
        return name in self.names

    def index(self, name) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class ExpertLabel:
    change_id: str
    class_name: str
    expert_id: str
    labeled_at: int = 0


@dataclass
class ClusterClassMap:
    mapping: dict  # cluster index -> class name
    tallies: dict  # cluster index -> {class name: label count}
    unresolved: tuple[int, ...] = ()

    @property
    def resolved(self) -> bool:
        return not self.unresolved


@dataclass
class ClassifiedCorpus:
    classes: dict  # change_id -> class name
    provenance: dict  # change_id -> "auto" | "expert" | "no-op"

    def __len__(self):
        return len(self.classes)

    def counts(self) -> Counter:
        return Counter(self.classes.values())


@dataclass
class VerificationSet:
    """Changes two experts labeled identically; the evaluation ground truth."""

    pairs: list  # (change_id, class name), ordered by change_id
    disagreements: tuple[str, ...] = ()
    only_first: tuple[str, ...] = ()
    only_second: tuple[str, ...] = ()

    def __len__(self):
        return len(self.pairs)


def select_representatives(
    clustering: Clustering, vs: VectorSet, r: int = 6
) -> dict[int, list[str]]:
    """Per cluster, the r members most similar to the centroid.

    Similarities within 1e-12 are tied; ties go to corpus order.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    order = {cid: i for i, cid in enumerate(vs.ids)}
    missing = [cid for cid in clustering.assignment if cid not in order]
    if missing:
        raise InconsistentClustering(f"changes not in vector set: {missing[:3]}")
    units = unit_rows(vs.matrix)
    centroid_units = unit_rows(clustering.centroids)
    reps = {}
    for j in range(clustering.k):
        members = clustering.members(j)
        ranked = sorted(
            members,
            key=lambda cid: (
                -round(float(units[order[cid]] @ centroid_units[j]), _TIE_DECIMALS),
                order[cid],
            ),
        )
        reps[j] = ranked[: min(r, len(ranked))]
    return reps


def _dedupe_labels(labels) -> list[ExpertLabel]:
    """Reject conflicting duplicates; collapse exact ones."""
    by_key = {}
    for label in labels:
        key = (label.change_id, label.expert_id)
        prior = by_key.get(key)
        if prior is not None and prior.class_name != label.class_name:
            raise ValueError(
                f"conflicting labels for {key}: "
                f"{prior.class_name!r} vs {label.class_name!r}"
            )
        by_key[key] = label
    return list(by_key.values())


def map_clusters_to_classes(
    clustering: Clustering, labels, classes: ClassSet
) -> ClusterClassMap:
    """Plurality class per cluster; ties and unlabeled clusters stay unresolved."""
    labels = _dedupe_labels(labels)
    tallies = {j: Counter() for j in range(clustering.k)}
    for label in labels:
        if label.class_name not in classes:
            raise UnknownClassName(label.class_name)
        cluster = clustering.assignment.get(label.change_id)
        if cluster is None:
            raise LabelForUnknownChange(label.change_id)
        tallies[cluster][label.class_name] += 1
    mapping, unresolved = {}, []
    for j in range(clustering.k):
        tally = tallies[j]
        if not tally:
            unresolved.append(j)
            continue
        ranked = tally.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            unresolved.append(j)
            continue
        mapping[j] = ranked[0][0]
    return ClusterClassMap(
        mapping=mapping,
        tallies={j: dict(t) for j, t in tallies.items()},
        unresolved=tuple(unresolved),
    )


def classify_all(
    clustering: Clustering,
    cmap: ClusterClassMap,
    noop_ids,
    labels=(),
    noop_class: str = NOOP_CLASS,
) -> ClassifiedCorpus:
    """Give every change its cluster's class.

    Zero-vector changes get the no-op class.  Unanimous expert labels
    override; experts who disagree about a change leave it on the auto
    class.
    """
    if not cmap.resolved:
        raise UnresolvedClusters(cmap.unresolved)
    expert_classes = defaultdict(set)
    for label in _dedupe_labels(labels):
        expert_classes[label.change_id].add(label.class_name)
    result_classes, provenance = {}, {}
    for cid, cluster in clustering.assignment.items():
        result_classes[cid] = cmap.mapping[cluster]
        provenance[cid] = "auto"
    for cid in noop_ids:
        result_classes[cid] = noop_class
        provenance[cid] = "no-op"
    for cid, chosen in expert_classes.items():
        if len(chosen) == 1 and cid in result_classes:
            result_classes[cid] = next(iter(chosen))
            provenance[cid] = "expert"
    return ClassifiedCorpus(classes=result_classes, provenance=provenance)


def build_verification_set(labels_a, labels_b) -> VerificationSet:
    """Intersection of two experts' labels where the classes agree."""
    experts_a = {label.expert_id for label in labels_a}
    experts_b = {label.expert_id for label in labels_b}
    if not labels_a or not labels_b:
        return VerificationSet(pairs=[])
    if len(experts_a) != 1 or len(experts_b) != 1:
        raise SameExpert("each label list must come from a single expert")
    if experts_a == experts_b:
        raise SameExpert(f"both lists are from expert {next(iter(experts_a))!r}")
    by_a = {l.change_id: l.class_name for l in _dedupe_labels(labels_a)}
    by_b = {l.change_id: l.class_name for l in _dedupe_labels(labels_b)}
    pairs, disagreements = [], []
    for cid in sorted(by_a.keys() & by_b.keys()):
        if by_a[cid] == by_b[cid]:
            pairs.append((cid, by_a[cid]))
        else:
            disagreements.append(cid)
    return VerificationSet(
        pairs=pairs,
        disagreements=tuple(disagreements),
        only_first=tuple(sorted(by_a.keys() - by_b.keys())),
        only_second=tuple(sorted(by_b.keys() - by_a.keys())),
    )
