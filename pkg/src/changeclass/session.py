"""On-disk project sessions.

A session directory holds the pipeline's artifacts as flat, diff-able
text files with a manifest of content hashes.  Stages are strictly
ordered; changing an upstream artifact or config key invalidates
everything downstream (the expert label log is the one exception: labels
survive re-clustering and are simply re-mapped).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classify import ClassSet, ClusterClassMap, ExpertLabel, NOOP_CLASS
from .clustering import Clustering, KSelection
from .diffs import ChangeRecord, FileDiff, Hunk
from .errors import CorruptArtifact, SessionLocked, StageError, VersionMismatch
from .metrics import METRIC_NAMES, MetricSelection, MetricVector

FORMAT_VERSION = "1"

STAGES = (
    "ingested",
    "measured",
    "clustered",
    "labeling",
    "mapped",
    "classified",
    "evaluated",
)

# Files owned by each stage. The label log is expert input, not a derived
# artifact: invalidation never deletes it.
STAGE_FILES = {
    "ingested": ("corpus.jsonl", "ingest_report.txt"),
    "measured": ("vectors.csv",),
    "clustered": ("clustering.csv", "clustering_meta.json", "cluster_trace.txt"),
    "labeling": ("labels.log",),
    "mapped": ("mapping.json",),
    "classified": ("classified.csv",),
    "evaluated": ("report.json", "report.txt"),
}

# Stage. Verb that produces it (for actionable stage errors).
STAGE_VERBS = {
    "ingested": "ingest",
    "measured": "measure",
    "clustered": "cluster",
    "labeling": "label",
    "mapped": "map",
    "classified": "classify",
    "evaluated": "evaluate",
}

# Config key -> last stage whose artifacts stay valid when the key changes.
KEY_KEEPS_THROUGH = {
    "classes": "measured",
    "noop_class": "mapped",
    "metrics": "measured",
    "default_profile": "ingested",
    "extension_profiles": "ingested",
    "profile_dir": "ingested",
    "k_start": "measured",
    "k_max": "measured",
    "min_density": "measured",
    "max_iterations": "measured",
    "zero_vector_policy": "measured",
    "representatives": "clustered",
    "resample_parts": "classified",
    "alpha": "classified",
    "purity_min": "classified",
    "entropy_max": "classified",
    "seed": "classified",
}


@dataclass
class SessionConfig:
    classes: tuple[str, ...]
    noop_class: str = NOOP_CLASS
    metrics: tuple[str, ...] = METRIC_NAMES
    default_profile: str = "c_family"
    extension_profiles: dict = field(default_factory=dict)  # "cs" -> "csharp"
    profile_dir: str | None = None
    k_start: int | None = None  # None: number of classes
    k_max: int | None = None  # None: k_start + 10
    min_density: float = 0.0
    max_iterations: int = 300
    zero_vector_policy: str = "exclude"
    representatives: int = 6
    resample_parts: int = 5
    alpha: float = 0.05
    purity_min: float | None = None
    entropy_max: float | None = None
    seed: int = 0

    def class_set(self) -> ClassSet:
        return ClassSet(tuple(self.classes), noop_class=self.noop_class)

    def metric_selection(self) -> MetricSelection:
        return MetricSelection(tuple(self.metrics))

    def effective_k_start(self) -> int:
        return self.k_start if self.k_start is not None else len(self.classes)

    def effective_k_max(self) -> int:
        return self.k_max if self.k_max is not None else self.effective_k_start() + 10

    def to_json(self) -> str:
        data = asdict(self)
        data["classes"] = list(self.classes)
        data["metrics"] = list(self.metrics)
        data["version"] = FORMAT_VERSION
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SessionConfig":
        data = json.loads(text)
        version = data.pop("version", None)
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"config version {version!r}, expected {FORMAT_VERSION!r}")
        data["classes"] = tuple(data["classes"])
        data["metrics"] = tuple(data["metrics"])
        return cls(**data)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def stage_index(stage: str) -> int:
    return STAGES.index(stage)


class Session:
    """One project directory; single writer, enforced by a lock file."""

    def __init__(self, path):
        self.path = Path(path)
        self.config: SessionConfig | None = None
        self._manifest: dict = {"version": FORMAT_VERSION, "artifacts": {}}

    # -- lifecycle -----------------------------------------------------

    @classmethod
    def init(cls, path, config: SessionConfig) -> "Session":
        session = cls(path)
        session.path.mkdir(parents=True, exist_ok=True)
        session.config = config
        session._write_config()
        session._write_manifest()
        return session

    @classmethod
    def open(cls, path) -> "Session":
        session = cls(path)
        config_path = session.path / "config.json"
        if not config_path.is_file():
            raise FileNotFoundError(f"no session at {session.path} (missing config.json)")
        session.config = SessionConfig.from_json(config_path.read_text(encoding="utf-8"))
        manifest_path = session.path / "manifest.json"
        if manifest_path.is_file():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            if manifest.get("version") != FORMAT_VERSION:
                raise VersionMismatch(
                    f"manifest version {manifest.get('version')!r}, "
                    f"expected {FORMAT_VERSION!r}"
                )
            session._manifest = manifest
        return session

    def _write_config(self):
        (self.path / "config.json").write_text(self.config.to_json(), encoding="utf-8")

    def _write_manifest(self):
        text = json.dumps(self._manifest, indent=2, sort_keys=True) + "\n"
        (self.path / "manifest.json").write_text(text, encoding="utf-8")

    # -- locking ---------------------------------------------------------

    def lock(self):
        return _SessionLock(self.path / "session.lock")

    # -- artifact io -----------------------------------------------------

    def write_artifact(self, filename: str, text: str):
        data = text.encode("utf-8")
        (self.path / filename).write_bytes(data)
        self._manifest["artifacts"][filename] = _sha256(data)
        self._write_manifest()

    def append_artifact(self, filename: str, text: str):
        """Append + flush; used by the append-only label log."""
        path = self.path / filename
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        self._manifest["artifacts"][filename] = _sha256(path.read_bytes())
        self._write_manifest()

    def read_artifact(self, filename: str) -> str:
        path = self.path / filename
        if not path.is_file():
            raise FileNotFoundError(filename)
        data = path.read_bytes()
        recorded = self._manifest["artifacts"].get(filename)
        if recorded is not None and recorded != _sha256(data):
            raise CorruptArtifact(f"{filename}: content hash mismatch")
        return data.decode("utf-8")

    def has_artifact(self, filename: str) -> bool:
        return filename in self._manifest["artifacts"] and (self.path / filename).is_file()

    # -- stages ----------------------------------------------------------

    def stage(self) -> str | None:
        """Highest stage with an unbroken chain of artifacts behind it.

        The labeling stage is optional for stage progression past it:
        a mapping can exist from imported labels.
        """
        reached = None
        for stage in STAGES:
            present = all(self.has_artifact(f) for f in STAGE_FILES[stage])
            if stage == "labeling" and not present:
                # Labels may arrive via import right before mapping; the
                # chain is broken only if mapping is absent too.
                if self.has_artifact("mapping.json"):
                    continue
                break
            if not present:
                break
            reached = stage
        return reached

    def stage_reached(self, stage: str) -> bool:
        current = self.stage()
        if current is None:
            return False
        return stage_index(current) >= stage_index(stage)

    def require_stage(self, stage: str):
        if not self.stage_reached(stage):
            verb = STAGE_VERBS[stage]
            raise StageError(f"session is not {stage} yet: run `{verb}` first", verb)

    def invalidate_downstream(self, changed_stage: str):
        """Drop artifacts of every stage after changed_stage.

        The label log is preserved; dropping mapping.json is what flags
        labels for re-mapping.
        """
        threshold = stage_index(changed_stage)
        for stage in STAGES:
            if stage_index(stage) <= threshold or stage == "labeling":
                continue
            for filename in STAGE_FILES[stage]:
                self._manifest["artifacts"].pop(filename, None)
                target = self.path / filename
                if target.is_file():
                    target.unlink()
        self._write_manifest()

    def update_config(self, changes: dict):
        """Apply config changes and invalidate whatever they touch."""
        if not changes:
            return
        keep_through = None
        for key, value in changes.items():
            if getattr(self.config, key) == value:
                continue
            setattr(self.config, key, value)
            stage = KEY_KEEPS_THROUGH[key]
            if keep_through is None or stage_index(stage) < stage_index(keep_through):
                keep_through = stage
        self._write_config()
        if keep_through is not None:
            self.invalidate_downstream(keep_through)

    # -- corpus ------------------------------------------------------

    def save_corpus(self, records: list[ChangeRecord], issues=()):
        lines = [json.dumps(_record_to_dict(r), sort_keys=True, ensure_ascii=False)
                 for r in records]
        self.write_artifact("corpus.jsonl", "\n".join(lines) + ("\n" if lines else ""))
        report_lines = [f"{issue.change_id}\t{issue.reason}" for issue in issues]
        self.write_artifact(
            "ingest_report.txt", "\n".join(report_lines) + ("\n" if report_lines else "")
        )

    def load_corpus(self) -> list[ChangeRecord]:
        text = self.read_artifact("corpus.jsonl")
        return [_record_from_dict(json.loads(line)) for line in text.splitlines() if line]

    # -- vectors ------------------------------------------------------

    def save_vectors(self, rows: list[tuple[str, MetricVector]]):
        from .metrics import vectors_to_csv

        # Always persisted full-width; the metric selection is applied when
        # the clustering input is built, so changing it keeps this artifact.
        self.write_artifact("vectors.csv", vectors_to_csv(rows, MetricSelection()))

    def load_vectors(self) -> list[tuple[str, MetricVector]]:
        from .metrics import vectors_from_csv

        return vectors_from_csv(self.read_artifact("vectors.csv"))

    # -- clustering ----------------------------------------------------

    def save_clustering(self, selection: KSelection):
        clustering = selection.clustering
        lines = ["change_id,cluster"]
        lines += [f"{cid},{clustering.assignment[cid]}" for cid in clustering.ids]
        self.write_artifact("clustering.csv", "\n".join(lines) + "\n")
        meta = {
            "k": clustering.k,
            "iterations": clustering.iterations,
            "converged": clustering.converged,
            "density": clustering.density,
            "noop_ids": list(clustering.noop_ids),
            "centroids": [[float(x) for x in row] for row in clustering.centroids],
            "reached": selection.reached,
        }
        self.write_artifact(
            "clustering_meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n"
        )
        trace_lines = ["k\titerations\tconverged\tdensity\tsizes\tper-cluster sim (mean,min)"]
        for attempt in selection.trace:
            dispersion = " ".join(f"({m:.3f},{lo:.3f})" for m, lo in attempt.dispersion)
            trace_lines.append(
                f"{attempt.k}\t{attempt.iterations}\t{attempt.converged}"
                f"\t{attempt.density:.6f}\t{attempt.sizes}\t{dispersion}"
            )
        if not selection.reached:
            trace_lines.append("threshold not reached; returned the largest k tried")
        self.write_artifact("cluster_trace.txt", "\n".join(trace_lines) + "\n")

    def load_clustering(self) -> Clustering:
        meta = json.loads(self.read_artifact("clustering_meta.json"))
        assignment = {}
        for line in self.read_artifact("clustering.csv").splitlines()[1:]:
            if line:
                cid, cluster = line.rsplit(",", 1)
                assignment[cid] = int(cluster)
        return Clustering(
            k=meta["k"],
            ids=tuple(assignment),
            assignment=assignment,
            centroids=np.array(meta["centroids"], dtype=float),
            iterations=meta["iterations"],
            density=meta["density"],
            converged=meta["converged"],
            noop_ids=tuple(meta["noop_ids"]),
        )

    # -- labels --------------------------------------------------------

    def append_labels(self, labels):
        lines = "".join(
            f"{l.change_id}\t{l.class_name}\t{l.expert_id}\t{l.labeled_at}\n"
            for l in labels
        )
        self.append_artifact("labels.log", lines)

    def load_labels(self) -> list[ExpertLabel]:
        """Labels from the append-only log; later lines supersede earlier
        ones for the same (change, expert)."""
        if not self.has_artifact("labels.log"):
            return []
        latest = {}
        for line in self.read_artifact("labels.log").splitlines():
            if not line.strip():
                continue
            change_id, class_name, expert_id, labeled_at = line.split("\t")
            latest[(change_id, expert_id)] = ExpertLabel(
                change_id=change_id,
                class_name=class_name,
                expert_id=expert_id,
                labeled_at=int(labeled_at),
            )
        return list(latest.values())

    # -- mapping ---------------------------------------------------------

    def save_mapping(self, cmap: ClusterClassMap, representatives=None):
        data = {
            "mapping": {str(j): c for j, c in cmap.mapping.items()},
            "tallies": {str(j): t for j, t in cmap.tallies.items()},
            "unresolved": list(cmap.unresolved),
        }
        if representatives is not None:
            data["representatives"] = {str(j): ids for j, ids in representatives.items()}
        self.write_artifact("mapping.json", json.dumps(data, indent=2, sort_keys=True) + "\n")

    def load_mapping(self) -> ClusterClassMap:
        data = json.loads(self.read_artifact("mapping.json"))
        return ClusterClassMap(
            mapping={int(j): c for j, c in data["mapping"].items()},
            tallies={int(j): t for j, t in data["tallies"].items()},
            unresolved=tuple(data["unresolved"]),
        )

    # -- classified corpus ----------------------------------------------

    def save_classified(self, corpus):
        lines = ["change_id,class,provenance"]
        lines += [
            f"{cid},{corpus.classes[cid]},{corpus.provenance[cid]}"
            for cid in sorted(corpus.classes)
        ]
        self.write_artifact("classified.csv", "\n".join(lines) + "\n")

    def load_classified(self):
        from .classify import ClassifiedCorpus

        classes, provenance = {}, {}
        for line in self.read_artifact("classified.csv").splitlines()[1:]:
            if line:
                cid, class_name, prov = line.rsplit(",", 2)
                classes[cid] = class_name
                provenance[cid] = prov
        return ClassifiedCorpus(classes=classes, provenance=provenance)

    # -- report ----------------------------------------------------------

    def save_report(self, report_dict: dict, report_text: str):
        self.write_artifact(
            "report.json", json.dumps(report_dict, indent=2, sort_keys=True) + "\n"
        )
        self.write_artifact("report.txt", report_text)

    def load_report(self) -> dict:
        return json.loads(self.read_artifact("report.json"))


class _SessionLock:
    def __init__(self, path: Path):
        self.path = path
        self._fd = None

    def __enter__(self):
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise SessionLocked(f"another writer holds {self.path}") from None
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        os.close(self._fd)
        self.path.unlink(missing_ok=True)
        return False


def _record_to_dict(record: ChangeRecord) -> dict:
    return {
        "change_id": record.change_id,
        "timestamp": record.timestamp,
        "author": record.author,
        "message": record.message,
        "files": [
            {
                "path_before": fd.path_before,
                "path_after": fd.path_after,
                "is_add": fd.is_add,
                "is_delete": fd.is_delete,
                "hunks": [
                    {
                        "old_start": h.old_start,
                        "new_start": h.new_start,
                        "old_lines": list(h.old_lines),
                        "new_lines": list(h.new_lines),
                    }
                    for h in fd.hunks
                ],
            }
            for fd in record.file_diffs
        ],
    }


def _record_from_dict(data: dict) -> ChangeRecord:
    return ChangeRecord(
        change_id=data["change_id"],
        timestamp=data["timestamp"],
        author=data["author"],
        message=data["message"],
        file_diffs=[
            FileDiff(
                path_before=f["path_before"],
                path_after=f["path_after"],
                is_add=f["is_add"],
                is_delete=f["is_delete"],
                hunks=[
                    Hunk(
                        old_start=h["old_start"],
                        new_start=h["new_start"],
                        old_lines=tuple(h["old_lines"]),
                        new_lines=tuple(h["new_lines"]),
                    )
                    for h in f["hunks"]
                ],
            )
            for f in data["files"]
        ],
    )
