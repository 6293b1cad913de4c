"""Command-line pipeline driver.

One verb per pipeline step: init, ingest, measure, cluster, label, map,
classify, evaluate, report.  Config-mirroring flags persist into the
session config, so a session directory is always self-describing.
Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from collections import Counter
from pathlib import Path

from .classify import (
    ExpertLabel,
    build_verification_set,
    classify_all,
    map_clusters_to_classes,
    select_representatives,
)
from .clustering import ClusterParams, VectorSet, select_k
from .diffs import file_edit_script, ingest_history, read_diff_directory, read_history_text
from .errors import ChangeClassError, StageError, UnknownClassName
from .evaluate import build_quality_report, render_report_text, report_to_dict
from .lexing import resolve_profile
from .metrics import compute_metric_vector, vectors_to_csv
from .session import Session, SessionConfig

SESSION_ENV = "CHANGECLASS_SESSION"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(value):
    return tuple(item.strip() for item in value.split(",") if item.strip())


def _ext_map(value):
    pairs = {}
    for item in value.split(","):
        if not item.strip():
            continue
        ext, _, profile = item.partition("=")
        if not profile:
            raise UsageError(f"bad extension mapping {item!r}; use ext=profile")
        pairs[ext.strip().lstrip(".").lower()] = profile.strip()
    return pairs


CONFIG_FLAGS = (
    # (flag, config key, parser kwargs)
    ("--metrics", "metrics", dict(type=_csv_list, metavar="NAMES")),
    ("--default-profile", "default_profile", dict(metavar="NAME")),
    ("--ext-map", "extension_profiles", dict(type=_ext_map, metavar="EXT=PROFILE,..")),
    ("--profile-dir", "profile_dir", dict(metavar="DIR")),
    ("--k-min", "k_start", dict(type=int, metavar="K")),
    ("--k-max", "k_max", dict(type=int, metavar="K")),
    ("--i-min", "min_density", dict(type=float, metavar="X")),
    ("--max-iterations", "max_iterations", dict(type=int, metavar="N")),
    ("--zero-policy", "zero_vector_policy", dict(choices=["exclude", "own_cluster"])),
    ("--reps", "representatives", dict(type=int, metavar="R")),
    ("--resample-m", "resample_parts", dict(type=int, metavar="M")),
    ("--alpha", "alpha", dict(type=float, metavar="A")),
    ("--p-min", "purity_min", dict(type=float, metavar="P")),
    ("--e-max", "entropy_max", dict(type=float, metavar="E")),
    ("--seed", "seed", dict(type=int, metavar="N")),
)


def _add_common(parser):
    parser.add_argument("--session", "-s", metavar="DIR",
                        help=f"session directory (default: ${SESSION_ENV})")
    for flag, key, kwargs in CONFIG_FLAGS:
        parser.add_argument(flag, dest=key, default=None, **kwargs)


def build_parser():
    parser = _Parser(prog="changeclass", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("init", help="create a session")
    p.add_argument("--classes", type=_csv_list, required=True, metavar="A,B,..")
    _add_common(p)

    p = sub.add_parser("ingest", help="parse diff history into the session")
    p.add_argument("source", help="history file or directory of <id>.diff files")
    _add_common(p)

    p = sub.add_parser("measure", help="compute metric vectors")
    p.add_argument("--export", choices=["csv", "text"])
    _add_common(p)

    p = sub.add_parser("cluster", help="cluster metric vectors")
    p.add_argument("--export", choices=["csv", "text"])
    _add_common(p)

    p = sub.add_parser("label", help="serve the labeling UI or import labels")
    p.add_argument("--import", dest="import_file", metavar="FILE",
                   help="batch-import labels (CSV/TSV: change_id,class,expert[,at])")
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--static-dir", metavar="DIR", help="built UI assets to serve at /")
    _add_common(p)

    p = sub.add_parser("map", help="map clusters to classes from expert labels")
    _add_common(p)

    p = sub.add_parser("classify", help="classify the whole corpus")
    _add_common(p)

    p = sub.add_parser("evaluate", help="verification-set quality report")
    p.add_argument("--verif", metavar="FILE", help="verification CSV (change_id,class)")
    p.add_argument("--experts", type=_csv_list, metavar="A,B",
                   help="build the verification set from these two experts' labels")
    _add_common(p)

    p = sub.add_parser("report", help="print the saved quality report")
    p.add_argument("--export", choices=["csv", "text"])
    _add_common(p)

    return parser


def _session_dir(args) -> Path:
    path = args.session or os.environ.get(SESSION_ENV)
    if not path:
        raise UsageError(f"no session directory: pass --session or set ${SESSION_ENV}")
    return Path(path)


def _config_changes(args) -> dict:
    return {
        key: getattr(args, key)
        for _, key, _kw in CONFIG_FLAGS
        if getattr(args, key) is not None
    }


def _open_session(args) -> Session:
    session = Session.open(_session_dir(args))
    session.update_config(_config_changes(args))
    return session


def run(argv) -> int:
    args = build_parser().parse_args(argv)
    return HANDLERS[args.verb](args)


def main(argv=None) -> int:
    try:
        return run(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ChangeClassError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception:  # internal error
        import traceback

        traceback.print_exc()
        return 2


# -- verbs ----------------------------------------------------------------


def cmd_init(args) -> int:
    config = SessionConfig(classes=args.classes)
    for _, key, _kw in CONFIG_FLAGS:
        value = getattr(args, key)
        if value is not None:
            setattr(config, key, value)
    config.class_set()  # validate
    config.metric_selection()
    Session.init(_session_dir(args), config)
    print(f"session created at {_session_dir(args)} with classes {', '.join(config.classes)}")
    return 0


def cmd_ingest(args) -> int:
    session = _open_session(args)
    source = Path(args.source)
    if source.is_dir():
        stream = read_diff_directory(source)
    elif source.is_file():
        stream = read_history_text(source.read_text(encoding="utf-8"))
    else:
        raise UsageError(f"no such history source: {source}")
    with session.lock():
        result = ingest_history(stream)
        session.save_corpus(result.records, result.issues)
        session.invalidate_downstream("ingested")
    print(f"ingested {len(result.records)} changes ({len(result.issues)} issues)")
    for issue in result.issues:
        print(f"  issue: {issue.change_id}: {issue.reason}")
    return 0


def _profile_for(record, config, cache):
    votes = Counter()
    for fd in record.file_diffs:
        ext = Path(fd.path).suffix.lstrip(".").lower()
        if ext in config.extension_profiles:
            votes[config.extension_profiles[ext]] += 1
    name = config.default_profile
    if votes:
        top = votes.most_common()
        if len(top) == 1 or top[0][1] > top[1][1]:
            name = top[0][0]
    if name not in cache:
        cache[name] = resolve_profile(name, config.profile_dir)
    return cache[name]


def cmd_measure(args) -> int:
    session = _open_session(args)
    session.require_stage("ingested")
    config = session.config
    cache = {}
    rows = []
    with session.lock():
        for record in session.load_corpus():
            profile = _profile_for(record, config, cache)
            scripts = [file_edit_script(fd) for fd in record.file_diffs]
            rows.append((record.change_id, compute_metric_vector(record, scripts, profile)))
        session.save_vectors(rows)
        session.invalidate_downstream("measured")
    zero = sum(1 for _, v in rows if v.is_zero())
    print(f"measured {len(rows)} changes ({zero} no-op)")
    if args.export == "csv":
        print(vectors_to_csv(rows, config.metric_selection()), end="")
    return 0


def _vector_set(session) -> VectorSet:
    selection = session.config.metric_selection()
    rows = session.load_vectors()
    return VectorSet(
        ids=tuple(cid for cid, _ in rows),
        matrix=[selection.project(v) for _, v in rows],
        metric_names=selection.names,
    )


def cmd_cluster(args) -> int:
    session = _open_session(args)
    session.require_stage("measured")
    config = session.config
    vs = _vector_set(session)
    params = ClusterParams(
        k=config.effective_k_start(),
        max_iterations=config.max_iterations,
        rng_seed=config.seed,
        zero_vector_policy=config.zero_vector_policy,
    )
    with session.lock():
        selection = select_k(
            vs,
            n_classes=config.effective_k_start(),
            min_density=config.min_density,
            k_max=config.effective_k_max(),
            params=params,
        )
        session.save_clustering(selection)
        session.invalidate_downstream("clustered")
    c = selection.clustering
    status = "reached" if selection.reached else "NOT reached (largest k returned)"
    print(
        f"clustered into k={c.k} (density {c.density:.4f}, threshold {status}, "
        f"{c.iterations} iterations, {len(c.noop_ids)} no-op changes set aside)"
    )
    if args.export == "csv":
        print("change_id,cluster")
        for cid in c.ids:
            print(f"{cid},{c.assignment[cid]}")
    if args.export == "text":
        print(session.read_artifact("cluster_trace.txt"), end="")
    return 0


def _read_label_file(path, classes) -> list[ExpertLabel]:
    text = Path(path).read_text(encoding="utf-8")
    dialect = "\t" if "\t" in text.splitlines()[0] else ","
    labels = []
    for row in csv.reader(io.StringIO(text), delimiter=dialect):
        if not row or row[0].strip() in ("", "change_id"):
            continue
        if len(row) < 3:
            raise UsageError(f"label row needs change_id,class,expert: {row}")
        change_id, class_name, expert = (cell.strip() for cell in row[:3])
        if class_name not in classes:
            raise UnknownClassName(class_name)
        labeled_at = int(row[3]) if len(row) > 3 and row[3].strip() else 0
        labels.append(ExpertLabel(change_id, class_name, expert, labeled_at))
    return labels


def cmd_label(args) -> int:
    session = _open_session(args)
    session.require_stage("clustered")
    if args.import_file:
        labels = _read_label_file(args.import_file, session.config.class_set())
        clustering = session.load_clustering()
        known = set(clustering.assignment) | set(clustering.noop_ids)
        unknown = [l.change_id for l in labels if l.change_id not in known]
        if unknown:
            raise UsageError(f"labels reference unknown changes: {unknown[:5]}")
        with session.lock():
            session.append_labels(labels)
        print(f"imported {len(labels)} labels")
        return 0
    from .labelserver import serve

    server = serve(session, bind=args.bind, port=args.port, static_dir=args.static_dir)
    print(f"labeling service at http://{server.address[0]}:{server.address[1]}/")
    print("press Ctrl-C to stop")
    try:
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def cmd_map(args) -> int:
    session = _open_session(args)
    session.require_stage("clustered")
    labels = session.load_labels()
    if not labels:
        raise StageError("no labels recorded yet: run `label` first", "label")
    clustering = session.load_clustering()
    cmap = map_clusters_to_classes(clustering, labels, session.config.class_set())
    if not cmap.resolved:
        print(
            "unresolved clusters (need more labels): "
            + ", ".join(str(j) for j in cmap.unresolved),
            file=sys.stderr,
        )
        return 1
    reps = select_representatives(clustering, _vector_set(session),
                                  session.config.representatives)
    with session.lock():
        session.save_mapping(cmap, representatives=reps)
        session.invalidate_downstream("mapped")
    pairs = ", ".join(f"{j}->{cmap.mapping[j]}" for j in sorted(cmap.mapping))
    print(f"mapped {clustering.k} clusters: {pairs}")
    return 0


def cmd_classify(args) -> int:
    session = _open_session(args)
    session.require_stage("mapped")
    clustering = session.load_clustering()
    cmap = session.load_mapping()
    corpus = classify_all(
        clustering,
        cmap,
        noop_ids=clustering.noop_ids,
        labels=session.load_labels(),
        noop_class=session.config.noop_class,
    )
    with session.lock():
        session.save_classified(corpus)
        session.invalidate_downstream("classified")
    counts = corpus.counts()
    summary = ", ".join(f"{name}: {counts[name]}" for name in sorted(counts))
    print(f"classified {len(corpus)} changes ({summary})")
    return 0


def _verification_pairs(session, args) -> list[tuple[str, str]]:
    if args.verif:
        pairs = []
        text = Path(args.verif).read_text(encoding="utf-8")
        for row in csv.reader(io.StringIO(text)):
            if not row or row[0].strip() in ("", "change_id"):
                continue
            pairs.append((row[0].strip(), row[1].strip()))
        return pairs
    labels = session.load_labels()
    by_expert = {}
    for label in labels:
        by_expert.setdefault(label.expert_id, []).append(label)
    experts = args.experts or tuple(sorted(by_expert))
    if len(experts) == 2:
        vset = build_verification_set(by_expert.get(experts[0], []),
                                      by_expert.get(experts[1], []))
        print(
            f"verification set: {len(vset.pairs)} agreed, "
            f"{len(vset.disagreements)} disagreements excluded"
        )
        return vset.pairs
    if len(experts) == 1:
        only = by_expert[experts[0]]
        print(f"verification set: {len(only)} single-expert labels (no cross-check)")
        return sorted((l.change_id, l.class_name) for l in only)
    raise UsageError(
        "cannot build a verification set: pass --verif FILE or --experts A,B"
    )


def cmd_evaluate(args) -> int:
    session = _open_session(args)
    session.require_stage("classified")
    config = session.config
    clustering = session.load_clustering()
    cmap = session.load_mapping()
    pairs = _verification_pairs(session, args)
    noop = set(clustering.noop_ids)
    pairs = [(cid, cls) for cid, cls in pairs if cid not in noop]
    report = build_quality_report(
        clustering,
        cmap,
        pairs,
        config.class_set(),
        parts=config.resample_parts,
        alpha=config.alpha,
        seed=config.seed,
        purity_min=config.purity_min,
        entropy_max=config.entropy_max,
    )
    text = render_report_text(report)
    with session.lock():
        session.save_report(report_to_dict(report), text)
        # evaluate is the final stage; nothing downstream to invalidate
    print(text, end="")
    return 0


def cmd_report(args) -> int:
    session = _open_session(args)
    session.require_stage("evaluated")
    if args.export == "csv":
        data = session.load_report()
        print("cluster,mapped_class," + ",".join(data["class_names"]) + ",total,purity,entropy")
        for row in data["contingency"]:
            print(
                f"{row['cluster']},{row['mapped_class']},"
                + ",".join(str(c) for c in row["counts"])
                + f",{row['total']},{row['purity']:.4f},{row['entropy']:.4f}"
            )
        return 0
    print(session.read_artifact("report.txt"), end="")
    return 0


HANDLERS = {
    "init": cmd_init,
    "ingest": cmd_ingest,
    "measure": cmd_measure,
    "cluster": cmd_cluster,
    "label": cmd_label,
    "map": cmd_map,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


if __name__ == "__main__":
    sys.exit(main())
