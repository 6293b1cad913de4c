"""The 11 change metrics.

Per change: lines added / deleted / modified, per-line cyclomatic
complexity of added / deleted code and the complexity delta of modified
pairs, files touched, and interface / class-or-struct declaration
counters.  All of it is pure lexeme counting over edit scripts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .diffs import ChangeRecord, EditScript
from .errors import ProfileMissing
from .lexing import LexerProfile, cc_of_line, lex_line

METRIC_NAMES = (
    "loc_add",
    "loc_del",
    "loc_mod",
    "cc_add",
    "cc_del",
    "cc_mod",
    "files_mod",
    "iface_add",
    "iface_del",
    "cs_add",
    "cs_del",
)


@dataclass(frozen=True)
class MetricVector:
    loc_add: int = 0
    loc_del: int = 0
    loc_mod: int = 0
    cc_add: int = 0
    cc_del: int = 0
    cc_mod: int = 0  # may be negative: delta over modified pairs
    files_mod: int = 0
    iface_add: int = 0
    iface_del: int = 0
    cs_add: int = 0
    cs_del: int = 0

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in METRIC_NAMES)

    def is_zero(self) -> bool:
        return not any(self.as_tuple())


@dataclass(frozen=True)
class MetricSelection:
    """Ordered subset of metric names; fixes vector dimensionality and order."""

    names: tuple[str, ...] = METRIC_NAMES

    def __post_init__(self):
        if not self.names:
            raise ValueError("metric selection must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate metric names in selection")
        unknown = set(self.names) - set(METRIC_NAMES)
        if unknown:
            raise ValueError(f"unknown metric names: {sorted(unknown)}")

    @property
    def dim(self) -> int:
        return len(self.names)

    def project(self, vector: MetricVector) -> tuple[int, ...]:
        return tuple(getattr(vector, name) for name in self.names)


def _decl_counts(tokens, decl_set) -> Counter:
    counts = Counter()
    for tok in tokens:
        if tok in decl_set:
            counts[tok] += 1
    return counts


def _pair_decl_delta(before_toks, after_toks, decl_set) -> tuple[int, int]:
    """(added, deleted) declarator occurrences across one modified pair."""
    delta = _decl_counts(after_toks, decl_set)
    delta.subtract(_decl_counts(before_toks, decl_set))
    plus = sum(d for d in delta.values() if d > 0)
    minus = -sum(d for d in delta.values() if d < 0)
    return plus, minus


def compute_metric_vector(
    change: ChangeRecord,
    scripts: list[EditScript],
    profile: LexerProfile,
) -> MetricVector:
    """All 11 metrics for one change.

    ``scripts`` must align one-to-one with ``change.file_diffs``.  Modified
    pairs feed the declaration counters through their per-lexeme delta: a
    declarator appearing more often on the new side counts as added, more
    often on the old side as deleted.
    """
    if not profile.is_usable():
        raise ProfileMissing(
            f"profile {profile.name!r} is missing one of the lexeme sets"
        )
    if len(scripts) != len(change.file_diffs):
        raise ValueError(
            f"{change.change_id}: {len(scripts)} scripts for "
            f"{len(change.file_diffs)} file diffs"
        )

    loc_add = loc_del = loc_mod = 0
    cc_add = cc_del = cc_mod = 0
    files_mod = 0
    iface_add = iface_del = cs_add = cs_del = 0
    iface_set = profile.interface_decl_lexemes
    cs_set = profile.type_decl_lexemes

    for script in scripts:
        if script.is_empty():
            continue
        files_mod += 1
        loc_add += len(script.added)
        loc_del += len(script.deleted)
        loc_mod += len(script.modified)
        for line in script.added:
            tokens = lex_line(line, profile)
            cc_add += sum(1 for t in tokens if t in profile.control_flow_lexemes)
            iface_add += sum(1 for t in tokens if t in iface_set)
            cs_add += sum(1 for t in tokens if t in cs_set)
        for line in script.deleted:
            tokens = lex_line(line, profile)
            cc_del += sum(1 for t in tokens if t in profile.control_flow_lexemes)
            iface_del += sum(1 for t in tokens if t in iface_set)
            cs_del += sum(1 for t in tokens if t in cs_set)
        for before, after in script.modified:
            cc_mod += cc_of_line(after, profile) - cc_of_line(before, profile)
            before_toks = lex_line(before, profile)
            after_toks = lex_line(after, profile)
            plus, minus = _pair_decl_delta(before_toks, after_toks, iface_set)
            iface_add += plus
            iface_del += minus
            plus, minus = _pair_decl_delta(before_toks, after_toks, cs_set)
            cs_add += plus
            cs_del += minus

    return MetricVector(
        loc_add=loc_add,
        loc_del=loc_del,
        loc_mod=loc_mod,
        cc_add=cc_add,
        cc_del=cc_del,
        cc_mod=cc_mod,
        files_mod=files_mod,
        iface_add=iface_add,
        iface_del=iface_del,
        cs_add=cs_add,
        cs_del=cs_del,
    )


def vectors_to_csv(rows: list[tuple[str, MetricVector]], selection: MetricSelection) -> str:
    """CSV text with header ``change_id`` + the selection's metric order."""
    lines = ["change_id," + ",".join(selection.names)]
    for change_id, vector in rows:
        lines.append(change_id + "," + ",".join(str(v) for v in selection.project(vector)))
    return "\n".join(lines) + "\n"


def vectors_from_csv(text: str) -> list[tuple[str, MetricVector]]:
    """Inverse of vectors_to_csv for full-width (all 11 columns) files."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header[0] != "change_id":
        raise ValueError("vectors CSV must start with a change_id column")
    names = tuple(header[1:])
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        values = dict(zip(names, (int(v) for v in parts[1:])))
        rows.append((parts[0], MetricVector(**values)))
    return rows
