"""Unified-diff ingestion.

Turns raw unified-diff text into per-file hunks and per-hunk edit scripts
(added / deleted / modified lines).  Context lines are dropped at parse
time: every downstream computation depends only on the changed lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import DuplicateChangeId, MalformedDiff, UnexpectedEOF

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_BINARY_RE = re.compile(r"^(Binary files .* differ|GIT binary patch)")


@dataclass(frozen=True)
class Hunk:
    """One unified-diff hunk, reduced to its '-' and '+' payloads.

    Starts are clamped to 1 when the diff reports an empty side as 0.
    """

    old_start: int
    new_start: int
    old_lines: tuple[str, ...]
    new_lines: tuple[str, ...]


@dataclass
class FileDiff:
    path_before: str | None
    path_after: str | None
    hunks: list[Hunk] = field(default_factory=list)
    is_add: bool = False
    is_delete: bool = False

    @property
    def path(self):
        """Best display path for the file."""
        return self.path_after or self.path_before or ""


@dataclass
class ChangeRecord:
    """One repository change: identity, metadata, per-file diffs."""

    change_id: str
    timestamp: int
    author: str
    message: str
    file_diffs: list[FileDiff] = field(default_factory=list)


@dataclass(frozen=True)
class EditScript:
    """Changed lines of one hunk (or one file, after merging).

    ``modified`` holds (line_before, line_after) pairs; the pairing is
    positional inside each replacement block, so the two sides of a pair
    always differ.
    """

    added: tuple[str, ...] = ()
    deleted: tuple[str, ...] = ()
    modified: tuple[tuple[str, str], ...] = ()

    def is_empty(self):
        return not (self.added or self.deleted or self.modified)


def _lcs_pairs(old, new):
    """Matched (i, j) index pairs of a canonical maximal LCS.

    Tie-breaking is symmetric under swapping the two sequences: when both
    skip directions preserve the LCS length, the side whose current line
    sorts lower lexicographically is skipped.  Swapping arguments then
    yields the transposed pair set, which is what makes edit scripts
    reverse cleanly.
    """
    m, n = len(old), len(new)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m - 1, -1, -1):
        row, below = dp[i], dp[i + 1]
        for j in range(n - 1, -1, -1):
            if old[i] == new[j]:
                row[j] = below[j + 1] + 1
            else:
                a, b = below[j], row[j + 1]
                row[j] = a if a >= b else b
    pairs = []
    i = j = 0
    while i < m and j < n:
        if old[i] == new[j]:
            pairs.append((i, j))
            i += 1
            j += 1
        elif dp[i + 1][j] > dp[i][j + 1]:
            i += 1
        elif dp[i + 1][j] < dp[i][j + 1]:
            j += 1
        elif old[i] < new[j]:
            i += 1
        else:
            j += 1
    return pairs


def build_edit_script(hunk: Hunk) -> EditScript:
    """Minimal line-level edit script between a hunk's old and new lines.

    Lines on the LCS contribute nothing.  Between consecutive LCS matches,
    leftover old and new lines are paired positionally into ``modified``;
    the unpaired surplus becomes ``added`` or ``deleted``.
    """
    old, new = hunk.old_lines, hunk.new_lines
    boundaries = _lcs_pairs(old, new)
    boundaries.append((len(old), len(new)))
    added, deleted, modified = [], [], []
    oi = ni = 0
    for mi, mj in boundaries:
        old_block = old[oi:mi]
        new_block = new[ni:mj]
        k = min(len(old_block), len(new_block))
        modified.extend(zip(old_block[:k], new_block[:k]))
        deleted.extend(old_block[k:])
        added.extend(new_block[k:])
        oi, ni = mi + 1, mj + 1
    return EditScript(tuple(added), tuple(deleted), tuple(modified))


def file_edit_script(file_diff: FileDiff) -> EditScript:
    """Concatenation of the file's per-hunk edit scripts."""
    added, deleted, modified = [], [], []
    for hunk in file_diff.hunks:
        script = build_edit_script(hunk)
        added.extend(script.added)
        deleted.extend(script.deleted)
        modified.extend(script.modified)
    return EditScript(tuple(added), tuple(deleted), tuple(modified))


def _strip_path(raw):
    """Extract the path from a '---'/'+++' header payload."""
    path = raw.split("\t", 1)[0].strip()
    if path in ("/dev/null", ""):
        return None
    if path.startswith(("a/", "b/")):
        path = path[2:]
    return path


class _DiffParser:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0
        self.warnings = []

    def _peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def parse(self):
        files = []
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            if line.startswith("--- "):
                files.append(self._parse_file())
            elif _BINARY_RE.match(line):
                self.warnings.append(f"line {self.pos + 1}: binary file skipped")
                self._skip_binary()
            else:
                # Preamble noise: git headers, index lines, mode lines.
                self.pos += 1
        return files

    def _skip_binary(self):
        self.pos += 1
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            if line.startswith(("diff ", "--- ", "commit ")) or _BINARY_RE.match(line):
                return
            self.pos += 1

    def _parse_file(self):
        before = _strip_path(self.lines[self.pos][4:])
        self.pos += 1
        line = self._peek()
        if line is None or not line.startswith("+++ "):
            raise MalformedDiff(self.pos + 1, "expected '+++' after '---'")
        after = _strip_path(line[4:])
        self.pos += 1
        fd = FileDiff(
            path_before=before,
            path_after=after,
            is_add=before is None,
            is_delete=after is None,
        )
        while True:
            line = self._peek()
            if line is None or not line.startswith("@@"):
                break
            fd.hunks.append(self._parse_hunk(line))
        return fd

    def _parse_hunk(self, header):
        m = _HUNK_RE.match(header)
        if not m:
            raise MalformedDiff(self.pos + 1, f"bad hunk header {header!r}")
        old_start = max(int(m.group(1)), 1)
        old_count = int(m.group(2)) if m.group(2) is not None else 1
        new_start = max(int(m.group(3)), 1)
        new_count = int(m.group(4)) if m.group(4) is not None else 1
        self.pos += 1
        old_lines, new_lines = [], []
        remaining_old, remaining_new = old_count, new_count
        while remaining_old > 0 or remaining_new > 0:
            line = self._peek()
            if line is None:
                raise UnexpectedEOF(self.pos + 1)
            if line.startswith("\\"):
                # "\ No newline at end of file": annotation, not a payload.
                self.pos += 1
                continue
            if line.startswith("-"):
                old_lines.append(line[1:])
                remaining_old -= 1
            elif line.startswith("+"):
                new_lines.append(line[1:])
                remaining_new -= 1
            elif line.startswith(" ") or line == "":
                remaining_old -= 1
                remaining_new -= 1
            else:
                raise MalformedDiff(self.pos + 1, f"unexpected line in hunk: {line!r}")
            if remaining_old < 0 or remaining_new < 0:
                raise MalformedDiff(self.pos + 1, "hunk longer than its header declares")
            self.pos += 1
        return Hunk(old_start, new_start, tuple(old_lines), tuple(new_lines))


def parse_unified_diff(text: str) -> list[FileDiff]:
    """Parse unified-diff text into FileDiffs.

    Empty input yields an empty list.  Binary-file markers are skipped.
    Raises MalformedDiff / UnexpectedEOF on structural damage.
    """
    return _DiffParser(text).parse()


@dataclass(frozen=True)
class ChangeMeta:
    change_id: str
    timestamp: int = 0
    author: str = ""
    message: str = ""


@dataclass
class IngestIssue:
    change_id: str
    reason: str


@dataclass
class IngestResult:
    records: list[ChangeRecord]
    issues: list[IngestIssue]


def ingest_history(source: Iterable[tuple[ChangeMeta, str]]) -> IngestResult:
    """Parse a stream of (metadata, diff text) into ChangeRecords.

    Records come back sorted by timestamp (stable).  Parse failures skip
    the offending change and land in the issue list instead of raising;
    duplicate change ids are a caller bug and do raise.
    """
    seen = set()
    records, issues = [], []
    for meta, text in source:
        if meta.change_id in seen:
            raise DuplicateChangeId(meta.change_id)
        seen.add(meta.change_id)
        try:
            parser = _DiffParser(text)
            file_diffs = parser.parse()
        except MalformedDiff as exc:
            issues.append(IngestIssue(meta.change_id, str(exc)))
            continue
        for warning in parser.warnings:
            issues.append(IngestIssue(meta.change_id, warning))
        records.append(
            ChangeRecord(
                change_id=meta.change_id,
                timestamp=meta.timestamp,
                author=meta.author,
                message=meta.message,
                file_diffs=file_diffs,
            )
        )
    records.sort(key=lambda r: r.timestamp)
    return IngestResult(records, issues)


def read_history_text(text: str) -> list[tuple[ChangeMeta, str]]:
    """Split a batch history file into (metadata, diff text) pairs.

    Each change starts with a ``commit <id>`` line, optionally followed by
    ``author <name>``, ``date <unix seconds>`` and ``message <subject>``
    lines; everything until the next ``commit`` line is its diff.
    """
    changes = []
    head = None
    diff_lines = []

    def flush():
        if head is not None:
            meta = ChangeMeta(
                change_id=head["id"],
                timestamp=head["date"] if head["date"] is not None else len(changes),
                author=head["author"],
                message=head["message"],
            )
            changes.append((meta, "\n".join(diff_lines) + ("\n" if diff_lines else "")))

    for raw in text.splitlines():
        if raw.startswith("commit "):
            flush()
            head = {"id": raw[7:].strip(), "date": None, "author": "", "message": ""}
            diff_lines = []
        elif head is None:
            continue
        elif not diff_lines and raw.startswith("author "):
            head["author"] = raw[7:].strip()
        elif not diff_lines and raw.startswith("date "):
            head["date"] = int(raw[5:].strip())
        elif not diff_lines and raw.startswith("message "):
            head["message"] = raw[8:]
        elif diff_lines or raw.strip():
            diff_lines.append(raw)
    flush()
    return changes


def read_diff_directory(path) -> list[tuple[ChangeMeta, str]]:
    """Read a ``<change_id>.diff`` directory layout, sorted by filename.

    Files may start with the same optional header block as the batch
    format; otherwise the filename stem is the id and timestamps follow
    file order.
    """
    from pathlib import Path

    changes = []
    for order, f in enumerate(sorted(Path(path).glob("*.diff"))):
        text = f.read_text(encoding="utf-8")
        if text.startswith("commit "):
            changes.extend(read_history_text(text))
        else:
            changes.append((ChangeMeta(change_id=f.stem, timestamp=order), text))
    return changes
