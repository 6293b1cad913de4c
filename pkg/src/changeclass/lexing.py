"""Line lexing under per-language profiles.

A line is reduced to a lexeme sequence: maximal runs of word characters
become word lexemes, everything else becomes symbol lexemes.  Multi-char
symbol lexemes declared by the profile (e.g. ``&&``) are matched longest
first so they count as single control-flow constructs.  String literals
and comments yield nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class LexerProfile:
    name: str
    control_flow_lexemes: frozenset[str]
    interface_decl_lexemes: frozenset[str]
    type_decl_lexemes: frozenset[str]
    line_comment_prefixes: tuple[str, ...] = ()
    block_comment_delimiters: tuple[tuple[str, str], ...] = ()
    string_delimiters: tuple[str, ...] = ()
    word_alnum: bool = True
    word_extra: frozenset[str] = frozenset("_")

    def __post_init__(self):
        overlap = self.control_flow_lexemes & self.type_decl_lexemes
        if overlap:
            raise ValueError(
                f"profile {self.name!r}: control-flow and type-declaration "
                f"lexemes overlap: {sorted(overlap)}"
            )

    def is_word_char(self, c: str) -> bool:
        return (self.word_alnum and c.isalnum()) or c in self.word_extra

    @property
    def multi_char_symbols(self) -> tuple[str, ...]:
        """Profile-declared symbol lexemes longer than one char, longest first."""
        pool = self.control_flow_lexemes | self.interface_decl_lexemes | self.type_decl_lexemes
        multi = [
            lx for lx in pool
            if len(lx) > 1 and not any(self.is_word_char(c) for c in lx)
        ]
        return tuple(sorted(multi, key=lambda s: (-len(s), s)))

    def is_usable(self) -> bool:
        return bool(
            self.control_flow_lexemes
            and self.interface_decl_lexemes
            and self.type_decl_lexemes
        )


def lex_line(line: str, profile: LexerProfile) -> list[str]:
    """Lexemes of one source line.

    Unterminated strings and block comments run to end of line.  Lexing is
    line-local: a block comment left open on a previous line is not seen.
    """
    tokens = []
    multi_symbols = profile.multi_char_symbols
    i, n = 0, len(line)
    while i < n:
        rest = line[i:]
        prefix = next((p for p in profile.line_comment_prefixes if rest.startswith(p)), None)
        if prefix is not None:
            break
        opener = next(
            (pair for pair in profile.block_comment_delimiters if rest.startswith(pair[0])),
            None,
        )
        if opener is not None:
            close = line.find(opener[1], i + len(opener[0]))
            if close == -1:
                break
            i = close + len(opener[1])
            continue
        c = line[i]
        if c in profile.string_delimiters:
            i += 1
            while i < n:
                if line[i] == "\\":
                    i += 2
                elif line[i] == c:
                    i += 1
                    break
                else:
                    i += 1
            continue
        if profile.is_word_char(c):
            j = i + 1
            while j < n and profile.is_word_char(line[j]):
                j += 1
            tokens.append(line[i:j])
            i = j
            continue
        if c.isspace():
            i += 1
            continue
        sym = next((s for s in multi_symbols if rest.startswith(s)), None)
        if sym is not None:
            tokens.append(sym)
            i += len(sym)
        else:
            tokens.append(c)
            i += 1
    return tokens


def cc_of_line(line: str, profile: LexerProfile) -> int:
    """Simplified per-line cyclomatic complexity: control-flow lexeme count."""
    cf = profile.control_flow_lexemes
    return sum(1 for tok in lex_line(line, profile) if tok in cf)


_LIST_KEYS = {
    "control_flow": "control_flow_lexemes",
    "interface_decl": "interface_decl_lexemes",
    "type_decl": "type_decl_lexemes",
}


def parse_profile_text(text: str, name_hint: str = "") -> LexerProfile:
    """Parse the key/value profile file format.

    Lines are ``key = tokens...``; ``#`` starts a comment.  See the
    bundled profiles for the accepted keys.
    """
    fields: dict = {
        "name": name_hint,
        "control_flow_lexemes": frozenset(),
        "interface_decl_lexemes": frozenset(),
        "type_decl_lexemes": frozenset(),
        "line_comment_prefixes": (),
        "block_comment_delimiters": (),
        "string_delimiters": (),
        "word_alnum": True,
        "word_extra": frozenset(),
    }
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"profile line without '=': {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        items = value.split()
        if key == "name":
            fields["name"] = value.strip()
        elif key in _LIST_KEYS:
            fields[_LIST_KEYS[key]] = frozenset(items)
        elif key == "line_comment":
            fields["line_comment_prefixes"] = tuple(items)
        elif key == "block_comment":
            if len(items) % 2:
                raise ValueError("block_comment needs open/close pairs")
            fields["block_comment_delimiters"] = tuple(
                (items[i], items[i + 1]) for i in range(0, len(items), 2)
            )
        elif key == "strings":
            if any(len(d) != 1 for d in items):
                raise ValueError("string delimiters must be single characters")
            fields["string_delimiters"] = tuple(items)
        elif key == "word_chars":
            fields["word_alnum"] = "alnum" in items
            fields["word_extra"] = frozenset(c for tok in items if tok != "alnum" for c in tok)
        else:
            raise ValueError(f"unknown profile key {key!r}")
    return LexerProfile(**fields)


def load_profile(path) -> LexerProfile:
    path = Path(path)
    return parse_profile_text(path.read_text(encoding="utf-8"), name_hint=path.stem)


def builtin_profile_names() -> list[str]:
    from importlib import resources

    pkg = resources.files(__package__) / "profiles"
    return sorted(p.name[: -len(".profile")] for p in pkg.iterdir() if p.name.endswith(".profile"))


def load_builtin_profile(name: str) -> LexerProfile:
    from importlib import resources

    res = resources.files(__package__) / "profiles" / f"{name}.profile"
    if not res.is_file():
        raise FileNotFoundError(f"no builtin profile {name!r}; have {builtin_profile_names()}")
    return parse_profile_text(res.read_text(encoding="utf-8"), name_hint=name)


def resolve_profile(name: str, profile_dir=None) -> LexerProfile:
    """Load a profile by name, preferring files in profile_dir."""
    if profile_dir is not None:
        candidate = Path(profile_dir) / f"{name}.profile"
        if candidate.is_file():
            return load_profile(candidate)
    return load_builtin_profile(name)
