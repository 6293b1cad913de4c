"""Exception types shared across the toolkit."""


class ChangeClassError(Exception):
    """Base class for all toolkit errors."""


class MalformedDiff(ChangeClassError):
    """A diff line could not be parsed."""

    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class UnexpectedEOF(MalformedDiff):
    """A hunk was truncated before all declared lines appeared."""

    def __init__(self, line_no, reason="unexpected end of diff inside hunk"):
        super().__init__(line_no, reason)


class DuplicateChangeId(ChangeClassError):
    pass


class ProfileMissing(ChangeClassError):
    """Lexer profile lacks the lexeme sets needed for metric extraction."""


class DimensionMismatch(ChangeClassError):
    pass


class TooFewVectors(ChangeClassError):
    pass


class InconsistentClustering(ChangeClassError):
    """Clustering and vector set disagree about which changes exist."""


class UnknownClassName(ChangeClassError):
    pass


class LabelForUnknownChange(ChangeClassError):
    pass


class SameExpert(ChangeClassError):
    pass


class UnresolvedClusters(ChangeClassError):
    def __init__(self, clusters):
        super().__init__(f"unresolved clusters: {sorted(clusters)}")
        self.clusters = tuple(sorted(clusters))


class UnclusteredVerificationChange(ChangeClassError):
    pass


class EmptyVerificationSet(ChangeClassError):
    pass


class TooFewForResampling(ChangeClassError):
    pass


class VersionMismatch(ChangeClassError):
    pass


class CorruptArtifact(ChangeClassError):
    pass


class SessionLocked(ChangeClassError):
    pass


class StageError(ChangeClassError):
    """A pipeline verb ran before its prerequisite stage was reached."""

    def __init__(self, message, missing_verb=None):
        super().__init__(message)
        self.missing_verb = missing_verb


class AddressInUse(ChangeClassError):
    pass
