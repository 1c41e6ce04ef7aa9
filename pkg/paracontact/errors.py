"""Exception hierarchy shared by every paracontact module."""

from __future__ import annotations


class ParacontactError(Exception):
    """Base class; the CLI maps anything below it to a non-zero exit."""


class ConfigError(ParacontactError):
    pass


class JetError(ParacontactError):
    """Dimension mismatch or seed index out of range."""


class JetDomainError(JetError):
    """ln/sqrt/pow/division evaluated outside its domain."""


class ExprSyntaxError(ParacontactError):
    def __init__(self, message: str, line: int = 1, column: int = 1) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.reason = message
        self.line = line
        self.column = column


class SpecFormatError(ParacontactError):
    def __init__(self, message: str, line: int | None = None) -> None:
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.reason = message
        self.line = line


class UnknownBuiltinError(ParacontactError):
    pass


class FrameError(ParacontactError):
    """The moving frame cannot be assembled or decomposed at a point."""

    def __init__(self, message: str, point=None) -> None:
        if point is not None:
            message = f"{message} at u={_fmt_point(point)}"
        super().__init__(message)
        self.point = point


class OutsideDomainError(FrameError):
    """A point lies outside the immersion's domain box."""


class RankDeficiencyError(FrameError):
    pass


class TransversalityError(FrameError):
    pass


class NotJTangentError(FrameError):
    pass


class EigensplitError(FrameError):
    pass


class GaugeError(ParacontactError):
    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class QuadratureError(GaugeError):
    pass


class FamilyError(ParacontactError):
    pass


def _fmt_point(point) -> str:
    return "(" + ", ".join(f"{float(c):.6g}" for c in point) + ")"
