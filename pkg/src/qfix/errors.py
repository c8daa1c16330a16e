"""Shared exception types."""


class QfixError(Exception):
    pass


class SchemaMismatch(QfixError):
    pass


class UnknownTarget(QfixError):
    pass


class InconsistentComplaints(QfixError):
    pass


class QuerySyntaxError(QfixError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class UnknownAttribute(QfixError):
    pass


class NonLinearExpression(QfixError):
    pass


class DuplicateInsertId(QfixError):
    pass


class ModelMalformed(QfixError):
    pass


class BilinearTerm(QfixError):
    pass


class ParamOnLHS(QfixError):
    pass


class UnknownComplaintTarget(QfixError):
    pass


class DirtyReplayMismatch(QfixError):
    pass


class NoRepairFound(QfixError):
    pass


class Underdetermined(QfixError):
    pass
