"""Exception hierarchy for eikonet.

Input problems (bad documents, bad geometry, bad configuration) derive from
``InputError``; the command line maps them to exit status 2. Everything else
is a computational failure and maps to exit status 1.
"""

from __future__ import annotations

from typing import Any


class EikonetError(Exception):
    """Base class of every error raised by the package."""

    exit_status = 1

    def to_payload(self) -> dict[str, Any]:
        return {"error": str(self), "type": type(self).__name__}


class InputError(EikonetError):
    exit_status = 2


class ConfigError(InputError):
    pass


class NetworkDocumentError(InputError):
    pass


class NonRegularArc(InputError):
    pass


class OverlapViolation(InputError):
    pass


class Disconnected(InputError):
    pass


class EndpointMismatch(InputError):
    pass


class UnknownArc(InputError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class ParameterOutOfRange(InputError, ValueError):
    pass


class TraceConflict(InputError):
    pass


class EmptyTrace(InputError):
    pass


class NumericalError(EikonetError):
    pass


class BracketFailure(NumericalError):
    pass


class TableOutOfRange(NumericalError):
    pass


class UndefinedSigma(NumericalError):
    pass


class GraphError(EikonetError):
    pass


class NegativeCycleDetected(GraphError):
    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness

    def to_payload(self) -> dict[str, Any]:
        payload = super().to_payload()
        if self.witness is not None:
            payload["witness"] = self.witness.model_dump(mode="json")
        return payload


class NoAdmissiblePath(GraphError):
    pass


class ExplosionGuard(GraphError):
    pass


class EmptyAubry(GraphError):
    pass


class InadmissibleTrace(EikonetError):
    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report

    def to_payload(self) -> dict[str, Any]:
        payload = super().to_payload()
        if self.report is not None:
            payload["report"] = self.report.model_dump(mode="json")
        return payload


class ComparisonViolation(EikonetError):
    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness
