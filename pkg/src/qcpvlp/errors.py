"""Exception hierarchy shared by all solver modules."""


class QcpError(Exception):
    """Base class for every error raised by qcpvlp."""


class EmptyPolyhedronError(QcpError):
    pass


class NotPointedError(QcpError):
    """Raised when an operation needs a pointed polyhedron or cone."""


class NonSolidConeError(QcpError):
    """The ordering cone has empty interior; route through the lifting."""


class LpFailure(QcpError):
    """An LP solve ended in a status the caller could not accept."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class AssumptionError(QcpError):
    """A modelling assumption (feasibility, C-boundedness, ...) is violated."""


class ContractError(QcpError):
    """The objective broke its contract, e.g. returned +inf at a vertex."""


class GeometricDualityError(QcpError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
