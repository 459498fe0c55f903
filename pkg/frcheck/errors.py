"""
Exceptions raised by frcheck
"""


class FrcheckError(ValueError):
    """Base class for frcheck errors"""


class BranchCutError(FrcheckError):
    """A complex power was requested at a base on the closed negative real axis"""


class RangeGateError(FrcheckError):
    """The exponent vectors fall outside a theorem's hypothesis range"""


class VariantMismatch(FrcheckError):
    """A test-function variant lacks an ingredient the requested formula needs"""


class MembershipError(FrcheckError):
    """A test function is not in the source space (or its image not in the target)"""


class DivergenceSuspected(FrcheckError):
    """A Monte Carlo estimate failed the convergence checks"""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConstancyFailure(FrcheckError):
    """Proportionality ratios differ across probe pairs by more than the tolerance"""

    def __init__(self, message, pairs=None):
        super().__init__(message)
        self.pairs = list(pairs or [])


class ConfigError(FrcheckError):
    """Malformed run configuration"""

    def __init__(self, message, path=None, line=0, column=0):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path or '<config>'}:{line}:{column}" if line else (path or "<config>")
        super().__init__(f"{where}: {message}")
