"""Exception hierarchy shared by all modules."""


class NonlocalLayersError(Exception):
    """Base class for every error raised by the package."""


class IllegalFamilyParams(NonlocalLayersError, ValueError):
    pass


class OrderUnsupported(NonlocalLayersError, ValueError):
    pass


class QuadratureNoConvergence(NonlocalLayersError, ArithmeticError):
    pass


class StepSizeUnderflow(NonlocalLayersError, ArithmeticError):
    pass


class ProfileMismatch(NonlocalLayersError, ArithmeticError):
    pass


class ResonantRates(NonlocalLayersError, ArithmeticError):
    pass


class BadDimension(NonlocalLayersError, ValueError):
    pass


class DepthOutOfRange(NonlocalLayersError, ValueError):
    pass


class NewtonDiverged(NonlocalLayersError, ArithmeticError):
    pass


class GridTooCoarse(NonlocalLayersError, ValueError):
    pass


class NoSignChange(NonlocalLayersError, ArithmeticError):
    pass


class DegenerateFit(NonlocalLayersError, ValueError):
    pass


class ParseError(NonlocalLayersError, ValueError):
    pass


class ValidationError(NonlocalLayersError, ValueError):
    pass
