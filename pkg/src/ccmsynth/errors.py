"""Exception types shared across the pipeline."""


class CCMError(Exception):
    """Base class for all synthesis errors."""


class InvalidArgument(CCMError, ValueError):
    pass


class FlippedElement(CCMError):
    def __init__(self, step, cell=None):
        self.step = step
        self.cell = cell
        super().__init__(f"element flipped during smoothing step {step} (cell {cell})")


class EmptyContinuum(CCMError):
    pass


class DegeneratePolygon(CCMError, ValueError):
    pass


class NonPositiveJacobian(CCMError):
    def __init__(self, cell=None):
        self.cell = cell
        super().__init__(f"non-positive deformation Jacobian in cell {cell}")


class NonConvergence(CCMError):
    pass


class AugmentationStall(CCMError):
    pass


class DegeneratePath(CCMError, ValueError):
    pass


class SelfIntersectingInput(CCMError, ValueError):
    pass


class SpecError(CCMError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
