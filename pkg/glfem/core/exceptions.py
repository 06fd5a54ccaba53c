from typing import Optional


class GLFEMError(Exception):
    """Base class for all errors raised by glfem."""


class MeshError(GLFEMError):
    pass


class MeshMismatchError(MeshError):
    """Two meshes are not related by uniform refinement."""


class NonFiniteFieldError(GLFEMError, ValueError):
    pass


class FieldFormatError(GLFEMError, ValueError):
    pass


class AlignmentUndefined(GLFEMError):
    """The complex L2 correlation with the reference field vanishes."""


class SolverError(GLFEMError):
    def __init__(self, message: str, *, phase: Optional[str] = None, iteration: Optional[int] = None):
        context = []
        if phase is not None:
            context.append(f"phase={phase}")
        if iteration is not None:
            context.append(f"iteration={iteration}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.phase = phase
        self.iteration = iteration


class NewtonDivergedError(SolverError):
    pass


class EigenSolverError(GLFEMError):
    pass


class BoundViolationError(GLFEMError):
    pass


class LodError(GLFEMError):
    pass


class ConfigError(GLFEMError, ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
