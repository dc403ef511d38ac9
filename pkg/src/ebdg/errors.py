class EBDGError(Exception):
    pass


class AdmissibilityError(EBDGError):
    """Raised when a state has non-positive density or pressure."""

    def __init__(self, message: str, element: int | None = None, point: int | None = None,
                 stage: int | None = None):
        self.reason = message
        self.element = element
        self.point = point
        self.stage = stage
        context = []
        if element is not None:
            context.append(f"element {element}")
        if point is not None:
            context.append(f"point {point}")
        if stage is not None:
            context.append(f"stage {stage}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)

    def with_stage(self, stage: int) -> "AdmissibilityError":
        return AdmissibilityError(self.reason, element=self.element, point=self.point, stage=stage)

    def with_element(self, element: int, point: int | None = None) -> "AdmissibilityError":
        return AdmissibilityError(self.reason, element=element, point=point, stage=self.stage)


class ContractViolationError(EBDGError):
    pass


class MeshError(EBDGError):
    pass


class MeshParseError(MeshError):

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UnsupportedElementError(MeshError):
    pass


class InvertedElementError(MeshError):

    def __init__(self, element_ids: list[int]):
        self.element_ids = list(element_ids)
        shown = ", ".join(str(e) for e in self.element_ids[:20])
        if len(self.element_ids) > 20:
            shown += f", ... ({len(self.element_ids)} total)"
        super().__init__(f"Inverted or degenerate elements: {shown}")


class QuadratureError(EBDGError):
    pass


class BasisConstructionError(EBDGError):
    pass


class CflOptimizationError(EBDGError):
    pass


class CaseError(EBDGError):
    pass


class FatalDiagnostic(EBDGError):
    """Halts a run. Carries the step, time and element where the failure occurred."""

    def __init__(self, reason: str, step: int, time: float, element: int | None = None,
                 stage: int | None = None, dump_path=None):
        self.reason = reason
        self.step = step
        self.time = time
        self.element = element
        self.stage = stage
        self.dump_path = dump_path
        message = f"Step {step} (t={time:.6g}): {reason}"
        if dump_path is not None:
            message += f" [state dump: {dump_path}]"
        super().__init__(message)
