"""Exception types shared across the pipeline stages.

Every error carries a machine-readable ``kind`` so the CLI and HTTP layer
can emit structured failures without string-matching messages.
"""

from __future__ import annotations


class MixcellError(Exception):
    """Base class for all pipeline errors."""

    kind = "error"

    def payload(self) -> dict:
        return {"error": self.kind, "detail": str(self)}


# corpus

class DuplicateRecipeError(MixcellError):
    kind = "duplicate-id"


class UnknownRecipeError(MixcellError):
    kind = "unknown-id"


class InvalidRecipeError(MixcellError):
    kind = "invalid-recipe"


# perception

class MalformedDocumentError(MixcellError):
    kind = "malformed-document"


class SchemaViolationError(MixcellError):
    kind = "schema-violation"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field

    def payload(self) -> dict:
        return {"error": self.kind, "field": self.field, "detail": str(self)}


class RayParallelToPlaneError(MixcellError):
    kind = "ray-parallel-to-plane"


class BehindCameraError(MixcellError):
    kind = "intersection-behind-camera"


# reconciliation

class UnknownAnomalyError(MixcellError):
    kind = "unknown-anomaly-id"


class IllegalOptionError(MixcellError):
    kind = "illegal-option"


class UnresolvableError(MixcellError):
    kind = "unresolvable"


# plan compiler

class UnresolvedRecipeError(MixcellError):
    kind = "unresolved-recipe"


class ValidationFailureError(MixcellError):
    kind = "validation-failure"

    def __init__(self, violations):
        super().__init__("; ".join(v.describe() for v in violations))
        self.violations = list(violations)

    def payload(self) -> dict:
        return {
            "error": self.kind,
            "violations": [v.describe() for v in self.violations],
        }


# execution sim

class NoBottleHeldError(MixcellError):
    kind = "no-bottle-held"


class BottleExhaustedError(MixcellError):
    kind = "bottle-exhausted"

    def __init__(self, message: str, final_gain_g: float = 0.0):
        super().__init__(message)
        self.final_gain_g = final_gain_g


class PourTimeoutError(MixcellError):
    kind = "timeout"


class BindingMismatchError(MixcellError):
    kind = "binding-mismatch"


# orchestrator

class IllegalStimulusError(MixcellError):
    kind = "illegal-stimulus"

    def __init__(self, state: str, stimulus: str):
        super().__init__(f"stimulus {stimulus!r} not legal in state {state!r}")
        self.state = state
        self.stimulus = stimulus


class UnknownSessionError(MixcellError):
    kind = "unknown-session"
