import enum


class ErrorCode(str, enum.Enum):
    # input / configuration problems (exit status 2)
    IO_ERROR = "io-error"
    PARSE_ERROR = "parse-error"
    NON_FINITE = "non-finite-coordinate"
    UNSUPPORTED_FORMAT = "unsupported-format"
    UNSUPPORTED_FIELDS = "unsupported-fields"
    EMPTY_CLOUD = "empty-cloud"
    UNKNOWN_CLASS = "unknown-class-id"
    SCHEMA_MISMATCH = "schema-mismatch"
    INVARIANT_VIOLATION = "invariant-violation"
    BAD_SPEC = "bad-spec"
    LENGTH_MISMATCH = "length-mismatch"
    INVALID_ID = "invalid-id"
    NON_POSITIVE_RADIUS = "non-positive-radius"
    NEGATIVE_VALUE = "negative-value"
    EMPTY_INPUT = "empty-input"
    TOO_FEW_POINTS = "too-few-points"

    # computation problems (exit status 1)
    INVALID_CENTER_NORMAL = "invalid-center-normal"
    NO_VALID_POINTS = "no-valid-points"
    INSUFFICIENT_DENSITY = "insufficient-density"
    INSUFFICIENT_POINTS = "insufficient-points"
    NO_MODEL_FOUND = "no-model-found"


_RUNTIME_CODES = {
    ErrorCode.INVALID_CENTER_NORMAL,
    ErrorCode.NO_VALID_POINTS,
    ErrorCode.INSUFFICIENT_DENSITY,
    ErrorCode.INSUFFICIENT_POINTS,
    ErrorCode.NO_MODEL_FOUND,
}


class ShapeError(Exception):
    """Error raised by every engine operation.

    ``code`` names the failure, ``detail`` is the human readable message shown on stderr.
    """

    def __init__(self, code: ErrorCode, detail: str):
        super().__init__(f"{code.value}: {detail}")
        self.code = code
        self.detail = detail

    @property
    def exit_code(self) -> int:
        return 1 if self.code in _RUNTIME_CODES else 2


def require_radius(r: float) -> None:
    if not r > 0:
        raise ShapeError(ErrorCode.NON_POSITIVE_RADIUS, f"radius must be positive, got {r}")
