class LabError(Exception):
    EXIT_CODE: int
    ERROR_MESSAGE: str

    def __init__(self, detail: str | None = None):
        self.detail = detail
        message = self.ERROR_MESSAGE if detail is None else f"{self.ERROR_MESSAGE}: {detail}"
        super().__init__(message)


class CheckFailedError(LabError):
    ERROR_MESSAGE = "Check failed"
    EXIT_CODE = 1


class ConfigError(LabError):
    ERROR_MESSAGE = "Invalid experiment configuration"
    EXIT_CODE = 2


class ResourceCapError(LabError):
    ERROR_MESSAGE = "Resource cap exceeded"
    EXIT_CODE = 3


class ModelMismatchError(ConfigError):
    ERROR_MESSAGE = "Operands belong to different group models"


class OutsideChart(CheckFailedError):
    ERROR_MESSAGE = "Element outside the logarithm chart"

    def __init__(self, detail: str | None = None, offending: list[int] | None = None):
        self.offending = offending or []
        super().__init__(detail)


class DegenerateDensity(CheckFailedError):
    ERROR_MESSAGE = "Sampled point has zero density"


class ZeroDensityObservation(CheckFailedError):
    ERROR_MESSAGE = "Observation lies outside every smoothed atom"


class HypothesisFailed(CheckFailedError):
    ERROR_MESSAGE = "Entropy-gap hypothesis failed on the probe grid"


class InsufficientSamples(ConfigError):
    ERROR_MESSAGE = "Not enough samples"


class RangeTooNarrow(ConfigError):
    ERROR_MESSAGE = "Scale range too narrow for the requested spacing"


class SupportOverflow(ResourceCapError):
    ERROR_MESSAGE = "Support size exceeds the configured cap"


class CapExceeded(ResourceCapError):
    ERROR_MESSAGE = "Stopping time exceeds the step cap"


default_exception_types: list[type[LabError]] = [
    CheckFailedError,
    ConfigError,
    ResourceCapError,
]

exit_codes_to_default_exception_types = {
    exception_type.EXIT_CODE: exception_type  # fmt: skip
    for exception_type in default_exception_types
}
