"""Exception hierarchy shared by all modelci modules.

Every error carries a stable string ``code`` (what API clients switch on)
and the HTTP status it maps to when surfaced through the gateway.
"""


class ModelCIError(Exception):
    """Base class for all modelci errors."""

    code = "INTERNAL"
    http_status = 500

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


# -- registry ---------------------------------------------------------------

class NotFound(ModelCIError):
    code = "NOT_FOUND"
    http_status = 404


class DuplicateVersion(ModelCIError):
    code = "DUPLICATE_VERSION"
    http_status = 409


class InvalidManifest(ModelCIError):
    code = "INVALID_MANIFEST"
    http_status = 422


class IllegalTransition(ModelCIError):
    code = "ILLEGAL_TRANSITION"
    http_status = 409


class ImmutableField(ModelCIError):
    code = "IMMUTABLE_FIELD"
    http_status = 422


class InUse(ModelCIError):
    code = "IN_USE"
    http_status = 409


class UnknownDigest(ModelCIError):
    code = "UNKNOWN_DIGEST"
    http_status = 404


class StorageFailure(ModelCIError):
    code = "STORAGE_FAILURE"
    http_status = 500


class UpdateConflict(ModelCIError):
    """expected_updated_at precondition did not match the stored record."""

    code = "UPDATE_CONFLICT"
    http_status = 409


# -- converter --------------------------------------------------------------

class DuplicatePlugin(ModelCIError):
    code = "DUPLICATE_PLUGIN"
    http_status = 409


class InvalidPlugin(ModelCIError):
    code = "INVALID_PLUGIN"
    http_status = 422


class UnsupportedConversion(ModelCIError):
    code = "UNSUPPORTED_CONVERSION"
    http_status = 422


class PluginFailure(ModelCIError):
    code = "PLUGIN_FAILURE"
    http_status = 500


class ConversionTimeout(ModelCIError):
    code = "CONVERSION_TIMEOUT"
    http_status = 500


class ToyFormatError(ModelCIError):
    """Malformed toy-format payload (bad JSON, bad framing, CRC mismatch)."""

    code = "TOY_FORMAT_ERROR"
    http_status = 422


# -- dispatcher -------------------------------------------------------------

class IncompatibleFormat(ModelCIError):
    code = "INCOMPATIBLE_FORMAT"
    http_status = 422


class UnknownDevice(ModelCIError):
    code = "UNKNOWN_DEVICE"
    http_status = 422


class LaunchFailure(ModelCIError):
    code = "LAUNCH_FAILURE"
    http_status = 500


class ReadyTimeout(ModelCIError):
    code = "READY_TIMEOUT"
    http_status = 503


# -- profiler ---------------------------------------------------------------

class EmptySamples(ModelCIError):
    code = "EMPTY_SAMPLES"
    http_status = 400


class EmptyTrace(ModelCIError):
    code = "EMPTY_TRACE"
    http_status = 400


class CellFailure(ModelCIError):
    code = "CELL_FAILURE"
    http_status = 500


class RequestFailure(ModelCIError):
    """More than the tolerated fraction of requests in a cell failed."""

    code = "REQUEST_FAILURE"
    http_status = 500


class JobAborted(ModelCIError):
    code = "JOB_ABORTED"
    http_status = 409


# -- telemetry --------------------------------------------------------------

class ProviderFailure(ModelCIError):
    code = "PROVIDER_FAILURE"
    http_status = 503


# -- gateway ----------------------------------------------------------------

class BindFailure(ModelCIError):
    code = "BIND_FAILURE"
    http_status = 500


class InvalidRequest(ModelCIError):
    code = "INVALID_REQUEST"
    http_status = 400
