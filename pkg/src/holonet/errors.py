"""Exception types raised across the package."""


class HolonetError(ValueError):
    """Base class for all library errors."""


class LegNotFoundError(HolonetError):
    pass


class DimensionMismatchError(HolonetError):
    pass


class PartitionError(HolonetError):
    pass


class DecompositionFailedError(HolonetError):
    pass


class InvalidDimsError(HolonetError):
    pass


class NotHermitianError(HolonetError):
    pass


class NotUnitaryError(HolonetError):
    pass


class IndexOutOfRangeError(HolonetError):
    pass


class CenterMisplacedError(HolonetError):
    """Operation needs the orthogonality center (MPS) or surface (network) elsewhere."""


class InvalidSurfaceError(HolonetError):
    pass


class SizeCapExceededError(HolonetError):
    pass


class ChiInsufficientError(HolonetError):
    pass


class InvalidPermutationError(HolonetError):
    pass


class LayoutMismatchError(HolonetError):
    pass


class NotMatchgateError(HolonetError):
    pass


class ZeroEnvironmentError(HolonetError):
    pass


class BlockNotFoundError(HolonetError):
    pass


class AtBoundaryError(HolonetError):
    pass


class WrongKindError(HolonetError):
    pass


class ConfigError(HolonetError):
    pass


class ZeroTensorError(HolonetError):
    pass


class SurfaceMisplacedError(HolonetError):
    pass
