"""Exception hierarchy shared by all cardiofuse modules."""


class CardiofuseError(Exception):
    """Base class for all cardiofuse errors."""


class EmptyInput(CardiofuseError):
    """An operation received an empty cloud, mask or mesh."""


class ShapeMismatch(CardiofuseError):
    """Array shapes or point counts are inconsistent."""


class DegenerateConfiguration(CardiofuseError):
    """Point configuration is rank deficient (too few or collinear points)."""


class SingularTransform(CardiofuseError):
    """The linear part of a transform is not invertible."""


class InvalidParameter(CardiofuseError):
    """A parameter is outside its valid range."""


class IndexOutOfBounds(CardiofuseError):
    """A voxel index falls outside the volume."""


class NumericalCollapse(CardiofuseError):
    """An iterative solver lost all correspondence mass."""


class ParseError(CardiofuseError):
    """A file could not be parsed; the message carries location context."""


class InvalidData(CardiofuseError):
    """A file parsed but carries invalid values (non-finite, bad homogeneous row)."""
