"""Exception hierarchy shared across the package."""


class PerceptProbeError(Exception):
    """Base class for every error raised by percept_probe."""


class ValidationError(PerceptProbeError, ValueError):
    """Bad input or configuration; the CLI maps this to exit code 1."""


# imaging
class MalformedStream(PerceptProbeError):
    pass


class UnsupportedFormat(PerceptProbeError):
    pass


class EvenKernel(ValidationError):
    pass


# features
class GrayInput(ValidationError):
    pass


class TooSmall(ValidationError):
    pass


class GeometryMismatch(ValidationError):
    pass


class UnknownImageId(PerceptProbeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DimMismatch(ValidationError):
    pass


class CorruptRecord(PerceptProbeError):
    pass


# distances
class MethodMismatch(ValidationError):
    pass


class ZeroVectorCosine(PerceptProbeError, ArithmeticError):
    pass


# challenges
class BadLevel(ValidationError):
    pass


# recognition
class EmptySet(PerceptProbeError):
    pass


class UnknownObject(PerceptProbeError):
    pass


class ParseError(ValidationError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvariantViolation(ValidationError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EndpointUnreachable(PerceptProbeError):
    pass


class AuthRejected(PerceptProbeError):
    pass


# experiments
class EmptyManifest(ValidationError):
    pass


class MissingReference(PerceptProbeError):
    def __init__(self, object_id):
        super().__init__(f"no white/front/reference-device image for object {object_id!r}")
        self.object_id = object_id


class MissingFeature(PerceptProbeError):
    def __init__(self, image_id):
        super().__init__(f"no feature vector for image {image_id!r}")
        self.image_id = image_id


class MissingPrediction(PerceptProbeError):
    def __init__(self, image_id):
        super().__init__(f"no prediction for image {image_id!r}")
        self.image_id = image_id


# stats
class LengthMismatch(ValidationError):
    pass


class TooFew(ValidationError):
    pass


class ConstantSeries(PerceptProbeError):
    pass


class IoError(PerceptProbeError, OSError):
    pass
