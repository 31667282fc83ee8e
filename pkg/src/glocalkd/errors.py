"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for bad input, 3 for
configuration or compatibility problems, 4 for numerical failures.
"""


class GlocalkdError(Exception):
    exit_code = 1


class InputError(GlocalkdError, ValueError):
    exit_code = 2


class ConfigError(GlocalkdError, ValueError):
    exit_code = 3


class NumericalError(GlocalkdError, ArithmeticError):
    exit_code = 4


# graph construction
class OutOfRangeEndpoint(InputError):
    pass


class FeatureShapeMismatch(InputError):
    pass


class SelfLoopRejected(InputError):
    pass


# dataset ingestion and manipulation
class MissingFile(InputError):
    pass


class RaggedAttributeRow(InputError):
    pass


class NodeWithoutGraphAssignment(InputError):
    pass


class CrossGraphEdge(InputError):
    pass


class MalformedSnapshot(InputError):
    pass


class UnknownClassId(InputError):
    pass


class FoldCountTooLarge(InputError):
    pass


class EmptyResult(InputError):
    pass


class PoolTooSmall(InputError):
    pass


class InvalidSpec(InputError):
    pass


class SingleClassInput(InputError):
    pass


class EmptyTrainingSet(InputError):
    pass


# shapes, configs, compatibility
class ShapeMismatch(ConfigError):
    pass


class CacheMismatch(ConfigError):
    pass


class FeatureDimMismatch(ConfigError):
    pass


class NoTermEnabled(ConfigError):
    pass


class InvalidGridAxis(ConfigError):
    pass


class InvalidConfig(ConfigError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


# numerics
class NonFiniteGradient(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass
