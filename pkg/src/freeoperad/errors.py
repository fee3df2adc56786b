"""Exception hierarchy.

Every error raised on bad user input derives from :class:`InputError` so the
command line can map it to exit code 2; :class:`InternalError` marks broken
invariants inside the engine (exit code 3).
"""


class FreeOperadError(Exception):
    pass


class InputError(FreeOperadError):
    pass


class InternalError(FreeOperadError):
    pass


# signature / parsing
class SchemaError(InputError):
    pass


class ValidationError(InputError):
    pass


class ParseError(InputError):
    pass


# terms
class TypeMismatch(InputError):
    def __init__(self, expected, got, where=None):
        self.expected, self.got, self.where = expected, got, where
        msg = f"type mismatch: {expected!r} vs {got!r}"
        if where is not None:
            msg += f" ({where})"
        super().__init__(msg)


class IndexOutOfRange(InputError):
    pass


class EmptyProduct(InputError):
    pass


class UnboundGenerator(InputError):
    pass


class ArityError(InputError):
    pass


class EvaluationError(InputError):
    pass


# hypergraph / distances
class ChunkingError(InputError):
    pass


class DimensionError(InputError):
    pass


# prior
class DomainError(InputError):
    pass


class DeadEnd(InputError):
    pass


class StepCapExceeded(FreeOperadError):
    """A path did not reach its target within ``step_cap`` steps."""


class NoCandidates(InternalError):
    pass


class InconsistentTrace(InternalError):
    pass


# wiring
class CyclicWiring(InputError):
    pass


class DanglingSlot(InputError):
    pass


class SlotTypeMismatch(InputError):
    pass


class UnsupportedWiring(InputError):
    """Wirings that need symmetry morphisms (crossings) to compose."""


# inference / data
class AllParticlesFailed(FreeOperadError):
    pass


class NonFiniteGradient(InternalError):
    pass


class ShapeError(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class DataIOError(InputError):
    pass
