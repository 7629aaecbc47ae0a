"""Exception types raised across wskit.

Every error derives from :class:`WSKitError`, which is a ``ValueError`` so
callers that only care about "bad input" can catch that.
"""


class WSKitError(ValueError):
    pass


class ShapeMismatch(WSKitError):
    def __init__(self, layer, expected, got, what="W"):
        self.layer, self.expected, self.got = layer, tuple(expected), tuple(got)
        super().__init__(
            f"{what}_{layer}: expected shape {self.expected}, got {self.got}"
        )


class NonFiniteEntry(WSKitError):
    def __init__(self, location):
        self.location = location
        super().__init__(f"non-finite entry at {location}")


class ArchMismatch(WSKitError):
    pass


class UnsupportedChannels(WSKitError):
    pass


class DimensionMismatch(WSKitError):
    pass


# Layer-update code uses the shorter name.
DimMismatch = DimensionMismatch


class LengthMismatch(WSKitError):
    pass


class TiedBiases(WSKitError):
    def __init__(self, layer, i, j):
        self.layer, self.i, self.j = layer, i, j
        super().__init__(f"biases {i} and {j} of layer {layer} are tied")


class VariantMismatch(WSKitError):
    pass


class ChannelMismatch(WSKitError):
    pass


class IndexOutOfRange(WSKitError):
    pass


class EmptyKV(WSKitError):
    pass


class BudgetExceeded(WSKitError):
    pass


class BadLambda(WSKitError):
    pass


class EmptySet(WSKitError):
    pass


class UnsupportedArch(WSKitError):
    pass


class IntervalMismatch(WSKitError):
    pass


class NotInvariant(WSKitError):
    """A constant tensor that would break permutation equivariance."""
