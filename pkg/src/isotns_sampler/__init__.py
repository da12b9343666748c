"""Perfect sampling and greedy top-K search for isometric tensor network states."""

__version__ = "0.1.0"

from . import isotns, mps, states, streams, tensor
from .isotns import IsoTnsGrid, SampleResult, TopKGridResult, validate
from .streams import ZeroProbabilityError
from .tensor import DenseTensor, SvdTruncation

__all__ = [
    "DenseTensor",
    "IsoTnsGrid",
    "SampleResult",
    "SvdTruncation",
    "TopKGridResult",
    "ZeroProbabilityError",
    "isotns",
    "mps",
    "states",
    "streams",
    "tensor",
    "validate",
]
