"""Isometric tensor network states on a rectangular grid and their samplers."""

from .grid import GRID_LEGS, IsoTnsGrid, ValidationReport, from_arrays, replace_site, validate
from .rows import (
    RowState,
    contract_row_into_next,
    first_row,
    grid_row,
    rescale_center,
    row_to_mps_sites,
    sample_row,
    top_k_row,
)
from .sampling import GridCursor, SampleResult, TopKGridResult, sample, top_k

__all__ = [
    "GRID_LEGS",
    "GridCursor",
    "IsoTnsGrid",
    "RowState",
    "SampleResult",
    "TopKGridResult",
    "ValidationReport",
    "contract_row_into_next",
    "first_row",
    "from_arrays",
    "grid_row",
    "replace_site",
    "rescale_center",
    "row_to_mps_sites",
    "sample",
    "sample_row",
    "top_k",
    "top_k_row",
    "validate",
]
