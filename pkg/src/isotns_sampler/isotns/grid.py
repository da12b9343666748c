"""Grid data model for isometric tensor network states.

Site ``(i, j)`` holds a rank-5 tensor with legs ``(phys, up, down, left, right)``;
bonds on the lattice boundary have dimension one. The orthogonality center is
the top-left tensor. Every other tensor is an isometry from its incoming legs
``(phys, down, right)`` onto its outgoing legs ``(left, up)``: horizontal
arrows point toward column 0 and vertical arrows toward row 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..tensor import DenseTensor, isometry_residual

PHYS, UP, DOWN, LEFT, RIGHT = "phys", "up", "down", "left", "right"
GRID_LEGS = (PHYS, UP, DOWN, LEFT, RIGHT)
IN_LEGS = (PHYS, DOWN, RIGHT)
OUT_LEGS = (UP, LEFT)


@dataclass(frozen=True)
class IsoTnsGrid:
    sites: tuple[tuple[DenseTensor, ...], ...]
    ortho: tuple[int, int] = (0, 0)

    def __post_init__(self):
        sites = tuple(tuple(row) for row in self.sites)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "ortho", tuple(self.ortho))
        if self.ortho != (0, 0):
            raise ValueError("only grids centered at (0, 0) are supported")
        if not sites or not sites[0]:
            raise ValueError("grid must have at least one site")
        ncol = len(sites[0])
        if any(len(row) != ncol for row in sites):
            raise ValueError("grid rows have different lengths")
        d = sites[0][0].dim(PHYS) if PHYS in sites[0][0] else None
        for i, row in enumerate(sites):
            for j, t in enumerate(row):
                if t.labels != GRID_LEGS:
                    raise ValueError(f"site {(i, j)} has legs {t.labels}, expected {GRID_LEGS}")
                if t.dim(PHYS) != d:
                    raise ValueError("all sites must share one physical dimension")
                if i == 0 and t.dim(UP) != 1 or i == len(sites) - 1 and t.dim(DOWN) != 1:
                    raise ValueError(f"site {(i, j)}: vertical boundary bond must have dimension 1")
                if j == 0 and t.dim(LEFT) != 1 or j == ncol - 1 and t.dim(RIGHT) != 1:
                    raise ValueError(f"site {(i, j)}: horizontal boundary bond must have dimension 1")
                if j + 1 < ncol and t.dim(RIGHT) != row[j + 1].dim(LEFT):
                    raise ValueError(f"horizontal bond mismatch between {(i, j)} and {(i, j + 1)}")
                if i + 1 < len(sites) and t.dim(DOWN) != sites[i + 1][j].dim(UP):
                    raise ValueError(f"vertical bond mismatch between {(i, j)} and {(i + 1, j)}")

    @property
    def n_rows(self) -> int:
        return len(self.sites)

    @property
    def n_cols(self) -> int:
        return len(self.sites[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def n_sites(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def L(self) -> int:
        if self.n_rows != self.n_cols:
            raise AttributeError(f"grid is {self.n_rows}x{self.n_cols}, not square")
        return self.n_rows

    @property
    def phys_dim(self) -> int:
        return self.sites[0][0].dim(PHYS)

    @property
    def max_bond(self) -> int:
        return max(max(t.dims[1:]) for row in self.sites for t in row)

    def row(self, i: int) -> tuple[DenseTensor, ...]:
        return self.sites[i]

    def to_json(self) -> dict:
        doc = {
            "rows": self.n_rows,
            "cols": self.n_cols,
            "phys_dim": self.phys_dim,
            "ortho": list(self.ortho),
            "sites": [t.to_json() for row in self.sites for t in row],
        }
        if self.n_rows == self.n_cols:
            doc = {"L": self.n_rows, **doc}
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "IsoTnsGrid":
        rows = int(doc.get("rows", doc.get("L")))
        cols = int(doc.get("cols", doc.get("L")))
        flat = [DenseTensor.from_json(t) for t in doc["sites"]]
        if len(flat) != rows * cols:
            raise ValueError(f"expected {rows * cols} site tensors, found {len(flat)}")
        grid = cls(tuple(tuple(flat[i * cols : (i + 1) * cols]) for i in range(rows)), tuple(doc.get("ortho", (0, 0))))
        if "phys_dim" in doc and int(doc["phys_dim"]) != grid.phys_dim:
            raise ValueError("phys_dim does not match the site tensors")
        return grid

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "IsoTnsGrid":
        return cls.from_json(json.loads(text))


def from_arrays(arrays: Sequence[Sequence[np.ndarray]]) -> IsoTnsGrid:
    """Grid from nested lists of ``(phys, up, down, left, right)`` arrays."""
    return IsoTnsGrid(tuple(tuple(DenseTensor(a, GRID_LEGS) for a in row) for row in arrays))


def replace_site(grid: IsoTnsGrid, i: int, j: int, tensor: DenseTensor) -> IsoTnsGrid:
    rows = [list(r) for r in grid.sites]
    rows[i][j] = tensor
    return IsoTnsGrid(tuple(tuple(r) for r in rows), grid.ortho)


@dataclass(frozen=True)
class ValidationReport:
    residuals: np.ndarray
    center_norm: float
    tol: float

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol

    def worst_site(self) -> tuple[int, int]:
        return tuple(int(x) for x in np.unravel_index(np.argmax(self.residuals), self.residuals.shape))


def validate(grid: IsoTnsGrid, tol: float = 1e-10) -> ValidationReport:
    """Per-site isometry residuals ``||Q^dagger Q - I||_F`` and the center norm.

    ``Q`` is the site matricized as ``(phys, down, right) x (up, left)``. The
    center's entry in ``residuals`` is zero.
    """
    res = np.zeros(grid.shape)
    for i, row in enumerate(grid.sites):
        for j, t in enumerate(row):
            if (i, j) != grid.ortho:
                res[i, j] = isometry_residual(t, IN_LEGS)
    return ValidationReport(res, grid.sites[0][0].norm(), tol)
