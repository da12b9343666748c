"""Perfect sampling and greedy top-K search on a full isoTNS grid."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .. import mps
from ..streams import ZERO_BRANCH, ZeroProbabilityError, draw_outcome
from ..tensor import SvdTruncation
from .grid import IsoTnsGrid
from .rows import (
    RowState,
    contract_row_into_next,
    first_row,
    rescale_center,
    row_marginal,
    row_step,
    row_to_mps_sites,
    top_k_row,
)


@dataclass(frozen=True)
class SampleResult:
    """One configuration in row-major site order, its probability and the
    discarded weight of each row contraction."""

    config: tuple[int, ...]
    prob: float
    row_errors: tuple[float, ...]
    shape: tuple[int, int]

    @property
    def grid(self) -> np.ndarray:
        return np.asarray(self.config).reshape(self.shape)

    def to_json(self) -> dict:
        return {"config": list(self.config), "prob": self.prob, "row_errors": list(self.row_errors)}


@dataclass(frozen=True)
class TopKGridResult:
    configs: list[tuple[int, ...]]
    probs: list[float]
    row_errors: tuple[float, ...]
    shape: tuple[int, int]

    def __len__(self) -> int:
        return len(self.configs)

    def as_table(self) -> dict[tuple[int, ...], float]:
        return dict(zip(self.configs, self.probs))

    def to_json(self) -> dict:
        return {
            "configs": [list(c) for c in self.configs],
            "probs": list(self.probs),
            "row_errors": list(self.row_errors),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _check_ready(grid: IsoTnsGrid, tol: float = 1e-10) -> None:
    if grid.ortho != (0, 0):
        raise ValueError("grid must be centered at (0, 0)")
    if abs(grid.sites[0][0].norm() - 1.0) > tol:
        raise ValueError("grid must be normalized (unit-norm center tensor)")


def _final_row_chain(row: RowState) -> mps.MpsChain:
    return mps.MpsChain(row_to_mps_sites(row), ortho_center=0)


class GridCursor:
    """Partial state of one sampling pass over a grid.

    Rows above the last are handled site by site with QR center shifts and
    joined by truncated zip-up contractions; the last row is handed to an
    :class:`~isotns_sampler.mps.MpsCursor`.
    """

    __slots__ = ("grid", "trunc", "row_index", "row", "chain", "config", "prob", "row_errors", "probs")

    def __init__(self, grid, trunc, row_index=0, row=None, chain=None, config=(), prob=1.0, row_errors=()):
        self.grid = grid
        self.trunc = trunc
        self.row_index = row_index
        self.config = config
        self.prob = prob
        self.row_errors = row_errors
        if row is None and chain is None:
            row = first_row(grid)
            if grid.n_rows == 1:
                chain, row = mps.MpsCursor(_final_row_chain(row).sites), None
        self.row = row
        self.chain = chain
        self.probs = chain.probs if chain is not None else row_marginal(row)

    @property
    def complete(self) -> bool:
        return self.chain is not None and self.chain.complete

    def advance(self, outcome: int) -> "GridCursor":
        p = float(self.probs[outcome])
        if p < ZERO_BRANCH:
            raise ZeroProbabilityError(f"site {len(self.config)}: outcome {outcome} has probability {p:.3e}")
        config, prob = self.config + (outcome,), self.prob * p
        if self.chain is not None:
            nxt = self.chain.advance(outcome)
            return GridCursor(self.grid, self.trunc, self.row_index, None, nxt, config, prob, self.row_errors)
        row = row_step(self.row, outcome, p)
        if not row.projected:
            return GridCursor(self.grid, self.trunc, self.row_index, row, None, config, prob, self.row_errors)
        i = self.row_index + 1
        row, err = contract_row_into_next(row, self.grid.row(i), self.trunc)
        row = rescale_center(row, 1.0)
        errors = self.row_errors + (err,)
        if i == self.grid.n_rows - 1:
            chain = mps.MpsCursor(_final_row_chain(row).sites)
            return GridCursor(self.grid, self.trunc, i, None, chain, config, prob, errors)
        return GridCursor(self.grid, self.trunc, i, row, None, config, prob, errors)

    def result(self) -> SampleResult:
        if not self.complete:
            raise ValueError("sampling pass is not complete")
        return SampleResult(self.config, self.prob, self.row_errors, self.grid.shape)


def sample(grid: IsoTnsGrid, trunc: SvdTruncation | None, rng: np.random.Generator) -> SampleResult:
    """Draw one configuration from ``|T|^2``.

    Rows are sampled top to bottom, left to right; one uniform is drawn from
    ``rng`` per site. ``trunc`` caps the horizontal bond dimension of each row
    contraction (``None`` contracts exactly). After every contraction the new
    row is renormalized, so later conditionals refer to the truncated state.
    """
    _check_ready(grid)
    cur = GridCursor(grid, trunc)
    while not cur.complete:
        cur = cur.advance(draw_outcome(cur.probs, rng.random()))
    return cur.result()


def top_k(grid: IsoTnsGrid, k: int, trunc: SvdTruncation | None) -> TopKGridResult:
    """Greedy search for ``k`` high-probability configurations.

    Each returned probability is the squared amplitude of its configuration in
    the network actually contracted (exact when no row contraction truncates).
    After a truncated contraction the new row is rescaled to the norm of the
    exact product, i.e. the total probability of the kept prefixes.
    """
    _check_ready(grid)
    if k < 1:
        raise ValueError("k must be >= 1")
    row = first_row(grid).with_k()
    prefixes: list[tuple[int, ...]] = [()]
    errors = []
    for i in range(grid.n_rows - 1):
        prefixes, _, projected = top_k_row(row, k, prefixes)
        target = projected.sites[-1].norm()
        row, err = contract_row_into_next(projected, grid.row(i + 1), trunc)
        row = rescale_center(row, target)
        errors.append(err)
    found = mps.greedy_sweep(row_to_mps_sites(row), k, prefixes)
    return TopKGridResult(found.configs, found.probs, tuple(errors), grid.shape)
