"""Row-level operations: sampling a row, greedy top-K on a row, and the
truncated contraction of a sampled row into the next grid row.

Row tensors carry ``(phys, down, left, right)``; once a site has been
sampled its physical leg is gone and it carries ``(down, left, right)``. In
top-K mode the orthogonality-center tensor additionally carries a leading
``k`` leg that indexes the kept partial configurations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..mps import select_top_k, site_marginal
from ..streams import ZERO_BRANCH, ZeroProbabilityError, draw_outcome
from ..tensor import DenseTensor, SvdTruncation, contract, qr_split, scale_leg, svd_split
from .grid import DOWN, LEFT, PHYS, RIGHT, UP, IsoTnsGrid

K = "k"
_ORDER = (K, PHYS, DOWN, LEFT, RIGHT)


def canonical_order(t: DenseTensor) -> DenseTensor:
    return t.transpose([l for l in _ORDER if l in t])


@dataclass(frozen=True)
class RowState:
    """One row of a partially sampled network with its orthogonality center."""

    sites: tuple[DenseTensor, ...]
    center: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        if not 0 <= self.center < len(self.sites):
            raise ValueError(f"center {self.center} out of range")
        for j, t in enumerate(self.sites):
            if K in t and j != self.center:
                raise ValueError("the k leg may only sit on the center tensor")

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def k_dim(self) -> int | None:
        c = self.sites[self.center]
        return c.dim(K) if K in c else None

    @property
    def projected(self) -> bool:
        """True once every site of the row has been sampled."""
        return all(PHYS not in t for t in self.sites)

    def with_k(self) -> "RowState":
        """Attach a dimension-one ``k`` leg to the center if it has none."""
        if self.k_dim is not None:
            return self
        sites = list(self.sites)
        sites[self.center] = sites[self.center].expand(K, 0)
        return RowState(tuple(sites), self.center)


def grid_row(grid: IsoTnsGrid, i: int) -> RowState:
    """Row ``i`` of the grid with its (dimension-one) up legs removed."""
    if any(t.dim(UP) != 1 for t in grid.row(i)):
        raise ValueError(f"row {i} still has open up legs")
    return RowState(tuple(t.squeeze(UP) for t in grid.row(i)), 0)


def first_row(grid: IsoTnsGrid) -> RowState:
    """The top row, centered at column 0."""
    return grid_row(grid, 0)


def row_to_mps_sites(row: RowState) -> tuple[DenseTensor, ...]:
    """View a row with trivial down legs as ``(left, phys, right)`` MPS sites.

    A ``k`` leg on column 0 becomes the chain's left boundary.
    """
    if row.center != 0:
        raise ValueError("row must be centered at column 0")
    out = []
    for j, t in enumerate(row.sites):
        t = t.squeeze(DOWN)
        if j == 0 and K in t:
            t = t.squeeze(LEFT).relabel({K: LEFT})
        out.append(t.transpose((LEFT, PHYS, RIGHT)))
    return tuple(out)


def _shift(s: DenseTensor, nxt: DenseTensor) -> tuple[DenseTensor, DenseTensor]:
    """QR with (down, left) as rows; absorb R (and any k leg) into the next site."""
    u, r = qr_split(s, (DOWN, LEFT), bond="_b")
    b = contract(r, nxt, [(RIGHT, LEFT)]).relabel({"_b": LEFT})
    return u.relabel({"_b": RIGHT}), canonical_order(b)


def row_step(row: RowState, outcome: int, p: float) -> RowState:
    """Project the center site onto ``outcome``, rescale by ``1/sqrt(p)`` and
    move the center one site to the right.

    On the last site the projected tensor stays in place as the center.
    """
    if p < ZERO_BRANCH:
        raise ZeroProbabilityError(f"outcome {outcome} has probability {p:.3e}")
    j = row.center
    s = row.sites[j].take(PHYS, outcome).scale(1.0 / np.sqrt(p))
    sites = list(row.sites)
    if j + 1 < len(sites):
        sites[j], sites[j + 1] = _shift(s, sites[j + 1])
        return RowState(tuple(sites), j + 1)
    sites[j] = s
    return RowState(tuple(sites), j)


def row_marginal(row: RowState) -> np.ndarray:
    return site_marginal(row.sites[row.center])


def sample_row(row: RowState, rng: np.random.Generator) -> tuple[list[int], float, RowState]:
    """Sample every site of a row left to right.

    Returns the outcomes, the product of their conditional probabilities and
    the projected row ``U_1 ... U_{L-1} S_L`` with its center at the right end.
    """
    if row.center != 0 or row.projected:
        raise ValueError("row must be unsampled and centered at column 0")
    outcomes, factor = [], 1.0
    for _ in range(len(row)):
        probs = row_marginal(row)
        s = draw_outcome(probs, rng.random())
        factor *= float(probs[s])
        row = row_step(row, s, float(probs[s]))
        outcomes.append(s)
    return outcomes, factor, row


def top_k_row(
    row: RowState, k: int, prefixes: Sequence[tuple[int, ...]]
) -> tuple[list[tuple[int, ...]], list[float], RowState]:
    """Greedy top-K sweep over one row.

    ``prefixes`` are the kept configurations of the rows above, indexed by the
    center's ``k`` leg. Projections are not rescaled, so the weight of each
    ``(k, outcome)`` slice is the probability of the whole extended string.
    Returns the extended strings, their probabilities and the projected row
    with the new ``k`` leg on its right-end center.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if row.center != 0 or row.projected:
        raise ValueError("row must be unsampled and centered at column 0")
    row = row.with_k()
    if row.k_dim != len(prefixes):
        raise ValueError(f"k leg has dimension {row.k_dim} but {len(prefixes)} prefixes were given")
    prefixes = list(prefixes)
    probs: list[float] = []
    sites = list(row.sites)
    for j in range(len(sites)):
        data = canonical_order(sites[j]).data
        table = np.sum(np.abs(data.reshape(data.shape[0], data.shape[1], -1)) ** 2, axis=2)
        ks, outs = select_top_k(table, k)
        prefixes = [prefixes[a] + (int(b),) for a, b in zip(ks, outs)]
        probs = [float(table[a, b]) for a, b in zip(ks, outs)]
        s = DenseTensor(data[ks, outs], (K, DOWN, LEFT, RIGHT))
        if j + 1 < len(sites):
            sites[j], sites[j + 1] = _shift(s, sites[j + 1])
        else:
            sites[j] = s
    return prefixes, probs, RowState(tuple(sites), len(sites) - 1)


def contract_row_into_next(
    projected: RowState, next_row: Sequence[DenseTensor], trunc: SvdTruncation | None
) -> tuple[RowState, float]:
    """Zip-up contraction of a sampled row into the next grid row.

    The projected row is left-canonical with its center (and any ``k`` leg) at
    the right end, so the sweep runs right to left: each site pair is
    contracted with the carried remainder, split by a truncated SVD with the
    left bonds (and ``k``) as rows, the right factor kept as the new site and
    ``U S`` carried leftward. The result has right-isometries on columns
    ``>= 1`` and its center, holding any ``k`` leg, on column 0.

    Returns the new row and the accumulated discarded weight
    ``sqrt(sum of squared discarded singular values)``. No renormalization is
    applied here.
    """
    if not projected.projected:
        raise ValueError("row still has physical legs")
    if projected.center != len(projected) - 1:
        raise ValueError("projected row must be centered at its right end")
    if len(next_row) != len(projected):
        raise ValueError("rows have different lengths")
    for j, (p, w) in enumerate(zip(projected.sites, next_row)):
        if p.dim(DOWN) != w.dim(UP):
            raise ValueError(f"column {j}: down bond {p.dim(DOWN)} != up bond {w.dim(UP)}")
    n = len(projected)
    carry = DenseTensor(np.ones((1, 1, 1)), ("mr", "wr", RIGHT))
    out: list[DenseTensor] = [None] * n
    discarded2 = 0.0
    for j in range(n - 1, -1, -1):
        p = projected.sites[j].relabel({LEFT: "ml", RIGHT: "mr"})
        w = next_row[j].relabel({LEFT: "wl", RIGHT: "wr"})
        x = contract(contract(p, w, [(DOWN, UP)]), carry, [("mr", "mr"), ("wr", "wr")])
        if j == 0:
            x = x.squeeze("ml").squeeze("wl").expand(LEFT)
            out[0] = canonical_order(x)
            break
        rows = ("ml", "wl", K) if K in x else ("ml", "wl")
        u, s, v, dw = svd_split(x, rows, trunc, bond="_b")
        discarded2 += dw * dw
        out[j] = canonical_order(v.relabel({"_b": LEFT}))
        carry = scale_leg(u, "_b", s).relabel({"ml": "mr", "wl": "wr", "_b": RIGHT})
    return RowState(tuple(out), 0), float(np.sqrt(discarded2))


def rescale_center(row: RowState, target: float) -> RowState:
    """Scale the center tensor so its Frobenius norm equals ``target``."""
    c = row.sites[row.center]
    nrm = c.norm()
    if nrm == 0.0:
        raise ZeroProbabilityError("row contraction produced a zero-norm state")
    sites = list(row.sites)
    sites[row.center] = c.scale(target / nrm)
    return RowState(tuple(sites), row.center)
