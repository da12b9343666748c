"""Test states as isoTNS grids and the brute-force dense oracle.

GHZ and W grids are built on a comb: horizontal bonds run along every row,
vertical bonds only along column 0, and all other vertical bonds have
dimension one. A comb is a tree rooted at the top-left site, so any tensor
network on it can be brought exactly into isometric form by QR sweeps from
the leaves toward the root. Random grids use bonds in both directions.

Dense states list amplitudes in row-major site order, ``(0,0), (0,1), ...,
(1,0), ...``, with the first site as the most significant index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .isotns.grid import DOWN, GRID_LEGS, LEFT, PHYS, RIGHT, UP, IsoTnsGrid
from .mps import TopKList
from .tensor import DenseTensor, contract, qr_split

#: largest dense vector the oracle will build
MAX_DENSE = 2**20

Config = tuple[int, ...]
ProbTable = Mapping[Config, float]


def _shape(L: int, shape: tuple[int, int] | None) -> tuple[int, int]:
    rows, cols = (L, L) if shape is None else shape
    if rows < 1 or cols < 1:
        raise ValueError("lattice dimensions must be >= 1")
    return rows, cols


def _comb_dims(i: int, j: int, rows: int, cols: int, bond: int) -> dict[str, int]:
    return {
        UP: bond if j == 0 and i > 0 else 1,
        DOWN: bond if j == 0 and i < rows - 1 else 1,
        LEFT: bond if j > 0 else 1,
        RIGHT: bond if j < cols - 1 else 1,
    }


def _comb_tensor(i, j, rows, cols, d, bond, value: Callable[[int, dict[str, int]], complex]) -> DenseTensor:
    dims = _comb_dims(i, j, rows, cols, bond)
    arr = np.zeros((d, dims[UP], dims[DOWN], dims[LEFT], dims[RIGHT]), dtype=np.complex128)
    for idx in np.ndindex(arr.shape):
        arr[idx] = value(idx[0], dict(zip((UP, DOWN, LEFT, RIGHT), idx[1:])))
    return DenseTensor(arr, GRID_LEGS)


def isometrize_comb(sites: list[list[DenseTensor]]) -> IsoTnsGrid:
    """Exact isometric form of a comb network, center at (0, 0), normalized.

    Requires every vertical bond outside column 0 to have dimension one.
    """
    rows, cols = len(sites), len(sites[0])
    sites = [list(r) for r in sites]
    for i in range(rows):
        for j in range(1, cols):
            if sites[i][j].dim(UP) != 1 or sites[i][j].dim(DOWN) != 1:
                raise ValueError(f"site {(i, j)} has a vertical bond off the comb spine")
    for i in range(rows - 1, -1, -1):
        for j in range(cols - 1, 0, -1):
            q, r = qr_split(sites[i][j], (PHYS, UP, DOWN, RIGHT), bond="_b")
            sites[i][j] = q.relabel({"_b": LEFT}).transpose(GRID_LEGS)
            prev = contract(sites[i][j - 1], r, [(RIGHT, LEFT)]).relabel({"_b": RIGHT})
            sites[i][j - 1] = prev.transpose(GRID_LEGS)
        if i > 0:
            q, r = qr_split(sites[i][0], (PHYS, LEFT, DOWN, RIGHT), bond="_b")
            sites[i][0] = q.relabel({"_b": UP}).transpose(GRID_LEGS)
            prev = contract(sites[i - 1][0], r, [(DOWN, UP)]).relabel({"_b": DOWN})
            sites[i - 1][0] = prev.transpose(GRID_LEGS)
    nrm = sites[0][0].norm()
    sites[0][0] = sites[0][0].scale(1.0 / nrm)
    return IsoTnsGrid(tuple(tuple(r) for r in sites))


def ghz_grid(L: int, shape: tuple[int, int] | None = None) -> IsoTnsGrid:
    """``(|0...0> + |1...1>)/sqrt(2)`` with bond dimension 2.

    Every site is a delta tensor (one when all its non-trivial legs agree with
    the physical index); on the comb these are exact isometries, and the
    center carries the ``1/sqrt(2)``.
    """
    rows, cols = _shape(L, shape)

    def delta(s, legs):
        return 1.0 if all(v == s for k, v in legs.items() if dims[k] > 1) and all(
            v == 0 for k, v in legs.items() if dims[k] == 1
        ) else 0.0

    sites = []
    for i in range(rows):
        row = []
        for j in range(cols):
            dims = _comb_dims(i, j, rows, cols, 2)
            t = _comb_tensor(i, j, rows, cols, 2, 2, delta)
            row.append(t.scale(1 / math.sqrt(2)) if (i, j) == (0, 0) else t)
        sites.append(row)
    return IsoTnsGrid(tuple(tuple(r) for r in sites))


def w_grid(L: int, shape: tuple[int, int] | None = None) -> IsoTnsGrid:
    """Uniform superposition of all single-excitation configurations.

    Each comb bond carries a flag: 1 when the excitation lies in the subtree
    on the far side of the bond from the root. A site admits ``parent = phys +
    sum(children)`` with every flag in {0, 1}, and the root requires the total
    to be one. The resulting network is isometrized exactly; bonds stay at
    dimension 2. (A circuit preparation would instead use controlled-Y angles
    ``theta_i = 2 arccos(sqrt(1 / (L^2 - i)))``; that route is not used here.)
    """
    rows, cols = _shape(L, shape)
    sites = []
    for i in range(rows):
        row = []
        for j in range(cols):
            dims = _comb_dims(i, j, rows, cols, 2)
            if (i, j) == (0, 0):
                parent = None
            else:
                parent = LEFT if j > 0 else UP
            children = [k for k in (DOWN, RIGHT) if dims[k] > 1]

            def flag(s, legs, parent=parent, children=children):
                total = s + sum(legs[c] for c in children)
                want = 1 if parent is None else legs[parent]
                return 1.0 if total == want else 0.0

            row.append(_comb_tensor(i, j, rows, cols, 2, 2, flag))
        sites.append(row)
    return isometrize_comb(sites)


def _random_isometry(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    g = rng.standard_normal((n_in, n_out)) + 1j * rng.standard_normal((n_in, n_out))
    q, r = np.linalg.qr(g)
    phase = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phase[np.newaxis, :]


def random_grid(L: int, chi: int, seed: int, shape: tuple[int, int] | None = None, d: int = 2) -> IsoTnsGrid:
    """Grid of seeded random isometries with bonds up to ``chi``.

    Sites are generated from the bottom-right corner toward the center so the
    incoming bond dimensions of a site are known before its outgoing ones are
    chosen. Outgoing dims satisfy ``up * left <= d * down * right`` (so an
    isometry exists), with ``up ~ sqrt(d * down * right)`` on interior sites.
    Each site is the Q factor of a complex Gaussian matrix over the incoming
    legs; the center is a normalized Gaussian tensor. ``chi = 1`` yields a
    random product state.
    """
    if chi < 1:
        raise ValueError("chi must be >= 1")
    rows, cols = _shape(L, shape)
    rng = np.random.default_rng(seed)
    up = np.ones((rows, cols), dtype=int)
    left = np.ones((rows, cols), dtype=int)
    arrays: list[list[np.ndarray | None]] = [[None] * cols for _ in range(rows)]
    for i in range(rows - 1, -1, -1):
        for j in range(cols - 1, -1, -1):
            down = up[i + 1, j] if i + 1 < rows else 1
            right = left[i, j + 1] if j + 1 < cols else 1
            n_in = d * down * right
            if i == 0 and j == 0:
                g = rng.standard_normal((d, 1, down, 1, right)) + 1j * rng.standard_normal((d, 1, down, 1, right))
                arrays[i][j] = g / np.linalg.norm(g)
                continue
            if i == 0:
                u, l = 1, min(chi, n_in)
            elif j == 0:
                u, l = min(chi, n_in), 1
            else:
                u = min(chi, max(1, math.isqrt(n_in)))
                l = min(chi, n_in // u)
            up[i, j], left[i, j] = u, l
            q = _random_isometry(rng, n_in, u * l)
            # rows of q are (phys, down, right); columns are (up, left)
            arrays[i][j] = q.reshape(d, down, right, u, l).transpose(0, 3, 1, 4, 2)
    return IsoTnsGrid(tuple(tuple(DenseTensor(a, GRID_LEGS) for a in row) for row in arrays))


@dataclass(frozen=True)
class DenseState:
    amplitudes: np.ndarray
    shape: tuple[int, int]
    phys_dim: int

    @property
    def n_sites(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def config(self, index: int) -> Config:
        return tuple(int(x) for x in np.unravel_index(index, (self.phys_dim,) * self.n_sites))

    def index(self, config: Iterable[int]) -> int:
        return int(np.ravel_multi_index(tuple(config), (self.phys_dim,) * self.n_sites))

    def amplitude(self, config: Iterable[int]) -> complex:
        return complex(self.amplitudes[self.index(config)])

    def prob(self, config: Iterable[int]) -> float:
        return abs(self.amplitude(config)) ** 2


def to_dense(grid: IsoTnsGrid, max_size: int = MAX_DENSE) -> DenseState:
    """Contract the whole grid into its amplitude vector."""
    d, n = grid.phys_dim, grid.n_sites
    if d**n > max_size:
        raise ValueError(f"dense state of {d}^{n} amplitudes exceeds the oracle limit {max_size}")
    acc = None
    phys = []
    for i, row in enumerate(grid.sites):
        for j, t in enumerate(row):
            p = f"p{i},{j}"
            phys.append(p)
            t = t.relabel(
                {PHYS: p, UP: f"v{i - 1},{j}", DOWN: f"v{i},{j}", LEFT: f"h{i},{j - 1}", RIGHT: f"h{i},{j}"}
            )
            if acc is None:
                acc = t
            else:
                shared = [(l, l) for l in acc.labels if l in t.labels]
                acc = contract(acc, t, shared)
    for l in acc.labels:
        if l not in phys:
            acc = acc.squeeze(l)
    return DenseState(acc.transpose(phys).data.reshape(-1), grid.shape, d)


def oracle_distribution(state: DenseState) -> dict[Config, float]:
    """Born-rule table ``{config: |amplitude|^2}`` over configurations with non-zero weight."""
    probs = np.abs(state.amplitudes) ** 2
    nz = np.flatnonzero(probs > 0)
    digits = np.array(np.unravel_index(nz, (state.phys_dim,) * state.n_sites)).T
    return {tuple(int(x) for x in c): float(probs[i]) for c, i in zip(digits, nz)}


def oracle_top_k(state: DenseState, k: int) -> TopKList:
    """Exact ``k`` most probable configurations; ties go to the lexicographically smaller one."""
    probs = np.abs(state.amplitudes) ** 2
    order = np.argsort(-probs, kind="stable")[:k]
    return TopKList([state.config(i) for i in order], [float(probs[i]) for i in order])


def ghz_distribution(n_sites: int) -> dict[Config, float]:
    return {(0,) * n_sites: 0.5, (1,) * n_sites: 0.5}


def w_distribution(n_sites: int) -> dict[Config, float]:
    out = {}
    for i in range(n_sites):
        c = [0] * n_sites
        c[i] = 1
        out[tuple(c)] = 1.0 / n_sites
    return out


def empirical_table(configs: Iterable[Config]) -> dict[Config, float]:
    counts: dict[Config, int] = {}
    n = 0
    for c in configs:
        c = tuple(c)
        counts[c] = counts.get(c, 0) + 1
        n += 1
    return {c: m / n for c, m in counts.items()}


def kl_divergence(p_emp: ProbTable, p: ProbTable) -> float:
    """``sum_s p_emp(s) log(p_emp(s) / p(s))`` over the support of ``p_emp``.

    Outcomes that ``p_emp`` does not contain contribute nothing. If ``p_emp``
    puts mass where ``p`` has none the divergence is infinite; a warning names
    the offending outcome. Rounding can leave a near-perfect match a hair
    below zero, so the result is clipped at zero.
    """
    total = 0.0
    for config, q in p_emp.items():
        if q <= 0:
            continue
        ref = p.get(config, 0.0)
        if ref <= 0:
            warnings.warn(f"empirical mass {q:.3e} on outcome {config} outside the reference support")
            return math.inf
        total += q * math.log(q / ref)
    return max(total, 0.0)
