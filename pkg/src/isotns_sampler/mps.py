"""Matrix product states: canonical form, perfect sampling and greedy top-K.

Site tensors carry the legs ``("left", "phys", "right")``. A chain whose
orthogonality center sits at site ``c`` has left-isometries on sites ``< c``
and right-isometries on sites ``> c``; a right-isometry contracted with its
conjugate over ``(phys, right)`` gives the identity on ``left``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .streams import ZERO_BRANCH, ZeroProbabilityError, draw_outcome
from .tensor import DenseTensor, contract, isometry_residual, qr_split

LEFT, PHYS, RIGHT = "left", "phys", "right"
SITE_LEGS = (LEFT, PHYS, RIGHT)

#: candidate branches at or below this probability are never reported by top-K
TOPK_FLOOR = 1e-15


@dataclass(frozen=True)
class MpsChain:
    """An open-boundary MPS.

    ``ortho_center`` is ``None`` for a chain that has not been brought into
    canonical form.
    """

    sites: tuple[DenseTensor, ...]
    ortho_center: int | None = None

    def __post_init__(self):
        sites = tuple(self.sites)
        object.__setattr__(self, "sites", sites)
        if not sites:
            raise ValueError("an MPS needs at least one site")
        for i, t in enumerate(sites):
            if t.labels != SITE_LEGS:
                raise ValueError(f"site {i} has legs {t.labels}, expected {SITE_LEGS}")
        if sites[0].dim(LEFT) != 1 or sites[-1].dim(RIGHT) != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for i in range(len(sites) - 1):
            if sites[i].dim(RIGHT) != sites[i + 1].dim(LEFT):
                raise ValueError(f"bond mismatch between sites {i} and {i + 1}")
        d = sites[0].dim(PHYS)
        if any(t.dim(PHYS) != d for t in sites):
            raise ValueError("all sites must share one physical dimension")
        c = self.ortho_center
        if c is not None and not 0 <= c < len(sites):
            raise ValueError(f"ortho_center {c} out of range")

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def phys_dim(self) -> int:
        return self.sites[0].dim(PHYS)

    @property
    def bond_dims(self) -> list[int]:
        return [t.dim(RIGHT) for t in self.sites[:-1]]

    def to_json(self) -> dict:
        return {
            "sites": [t.to_json() for t in self.sites],
            "ortho_center": self.ortho_center,
            "phys_dim": self.phys_dim,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "MpsChain":
        chain = cls(tuple(DenseTensor.from_json(t) for t in doc["sites"]), doc.get("ortho_center"))
        if "phys_dim" in doc and int(doc["phys_dim"]) != chain.phys_dim:
            raise ValueError("phys_dim does not match the site tensors")
        return chain

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "MpsChain":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class MpsSample:
    config: tuple[int, ...]
    prob: float
    conditionals: tuple[float, ...]


@dataclass(frozen=True)
class TopKList:
    configs: list[tuple[int, ...]]
    probs: list[float]

    def __len__(self) -> int:
        return len(self.configs)

    def as_table(self) -> dict[tuple[int, ...], float]:
        return dict(zip(self.configs, self.probs))


def from_arrays(arrays: Sequence[np.ndarray], ortho_center: int | None = None) -> MpsChain:
    """Build a chain from ``(left, phys, right)`` arrays."""
    return MpsChain(tuple(DenseTensor(a, SITE_LEGS) for a in arrays), ortho_center)


def product_state(vectors: Sequence[np.ndarray]) -> MpsChain:
    """Bond-dimension-one chain; each vector is a local state (normalized here)."""
    arrays = []
    for v in vectors:
        v = np.asarray(v, dtype=np.complex128)
        arrays.append((v / np.linalg.norm(v)).reshape(1, -1, 1))
    return from_arrays(arrays, ortho_center=0)


def random_chain(L: int, d: int, chi: int, rng: np.random.Generator) -> MpsChain:
    """Complex Gaussian chain with all interior bonds ``chi`` (not canonical)."""
    dims = [1] + [chi] * (L - 1) + [1]
    arrays = [
        rng.standard_normal((dims[i], d, dims[i + 1])) + 1j * rng.standard_normal((dims[i], d, dims[i + 1]))
        for i in range(L)
    ]
    return from_arrays(arrays)


def to_dense(chain: MpsChain) -> np.ndarray:
    """Full amplitude vector, first site most significant."""
    acc = chain.sites[0].data.reshape(-1, chain.sites[0].dim(RIGHT))
    for t in chain.sites[1:]:
        acc = (acc @ t.data.reshape(t.dim(LEFT), -1)).reshape(-1, t.dim(RIGHT))
    return acc.reshape(-1)


def isometry_residuals(chain: MpsChain, center: int | None = None) -> list[float]:
    """Per-site ``||Q^dagger Q - I||_F``; zero is reported for the center itself."""
    c = chain.ortho_center if center is None else center
    if c is None:
        raise ValueError("chain has no orthogonality center")
    out = []
    for i, t in enumerate(chain.sites):
        if i < c:
            out.append(isometry_residual(t, (LEFT, PHYS)))
        elif i > c:
            out.append(isometry_residual(t, (PHYS, RIGHT)))
        else:
            out.append(0.0)
    return out


def canonicalize(chain: MpsChain, center: int = 0) -> MpsChain:
    """Move the orthogonality center to ``center``.

    Sites right of the center are orthogonalized by a right-to-left sweep of
    QR factorizations of the transposed site (the LQ sweep); sites left of it
    by a left-to-right QR sweep.
    """
    n = len(chain)
    if not 0 <= center < n:
        raise ValueError(f"center {center} out of range for {n} sites")
    sites = list(chain.sites)
    for i in range(center):
        q, r = qr_split(sites[i], (LEFT, PHYS), bond="_b")
        sites[i] = q.relabel({"_b": RIGHT})
        sites[i + 1] = contract(r, sites[i + 1], [(RIGHT, LEFT)]).relabel({"_b": LEFT})
    for i in range(n - 1, center, -1):
        q, r = qr_split(sites[i], (PHYS, RIGHT), bond="_b")
        sites[i] = q.relabel({"_b": LEFT}).transpose(SITE_LEGS)
        sites[i - 1] = contract(sites[i - 1], r, [(RIGHT, LEFT)]).relabel({"_b": RIGHT})
    return MpsChain(tuple(sites), center)


def normalize(chain: MpsChain) -> MpsChain:
    """Scale the center tensor to unit Frobenius norm."""
    c = chain.ortho_center
    if c is None:
        raise ValueError("normalize needs a canonical chain")
    nrm = chain.sites[c].norm()
    if nrm == 0.0:
        raise ZeroDivisionError("cannot normalize a zero-norm state")
    sites = list(chain.sites)
    sites[c] = sites[c].scale(1.0 / nrm)
    return MpsChain(tuple(sites), c)


def check_unitary(u: np.ndarray, d: int, tol: float = 1e-10) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (d, d):
        raise ValueError(f"basis matrix has shape {u.shape}, expected {(d, d)}")
    if np.linalg.norm(u.conj().T @ u - np.eye(d)) > tol:
        raise ValueError("basis matrix is not unitary")
    return u


def rotate(t: DenseTensor, u: np.ndarray) -> DenseTensor:
    """Apply ``u`` to the physical leg: ``t'[.., g, ..] = sum_s u[g, s] t[.., s, ..]``."""
    u = check_unitary(u, t.dim(PHYS))
    ax = t.axis(PHYS)
    data = np.moveaxis(np.tensordot(u, t.data, axes=([1], [ax])), 0, ax)
    return DenseTensor(data, t.labels)


def site_marginal(center: DenseTensor, basis: np.ndarray | None = None) -> np.ndarray:
    """Distribution of the physical index of an orthogonality-center tensor.

    Entry ``s`` is ``Tr[B^s (B^s)^dagger]``: the squared norm of the slice with
    the physical leg fixed to ``s``, summed over every other leg. With
    ``basis`` the physical leg is first rotated by that unitary.
    """
    if basis is not None:
        center = rotate(center, basis)
    data = np.moveaxis(center.data, center.axis(PHYS), 0)
    return np.sum(np.abs(data.reshape(data.shape[0], -1)) ** 2, axis=1)


class MpsCursor:
    """Partial state of one perfect-sampling sweep over a right-canonical chain.

    ``probs`` is the conditional distribution of the next site; ``advance``
    projects the chosen outcome, rescales by ``1/sqrt(p)`` and absorbs the
    result into the next site, which becomes the new center.
    """

    __slots__ = ("sites", "bases", "position", "center", "config", "prob", "conditionals", "probs")

    def __init__(self, sites, bases=None, position=0, center=None, config=(), prob=1.0, conditionals=()):
        self.sites = sites
        self.bases = bases
        self.position = position
        self.config = config
        self.prob = prob
        self.conditionals = conditionals
        if position < len(sites):
            center = sites[0] if center is None else center
            if bases is not None and bases[position] is not None:
                center = rotate(center, bases[position])
            self.center = center
            self.probs = site_marginal(center)
        else:
            self.center = None
            self.probs = None

    @property
    def complete(self) -> bool:
        return self.position == len(self.sites)

    def advance(self, outcome: int) -> "MpsCursor":
        p = float(self.probs[outcome])
        if p < ZERO_BRANCH:
            raise ZeroProbabilityError(f"site {self.position}: outcome {outcome} has probability {p:.3e}")
        s = self.center.take(PHYS, outcome).scale(1.0 / np.sqrt(p))
        nxt = self.position + 1
        center = contract(s, self.sites[nxt], [(RIGHT, LEFT)]) if nxt < len(self.sites) else None
        return MpsCursor(
            self.sites,
            self.bases,
            nxt,
            center,
            self.config + (outcome,),
            self.prob * p,
            self.conditionals + (p,),
        )


def _check_sampling_ready(chain: MpsChain, tol: float = 1e-10) -> None:
    if chain.ortho_center != 0:
        raise ValueError("sampling needs a chain canonicalized with center 0")
    if abs(chain.sites[0].norm() - 1.0) > tol:
        raise ValueError("sampling needs a normalized chain")


def _expand_bases(bases, n: int):
    if bases is None:
        return None
    if isinstance(bases, np.ndarray) and bases.ndim == 2:
        return [bases] * n
    bases = list(bases)
    if len(bases) != n:
        raise ValueError(f"expected {n} basis matrices, got {len(bases)}")
    return bases


def sample(chain: MpsChain, rng: np.random.Generator, basis=None) -> MpsSample:
    """Draw one configuration with probability ``|T(config)|^2``.

    ``basis`` may be a single ``d x d`` unitary applied at every site or a
    per-site list (``None`` entries keep the computational basis). One uniform
    is drawn from ``rng`` per site.
    """
    _check_sampling_ready(chain)
    cur = MpsCursor(chain.sites, _expand_bases(basis, len(chain)))
    while not cur.complete:
        cur = cur.advance(draw_outcome(cur.probs, rng.random()))
    return MpsSample(cur.config, cur.prob, cur.conditionals)


def select_top_k(table: np.ndarray, k: int, floor: float = TOPK_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Largest ``k`` entries of a (prefix, outcome) table above ``floor``.

    Ties are broken by the row-major position, i.e. lexicographically by
    (prefix index, outcome). Returns the prefix and outcome index arrays in
    descending order of probability.
    """
    flat = table.ravel()
    order = np.argsort(-flat, kind="stable")
    order = order[flat[order] > floor][:k]
    return np.unravel_index(order, table.shape)


def greedy_sweep(sites, k: int, prefixes: Sequence[tuple[int, ...]], bases=None) -> TopKList:
    """Top-K search over a right-canonical chain whose first left leg indexes ``prefixes``.

    Projections are not rescaled, so the squared norm of every slice of the
    current center is the probability of the full prefix it represents.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if sites[0].dim(LEFT) != len(prefixes):
        raise ValueError("left boundary dimension must equal the number of carried prefixes")
    prefixes = list(prefixes)
    probs: list[float] = []
    center = sites[0]
    for i, site in enumerate(sites):
        if i:
            center = contract(s, site, [(RIGHT, LEFT)])
        if bases is not None and bases[i] is not None:
            center = rotate(center, bases[i])
        data = center.transpose(SITE_LEGS).data
        table = np.sum(np.abs(data) ** 2, axis=2)
        rows, outs = select_top_k(table, k)
        prefixes = [prefixes[r] + (int(o),) for r, o in zip(rows, outs)]
        probs = [float(table[r, o]) for r, o in zip(rows, outs)]
        s = DenseTensor(data[rows, outs, :], (LEFT, RIGHT))
    return TopKList(prefixes, probs)


def top_k(chain: MpsChain, k: int, basis=None) -> TopKList:
    """Greedy search for ``k`` high-probability configurations.

    At each site the ``k`` most probable (kept prefix, outcome) extensions are
    retained. Reported probabilities are exact; the greedy pruning only
    affects which strings are found. Fewer than ``k`` strings are returned
    when fewer extensions have non-negligible probability.
    """
    _check_sampling_ready(chain)
    return greedy_sweep(chain.sites, k, [()], _expand_bases(basis, len(chain)))
