"""Leg-labelled dense tensors and the factorizations used by the samplers.

Every tensor stores a complex128 array in row-major order over its legs and a
tuple of distinct leg labels, one per axis. Tensors are treated as immutable:
the underlying array is flagged read-only and every operation returns a new
tensor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg


class DenseTensor:
    """Complex tensor whose axes are addressed by label."""

    __slots__ = ("_data", "_labels")

    def __init__(self, data, labels: Sequence[str]):
        arr = np.array(data, dtype=np.complex128, copy=True)
        labels = tuple(labels)
        if arr.ndim != len(labels):
            raise ValueError(f"{arr.ndim}-leg array given {len(labels)} labels {labels}")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate leg labels {labels}")
        if any(n < 1 for n in arr.shape):
            raise ValueError(f"leg dimensions must be positive, got {arr.shape}")
        arr.flags.writeable = False
        self._data = arr
        self._labels = labels

    @classmethod
    def _wrap(cls, arr: np.ndarray, labels: tuple[str, ...]) -> "DenseTensor":
        # Internal constructor that skips the defensive copy.
        t = object.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.complex128)
        arr.flags.writeable = False
        t._data = arr
        t._labels = labels
        return t

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    def dim(self, label: str) -> int:
        return self._data.shape[self.axis(label)]

    def axis(self, label: str) -> int:
        try:
            return self._labels.index(label)
        except ValueError:
            raise ValueError(f"unknown leg {label!r}; tensor has {self._labels}") from None

    def __contains__(self, label: str) -> bool:
        return label in self._labels

    def __repr__(self) -> str:
        legs = ", ".join(f"{l}={n}" for l, n in zip(self._labels, self.dims))
        return f"DenseTensor({legs})"

    def transpose(self, labels: Sequence[str]) -> "DenseTensor":
        labels = tuple(labels)
        if sorted(labels) != sorted(self._labels):
            raise ValueError(f"{labels} is not a permutation of {self._labels}")
        if labels == self._labels:
            return self
        perm = [self.axis(l) for l in labels]
        return DenseTensor._wrap(np.transpose(self._data, perm), labels)

    def relabel(self, mapping: Mapping[str, str]) -> "DenseTensor":
        for old in mapping:
            self.axis(old)
        labels = tuple(mapping.get(l, l) for l in self._labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"relabelling produces duplicate legs {labels}")
        return DenseTensor._wrap(self._data, labels)

    def conj(self) -> "DenseTensor":
        return DenseTensor._wrap(self._data.conj(), self._labels)

    def norm(self) -> float:
        return float(np.linalg.norm(self._data.ravel()))

    def scale(self, factor: complex) -> "DenseTensor":
        return DenseTensor._wrap(self._data * factor, self._labels)

    def take(self, label: str, index: int) -> "DenseTensor":
        """Fix leg ``label`` to ``index`` and drop it (projection on a basis vector)."""
        ax = self.axis(label)
        labels = self._labels[:ax] + self._labels[ax + 1 :]
        return DenseTensor._wrap(np.take(self._data, index, axis=ax), labels)

    def expand(self, label: str, position: int | None = None) -> "DenseTensor":
        """Insert a new leg of dimension one."""
        if label in self._labels:
            raise ValueError(f"leg {label!r} already present")
        pos = self.ndim if position is None else position
        labels = self._labels[:pos] + (label,) + self._labels[pos:]
        return DenseTensor._wrap(np.expand_dims(self._data, pos), labels)

    def squeeze(self, label: str) -> "DenseTensor":
        """Remove a leg of dimension one."""
        if self.dim(label) != 1:
            raise ValueError(f"leg {label!r} has dimension {self.dim(label)}, not 1")
        return self.take(label, 0)

    def matricize(self, row_legs: Sequence[str]) -> tuple[np.ndarray, tuple[str, ...]]:
        """Return the (rows x cols) matrix and the column leg order."""
        row_legs = tuple(row_legs)
        for l in row_legs:
            self.axis(l)
        col_legs = tuple(l for l in self._labels if l not in row_legs)
        t = self.transpose(row_legs + col_legs)
        nrow = int(np.prod([self.dim(l) for l in row_legs], dtype=int))
        return t.data.reshape(nrow, -1), col_legs

    def to_json(self) -> dict:
        flat = self._data.ravel()
        return {
            "dims": list(self.dims),
            "labels": list(self._labels),
            "re": flat.real.tolist(),
            "im": flat.imag.tolist(),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "DenseTensor":
        dims = tuple(int(n) for n in doc["dims"])
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc["im"], dtype=float)
        if re.size != int(np.prod(dims, dtype=int)) or im.size != re.size:
            raise ValueError(f"data length {re.size} does not match dims {dims}")
        return cls((re + 1j * im).reshape(dims), doc["labels"])

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "DenseTensor":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class SvdTruncation:
    """Bond-dimension cap and relative singular-value cutoff."""

    max_rank: int
    rel_cutoff: float = 0.0

    def __post_init__(self):
        if self.max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {self.max_rank}")
        if not 0.0 <= self.rel_cutoff < 1.0:
            raise ValueError(f"rel_cutoff must lie in [0, 1), got {self.rel_cutoff}")


def contract(a: DenseTensor, b: DenseTensor, pairs: Iterable[tuple[str, str]]) -> DenseTensor:
    """Sum over the paired legs of ``a`` and ``b``.

    The result carries the unpaired legs of ``a`` followed by those of ``b``,
    each in their original order.
    """
    pairs = list(pairs)
    ax_a = [a.axis(la) for la, _ in pairs]
    ax_b = [b.axis(lb) for _, lb in pairs]
    for (la, lb), i, j in zip(pairs, ax_a, ax_b):
        if a.dims[i] != b.dims[j]:
            raise ValueError(f"dimension mismatch on {la!r}~{lb!r}: {a.dims[i]} != {b.dims[j]}")
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise ValueError(f"a leg is paired more than once in {pairs}")
    labels = tuple(l for i, l in enumerate(a.labels) if i not in ax_a) + tuple(
        l for j, l in enumerate(b.labels) if j not in ax_b
    )
    if len(set(labels)) != len(labels):
        raise ValueError(f"free legs collide after contraction: {labels}")
    out = np.tensordot(a.data, b.data, axes=(ax_a, ax_b))
    return DenseTensor._wrap(out, labels)


def _split_shapes(t: DenseTensor, row_legs: Sequence[str]):
    row_legs = tuple(row_legs)
    if not row_legs or len(set(row_legs)) != len(row_legs):
        raise ValueError("row_legs must be a non-empty set of legs")
    if len(row_legs) >= t.ndim:
        raise ValueError("row_legs must leave at least one column leg")
    mat, col_legs = t.matricize(row_legs)
    row_dims = tuple(t.dim(l) for l in row_legs)
    col_dims = tuple(t.dim(l) for l in col_legs)
    return mat, row_legs, row_dims, col_legs, col_dims


def qr_split(t: DenseTensor, row_legs: Sequence[str], bond: str = "bond") -> tuple[DenseTensor, DenseTensor]:
    """Reduced QR over the bipartition ``row_legs`` | remaining legs.

    ``q`` carries ``row_legs + (bond,)`` and has orthonormal columns; ``r``
    carries ``(bond,) + column legs``. The diagonal of ``r`` is made real and
    non-negative so the factorization is unique for full-rank input.
    """
    mat, row_legs, row_dims, col_legs, col_dims = _split_shapes(t, row_legs)
    if bond in row_legs or bond in col_legs:
        raise ValueError(f"bond label {bond!r} clashes with existing legs")
    q, r = np.linalg.qr(mat, mode="reduced")
    diag = np.diagonal(r)
    mag = np.abs(diag)
    phase = np.ones_like(diag)
    nz = mag > 0
    phase[nz] = diag[nz] / mag[nz]
    q = q * phase[np.newaxis, :]
    r = phase.conj()[:, np.newaxis] * r
    k = q.shape[1]
    qt = DenseTensor._wrap(q.reshape(row_dims + (k,)), row_legs + (bond,))
    rt = DenseTensor._wrap(r.reshape((k,) + col_dims), (bond,) + col_legs)
    return qt, rt


def _svd(mat: np.ndarray):
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def svd_split(
    t: DenseTensor,
    row_legs: Sequence[str],
    trunc: SvdTruncation | None = None,
    bond: str = "bond",
) -> tuple[DenseTensor, np.ndarray, DenseTensor, float]:
    """Truncated SVD over the bipartition ``row_legs`` | remaining legs.

    Returns ``(u, s, v, discarded)`` where ``u`` carries ``row_legs + (bond,)``,
    ``v`` carries ``(bond,) + column legs``, ``s`` holds the kept singular
    values in descending order and ``discarded`` is the Frobenius norm of the
    dropped part, ``sqrt(sum of squared discarded singular values)``.

    Singular values below the numerical-rank threshold
    ``max(m, n) * eps * s[0]`` are rounding noise: they are always dropped and
    do not count as discarded weight.
    """
    mat, row_legs, row_dims, col_legs, col_dims = _split_shapes(t, row_legs)
    if bond in row_legs or bond in col_legs:
        raise ValueError(f"bond label {bond!r} clashes with existing legs")
    u, s, vh = _svd(mat)
    rank = s.size
    if s.size and s[0] > 0:
        rank = int(np.count_nonzero(s > max(mat.shape) * np.finfo(float).eps * s[0]))
    keep = max(rank, 1)
    if trunc is not None:
        keep = min(keep, trunc.max_rank)
        if trunc.rel_cutoff > 0 and s[0] > 0:
            keep = min(keep, int(np.count_nonzero(s > trunc.rel_cutoff * s[0])))
        keep = max(keep, 1)
    discarded = float(np.sqrt(np.sum(s[keep:rank] ** 2)))
    u, s, vh = u[:, :keep], s[:keep], vh[:keep, :]
    ut = DenseTensor._wrap(u.reshape(row_dims + (keep,)), row_legs + (bond,))
    vt = DenseTensor._wrap(vh.reshape((keep,) + col_dims), (bond,) + col_legs)
    return ut, s, vt, discarded


def scale_leg(t: DenseTensor, label: str, weights: np.ndarray) -> DenseTensor:
    """Multiply slice ``i`` of leg ``label`` by ``weights[i]``."""
    ax = t.axis(label)
    shape = [1] * t.ndim
    shape[ax] = -1
    return DenseTensor._wrap(t.data * np.reshape(weights, shape), t.labels)


def identity(dim: int, labels: tuple[str, str]) -> DenseTensor:
    return DenseTensor._wrap(np.eye(dim, dtype=np.complex128), tuple(labels))


def isometry_residual(t: DenseTensor, in_legs: Sequence[str]) -> float:
    """``||Q^dagger Q - I||_F`` with ``Q`` the matricization over ``in_legs``."""
    mat, _ = t.matricize(in_legs)
    gram = mat.conj().T @ mat
    return float(np.linalg.norm(gram - np.eye(gram.shape[0])))
