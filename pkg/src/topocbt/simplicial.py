"""Abstract simplicial complexes over integer vertices.

A simplex is a strictly ascending tuple of vertex ids; a complex is a
set of simplices that should be closed under taking non-empty faces.
Homology ranks (Betti numbers) are computed over GF(2) from boundary
matrices with canonical lexicographic row/column ordering, so results
are bit-for-bit reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator

import numpy as np

from .gf2 import gf2_rank

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Simplex:
    """A k-simplex stored as its k+1 vertices in strictly ascending order."""

    vertices: tuple[int, ...]

    def __post_init__(self) -> None:
        vs = self.vertices
        if not isinstance(vs, tuple):
            object.__setattr__(self, "vertices", tuple(vs))
            vs = self.vertices
        if len(vs) == 0:
            raise ValueError("a simplex needs at least one vertex")
        for v in vs:
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"vertex ids must be non-negative integers, got {v!r}")
        if any(a >= b for a, b in zip(vs, vs[1:])):
            raise ValueError(f"vertices must be strictly ascending, got {vs}")

    @classmethod
    def of(cls, *vertices: int) -> "Simplex":
        """Build a simplex from vertices in any order (duplicates rejected)."""
        return cls(tuple(sorted(vertices)))

    @property
    def dimension(self) -> int:
        return len(self.vertices) - 1

    def faces(self) -> Iterator["Simplex"]:
        """All proper non-empty faces."""
        for size in range(1, len(self.vertices)):
            for combo in combinations(self.vertices, size):
                yield Simplex(combo)

    def closure(self) -> Iterator["Simplex"]:
        """The simplex together with all its proper faces."""
        yield self
        yield from self.faces()

    def boundary(self) -> Iterator["Simplex"]:
        """Codimension-1 faces (the GF(2) boundary support)."""
        if len(self.vertices) == 1:
            return
        for combo in combinations(self.vertices, len(self.vertices) - 1):
            yield Simplex(combo)

    def is_face_of(self, other: "Simplex") -> bool:
        return set(self.vertices) <= set(other.vertices)

    def __str__(self) -> str:
        return " ".join(str(v) for v in self.vertices)


@dataclass(frozen=True)
class BoundaryMatrix:
    """GF(2) boundary map from k-simplices (columns) to (k-1)-simplices (rows)."""

    k: int
    rows: tuple[Simplex, ...]
    cols: tuple[Simplex, ...]
    data: np.ndarray

    def rank(self) -> int:
        return gf2_rank(self.data)


class SimplicialComplex:
    """An immutable set of simplices.

    The plain constructor stores exactly the simplices given, which may
    violate face closure; use :meth:`from_simplices` (or
    :meth:`insert_simplex`) to build closed complexes, and
    :meth:`is_valid` to check closure.
    """

    __slots__ = ("_members",)

    def __init__(self, simplices: Iterable[Simplex] = ()) -> None:
        self._members = frozenset(simplices)

    @classmethod
    def from_simplices(cls, simplices: Iterable[Simplex]) -> "SimplicialComplex":
        """Build the face closure of the given simplices."""
        members: set[Simplex] = set()
        for s in simplices:
            members.update(s.closure())
        return cls(members)

    @classmethod
    def empty(cls) -> "SimplicialComplex":
        return cls()

    # -- membership ----------------------------------------------------

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> Iterator[Simplex]:
        return iter(self._members)

    def __contains__(self, s: Simplex) -> bool:
        return s in self._members

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SimplicialComplex):
            return NotImplemented
        return self._members == other._members

    def __hash__(self) -> int:
        return hash(self._members)

    def __repr__(self) -> str:
        return f"SimplicialComplex({len(self._members)} simplices, dim {self.dimension})"

    def members(self) -> frozenset[Simplex]:
        return self._members

    @property
    def dimension(self) -> int:
        """Highest simplex dimension present; -1 for the empty complex."""
        if not self._members:
            return -1
        return max(s.dimension for s in self._members)

    def vertices(self) -> list[int]:
        return sorted({v for s in self._members for v in s.vertices})

    def simplices_of_dim(self, k: int) -> list[Simplex]:
        """k-simplices in canonical (lexicographic) order."""
        return sorted(s for s in self._members if s.dimension == k)

    def simplex_counts(self) -> list[int]:
        """Number of k-simplices for k = 0..dimension."""
        counts = [0] * (self.dimension + 1)
        for s in self._members:
            counts[s.dimension] += 1
        return counts

    # -- editing (copy-on-write) ---------------------------------------

    def insert_simplex(self, s: Simplex) -> "SimplicialComplex":
        """Return a complex that also contains s and all its faces.

        Idempotent; existing members are untouched.
        """
        closure = set(s.closure())
        if closure <= self._members:
            return self
        return SimplicialComplex(self._members | closure)

    def remove_simplex(self, s: Simplex, retain_faces: bool = True) -> "SimplicialComplex":
        """Return a complex without s and without every coface of s.

        Closure is preserved.  With ``retain_faces=False`` the proper
        faces of s that no remaining member contains are dropped too.
        Removing a non-member is a no-op (logged).
        """
        if s not in self._members:
            log.info("remove_simplex: %s is not a member, nothing removed", s)
            return self
        survivors = {m for m in self._members if not s.is_face_of(m)}
        if not retain_faces:
            anchors = survivors - set(s.closure())
            orphans = {
                f for f in s.faces()
                if f in survivors and not any(f.is_face_of(m) for m in anchors)
            }
            survivors -= orphans
        return SimplicialComplex(survivors)

    def relabeled(self, mapping: dict[int, int]) -> "SimplicialComplex":
        """Apply a vertex-id bijection; the result is combinatorially identical."""
        return SimplicialComplex(
            Simplex(tuple(sorted(mapping[v] for v in s.vertices))) for s in self._members
        )

    # -- topology ------------------------------------------------------

    def is_valid(self) -> bool:
        """True iff every non-empty subset of every member is a member."""
        for s in self._members:
            for f in s.faces():
                if f not in self._members:
                    return False
        return True

    def boundary_matrix(self, k: int) -> BoundaryMatrix:
        """The GF(2) boundary map for dimension k, 1 <= k <= dimension.

        Rows are the (k-1)-simplices and columns the k-simplices, both
        in lexicographic order.
        """
        if k < 1 or k > self.dimension:
            raise ValueError(f"k={k} out of range 1..{self.dimension}")
        rows = self.simplices_of_dim(k - 1)
        cols = self.simplices_of_dim(k)
        row_index = {s: i for i, s in enumerate(rows)}
        data = np.zeros((len(rows), len(cols)), dtype=np.uint8)
        for j, s in enumerate(cols):
            for face in s.boundary():
                data[row_index[face], j] = 1
        return BoundaryMatrix(k=k, rows=tuple(rows), cols=tuple(cols), data=data)

    def betti_numbers(self) -> tuple[int, ...]:
        """Betti numbers (b_0 .. b_dim) over GF(2).

        b_k = (#k-simplices) - rank(d_k) - rank(d_{k+1}); b_0 counts
        connected components.  Empty complex gives ().
        """
        dim = self.dimension
        if dim < 0:
            return ()
        counts = self.simplex_counts()
        ranks = [0] * (dim + 2)
        for k in range(1, dim + 1):
            ranks[k] = self.boundary_matrix(k).rank()
        return tuple(counts[k] - ranks[k] - ranks[k + 1] for k in range(dim + 1))

    def euler_characteristic(self) -> int:
        """Alternating sum of simplex counts by dimension."""
        return sum((-1) ** k * n for k, n in enumerate(self.simplex_counts()))


# -- text format -------------------------------------------------------
#
# One simplex per line: ascending base-10 vertex ids separated by single
# spaces.  Lines starting with '#' are comments.  Reading applies face
# closure, so write -> read round-trips the member set.


def complex_to_text(complex_: SimplicialComplex) -> str:
    lines = [str(s) for s in sorted(complex_.members(), key=lambda s: (len(s.vertices), s.vertices))]
    return "\n".join(lines) + ("\n" if lines else "")


def complex_from_text(text: str) -> SimplicialComplex:
    simplices = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vertices = tuple(int(tok) for tok in line.split())
            simplices.append(Simplex(vertices))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return SimplicialComplex.from_simplices(simplices)


def write_complex(complex_: SimplicialComplex, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(complex_to_text(complex_))


def read_complex(path) -> SimplicialComplex:
    with open(path, "r", encoding="ascii") as fh:
        return complex_from_text(fh.read())
