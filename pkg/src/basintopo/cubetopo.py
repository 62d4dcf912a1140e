"""Cubical complexes from kept grid cells and their Betti numbers over GF(2).

A kept set is a union of closed unit squares, so the complex is fixed by the
boolean face mask alone: an edge or vertex is present iff some kept face
contains it. Along a periodic u-axis column ``nx`` is identified with
column 0. The complexes live in a rectangle or a finite cylinder band, hence
``b2 = 0`` and ``b1 = b0 - chi``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class EmptyComplexError(ValueError):
    """No cell satisfies the keep predicate."""


@dataclass(frozen=True)
class CubicalComplex:
    faces: np.ndarray       # (nx, ny) bool
    periodic: bool

    @property
    def shape(self):
        return self.faces.shape

    def vertex_mask(self) -> np.ndarray:
        f = self.faces
        nx, ny = f.shape
        pad = np.zeros((nx + 2, ny + 2), dtype=bool)
        pad[1:-1, 1:-1] = f
        if self.periodic:
            pad[0, 1:-1] = f[-1]
            pad[-1, 1:-1] = f[0]
        # vertex (i, j) touches faces (i-1|i, j-1|j)
        v = pad[:-1, :-1] | pad[1:, :-1] | pad[:-1, 1:] | pad[1:, 1:]
        return v[:nx] if self.periodic else v

    def horizontal_edge_mask(self) -> np.ndarray:
        """Edges ``(i, j) -- (i+1, j)``, shape ``(nx, ny+1)``."""
        f = self.faces
        nx, ny = f.shape
        e = np.zeros((nx, ny + 1), dtype=bool)
        e[:, :-1] |= f
        e[:, 1:] |= f
        return e

    def vertical_edge_mask(self) -> np.ndarray:
        """Edges ``(i, j) -- (i, j+1)``, shape ``(nx or nx+1, ny)``."""
        f = self.faces
        nx, ny = f.shape
        e = np.zeros((nx + 1, ny), dtype=bool)
        e[:-1] |= f
        e[1:] |= f
        if self.periodic:
            e[0] |= e[nx]
            e = e[:nx]
        return e

    def counts(self) -> tuple[int, int, int]:
        V = int(self.vertex_mask().sum())
        E = int(self.horizontal_edge_mask().sum() + self.vertical_edge_mask().sum())
        F = int(self.faces.sum())
        return V, E, F


@dataclass(frozen=True)
class BettiProfile:
    b0: int
    b1: int
    chi: int
    V: int
    E: int
    F: int

    @property
    def pair(self) -> tuple[int, int]:
        return (self.b0, self.b1)

    def to_dict(self) -> dict:
        return {"b0": self.b0, "b1": self.b1, "chi": self.chi,
                "V": self.V, "E": self.E, "F": self.F}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "BettiProfile":
        return cls(*(int(d[k]) for k in ("b0", "b1", "chi", "V", "E", "F")))


def complex_from_mask(mask, periodic: bool = False) -> CubicalComplex:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError("mask must be a non-empty 2-D array")
    if not mask.any():
        raise EmptyComplexError("no kept cells")
    return CubicalComplex(mask.copy(), periodic)


def build_complex(grid, keep=None, periodic_theta: bool | None = None) -> CubicalComplex:
    """Complex of the cells of a :class:`~basintopo.basin.BasinGrid` selected by ``keep``.

    ``keep`` is a boolean ``(nx, ny)`` array or a callable on the grid; the
    default keeps CONVERGED cells. Periodicity defaults to the grid's chart.
    """
    from .basin import Label

    if keep is None:
        mask = grid.labels == Label.CONVERGED
    elif callable(keep):
        mask = keep(grid)
    else:
        mask = keep
    if periodic_theta is None:
        periodic_theta = grid.chart.periodic
    return complex_from_mask(mask, periodic_theta)


def _face_components(c: CubicalComplex) -> int:
    f = c.faces
    nx, ny = f.shape
    ids = -np.ones((nx, ny), dtype=np.int64)
    n = int(f.sum())
    ids[f] = np.arange(n)
    rows, cols = [], []
    # faces sharing any closed vertex are connected: 8-neighbourhood
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        if c.periodic:
            a, b = ids, np.roll(ids, -di, axis=0)
        else:
            a, b = ids[: nx - di], ids[di:]
        if dj == 1:
            a, b = a[:, :-1], b[:, 1:]
        elif dj == -1:
            a, b = a[:, 1:], b[:, :-1]
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
    r = np.concatenate(rows)
    cc = np.concatenate(cols)
    g = coo_matrix((np.ones(r.size, dtype=np.int8), (r, cc)), shape=(n, n))
    return int(connected_components(g, directed=False)[0])


def betti(c: CubicalComplex) -> BettiProfile:
    """``b0`` from face connectivity, ``b1 = b0 - chi``."""
    V, E, F = c.counts()
    if F == 0:
        raise EmptyComplexError("no kept cells")
    chi = V - E + F
    b0 = _face_components(c)
    return BettiProfile(b0, b0 - chi, chi, V, E, F)


@dataclass(frozen=True)
class Verdict:
    differing: tuple[str, ...]

    @property
    def consistent(self) -> bool:
        return not self.differing

    def __str__(self) -> str:
        if self.consistent:
            return "CONSISTENT"
        return "MISMATCH{" + ",".join(self.differing) + "}"


def compare_profiles(basin: BettiProfile, tubular: BettiProfile) -> Verdict:
    """Equal (b0, b1) is necessary for homotopy equivalence, not sufficient."""
    diff = tuple(k for k in ("b0", "b1") if getattr(basin, k) != getattr(tubular, k))
    return Verdict(diff)


def parse_verdict(text: str) -> Verdict:
    if text == "CONSISTENT":
        return Verdict(())
    if text.startswith("MISMATCH{") and text.endswith("}"):
        return Verdict(tuple(x for x in text[9:-1].split(",") if x))
    raise ValueError(f"bad verdict {text!r}")


# --- boundary-matrix oracle -------------------------------------------------

def _gf2_rank(rows: list[int]) -> int:
    """Rank over GF(2) of rows encoded as integer bitmasks."""
    basis: dict[int, int] = {}
    rank = 0
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top in basis:
                r ^= basis[top]
            else:
                basis[top] = r
                rank += 1
                break
    return rank


def boundary_matrices(c: CubicalComplex):
    """Cells and GF(2) boundary rows.

    Returns ``(vertices, edges, faces, d1_rows, d2_rows)`` where ``d1_rows[e]``
    is a bitmask over vertex indices and ``d2_rows[f]`` over edge indices.
    Built cell by cell from coordinates, independent of the mask arithmetic
    used by :func:`betti`.
    """
    nx, ny = c.faces.shape
    wrap = nx if c.periodic else None

    def vkey(i, j):
        return (i % wrap if wrap else i, j)

    faces = [(i, j) for i in range(nx) for j in range(ny) if c.faces[i, j]]
    vert_set: dict = {}
    edge_set: dict = {}
    face_edges = []
    for i, j in faces:
        for v in (vkey(i, j), vkey(i + 1, j), vkey(i + 1, j + 1), vkey(i, j + 1)):
            vert_set.setdefault(v, len(vert_set))
        # edges are named by direction and their lower-left vertex
        es = [("h", vkey(i, j)), ("h", vkey(i, j + 1)),
              ("v", vkey(i, j)), ("v", vkey(i + 1, j))]
        for e in es:
            edge_set.setdefault(e, len(edge_set))
        face_edges.append(es)
    d1 = []
    for (kind, (i, j)), _ in sorted(edge_set.items(), key=lambda kv: kv[1]):
        a = vert_set[vkey(i, j)]
        b = vert_set[vkey(i + 1, j)] if kind == "h" else vert_set[vkey(i, j + 1)]
        d1.append((1 << a) ^ (1 << b))
    d2 = []
    for es in face_edges:
        m = 0
        for e in es:
            m ^= 1 << edge_set[e]
        d2.append(m)
    return vert_set, edge_set, faces, d1, d2


def betti_by_rank(c: CubicalComplex) -> tuple[int, int, int]:
    """``(b0, b1, b2)`` from boundary-matrix ranks over GF(2)."""
    verts, edges, faces, d1, d2 = boundary_matrices(c)
    r1 = _gf2_rank(d1)
    r2 = _gf2_rank(d2)
    b0 = len(verts) - r1
    b1 = len(edges) - r1 - r2
    b2 = len(faces) - r2
    return b0, b1, b2
