"""Newest-vertex-bisection refinement: marking, closure, rule assignment, execution.

Local point numbering inside a parent element ``(P1, P2, P3)`` with refinement
edge ``P1-P2``::

    0 P1   1 P2   2 P3
    3 N1 = mid(P1, P2)   4 N2 = mid(P2, P3)   5 N3 = mid(P3, P1)
    6 N4 = mid(N1, P3)   (interior point, Bisec5 only)

Every child is stored counter-clockwise with its refinement edge first.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, MeshError

#: barycentric coordinates of the local points w.r.t. the parent vertices
LOCAL_POINTS = np.array([
    [1, 0, 0], [0, 1, 0], [0, 0, 1],
    [.5, .5, 0], [0, .5, .5], [.5, 0, .5],
    [.25, .25, .5],
])


def _bisect(child, points):
    """Split ``child = (a, b, c)`` at the midpoint of its refinement edge ``ab``."""
    a, b, c = child
    m = points[frozenset((a, b))]
    return [(c, a, m), (b, c, m)]


_MIDPOINTS = {frozenset((0, 1)): 3, frozenset((1, 2)): 4, frozenset((2, 0)): 5,
              frozenset((3, 2)): 6}


def _children_by_bisection(edges_to_split):
    """Children of successive bisections; each step splits children whose
    refinement edge is in ``edges_to_split``."""
    children = [(0, 1, 2)]
    while True:
        out, changed = [], False
        for ch in children:
            key = frozenset(ch[:2])
            if key in edges_to_split:
                out.extend(_bisect(ch, _MIDPOINTS))
                changed = True
            else:
                out.append(ch)
        children = out
        if not changed:
            return np.array(children, dtype=np.int64)


_E1, _E2, _E3 = frozenset((0, 1)), frozenset((1, 2)), frozenset((2, 0))


class Bisection(enum.IntEnum):
    NONE = 0
    BISEC1 = 1
    BISEC12 = 2
    BISEC13 = 3
    BISEC123 = 4
    BISEC5 = 5
    RED = 6


#: child vertex tables in local point indices
CHILDREN = {
    Bisection.NONE: np.array([[0, 1, 2]]),
    Bisection.BISEC1: _children_by_bisection({_E1}),
    Bisection.BISEC12: _children_by_bisection({_E1, _E2}),
    Bisection.BISEC13: _children_by_bisection({_E1, _E3}),
    Bisection.BISEC123: _children_by_bisection({_E1, _E2, _E3}),
    Bisection.BISEC5: _children_by_bisection({_E1, _E2, _E3, frozenset((3, 2))}),
    # red refinement: the middle child and the child at P3 keep an edge
    # parallel to the parent refinement edge as their refinement edge
    Bisection.RED: np.array([[0, 3, 5], [3, 1, 4], [4, 5, 3], [5, 4, 2]]),
}

N_CHILDREN = np.array([CHILDREN[b].shape[0] for b in Bisection])

# flat (rule, child) codes for prolongation
_CODE_OFFSET = np.concatenate([[0], np.cumsum(N_CHILDREN)])
CHILD_BARYCENTRICS = np.concatenate([LOCAL_POINTS[CHILDREN[b]] for b in Bisection])


class Strategy(enum.Enum):
    NVB1 = "nvb1"
    NVB = "nvb"
    NVB5 = "nvb5"
    RGB = "rgb"
    NVBEDGE = "nvbedge"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        if key == "nvb3":
            key = "nvb"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown refinement strategy '{value}'") from None


# marked-edge bit pattern (bit j <-> local edge j) -> bisection rule
_BASE_PATTERNS = {0b000: Bisection.NONE, 0b001: Bisection.BISEC1,
                  0b011: Bisection.BISEC12, 0b101: Bisection.BISEC13,
                  0b111: Bisection.BISEC123}
_FULL_RULE = {Strategy.NVB1: Bisection.BISEC123, Strategy.NVB: Bisection.BISEC123,
              Strategy.NVBEDGE: Bisection.BISEC123, Strategy.NVB5: Bisection.BISEC5,
              Strategy.RGB: Bisection.RED}


def _pattern_table(strategy):
    table = np.full(8, -1, dtype=np.int64)
    for pattern, rule in _BASE_PATTERNS.items():
        table[pattern] = rule
    table[0b111] = _FULL_RULE[strategy]
    return table


@dataclass
class RefinementRecord:
    """Everything needed to transfer data from the coarse to the refined mesh.

    Attributes
    ----------
    coarse : Mesh
        Snapshot of the mesh before refinement.
    parent : (nT_fine,) array
        Parent element of every fine element.
    child_code : (nT_fine,) array
        Row into ``CHILD_BARYCENTRICS`` giving the fine element's vertices in
        barycentric coordinates of its parent.
    child_start : (nT_coarse + 1,) array
        Children of coarse element ``i`` are ``child_start[i]:child_start[i+1]``.
    rules : (nT_coarse,) array of Bisection
    bisected_edges : (nE_coarse,) bool array
    edge_midpoint : (nE_coarse,) array
        New vertex index at the midpoint of each bisected edge, -1 otherwise.
    vertex_map : (nV_coarse,) array
        Old vertex -> fine vertex index (the identity: vertices keep their index).
    """

    coarse: Mesh
    parent: np.ndarray
    child_code: np.ndarray
    child_start: np.ndarray
    rules: np.ndarray
    bisected_edges: np.ndarray
    edge_midpoint: np.ndarray
    vertex_map: np.ndarray
    generation_before: int
    generation_after: int
    extra: dict = field(default_factory=dict)

    def child_barycentrics(self):
        """(nT_fine, 3, 3): fine element vertices in parent barycentric coordinates."""
        return CHILD_BARYCENTRICS[self.child_code]


def _check_indices(idx, n, what):
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"{what} index out of range")
    return idx


def mark_edges(mesh: Mesh, marked, strategy="nvb"):
    """Edges that must be bisected to refine the marked elements."""
    strategy = Strategy.parse(strategy)
    marks = np.zeros(mesh.n_edges, dtype=bool)
    if strategy is Strategy.NVBEDGE:
        marks[_check_indices(marked, mesh.n_edges, "edge")] = True
        return marks
    marked = _check_indices(marked, mesh.n_elements, "element")
    if strategy is Strategy.NVB1:
        marks[mesh.element2edges[marked, 0]] = True
    else:
        marks[mesh.element2edges[marked].ravel()] = True
    return marks


def closure(mesh: Mesh, marks):
    """Mark refinement edges of every element with a marked edge until stable."""
    marks = np.array(marks, dtype=bool, copy=True)
    if marks.shape != (mesh.n_edges,):
        raise ValueError("marks must have one entry per edge")
    e2e = mesh.element2edges
    ref, other1, other2 = e2e[:, 0], e2e[:, 1], e2e[:, 2]
    candidates = np.arange(mesh.n_elements)
    while True:
        need = marks[other1[candidates]] | marks[other2[candidates]]
        add = need & ~marks[ref[candidates]]
        if not add.any():
            return marks
        new_edges = ref[candidates[add]]
        marks[new_edges] = True
        # only neighbours of newly marked edges can change
        nb = mesh.edge2elements[new_edges].ravel()
        candidates = np.unique(nb[nb >= 0])


def assign_bisections(mesh: Mesh, marks, strategy="nvb"):
    """Bisection rule per element from its marked-edge pattern."""
    strategy = Strategy.parse(strategy)
    m = np.asarray(marks, dtype=bool)[mesh.element2edges]
    pattern = m[:, 0] | (m[:, 1].astype(np.int64) << 1) | (m[:, 2].astype(np.int64) << 2)
    rules = _pattern_table(strategy)[pattern]
    if np.any(rules < 0):
        raise MeshError("marked-edge pattern inconsistent with closure "
                        "(refinement edge unmarked while another edge is marked)")
    return rules


def refine_locally(mesh: Mesh, marked, strategy="nvb") -> RefinementRecord | None:
    """Refine at least the marked elements (edges for ``nvbedge``); mutates ``mesh``.

    Returns ``None`` and leaves the mesh untouched if nothing is marked.
    """
    strategy = Strategy.parse(strategy)
    marks = mark_edges(mesh, marked, strategy)
    if not marks.any():
        return None
    marks = closure(mesh, marks)
    rules = assign_bisections(mesh, marks, strategy)
    return _execute(mesh, marks, rules)


def refine_uniform(mesh: Mesh, n=1, strategy="nvb") -> RefinementRecord:
    """``n`` rounds of refinement with every element marked."""
    strategy = Strategy.parse(strategy)
    if n < 1:
        raise ValueError("n must be >= 1")
    record = None
    for _ in range(n):
        if strategy is Strategy.NVBEDGE:
            record = refine_locally(mesh, np.arange(mesh.n_edges), strategy)
        else:
            record = refine_locally(mesh, np.arange(mesh.n_elements), strategy)
    return record


def _execute(mesh: Mesh, marks, rules) -> RefinementRecord:
    coarse = mesh.snapshot()
    nV, nT = mesh.n_vertices, mesh.n_elements
    coords = mesh.coordinates
    edges = mesh.edges

    marked_edges = np.flatnonzero(marks)
    edge_midpoint = np.full(mesh.n_edges, -1, dtype=np.int64)
    edge_midpoint[marked_edges] = nV + np.arange(marked_edges.size)
    midpoints = 0.5 * (coords[edges[marked_edges, 0]] + coords[edges[marked_edges, 1]])

    b5 = np.flatnonzero(rules == Bisection.BISEC5)
    interior_index = np.full(nT, -1, dtype=np.int64)
    interior_index[b5] = nV + marked_edges.size + np.arange(b5.size)
    z = coords[mesh.elements[b5]]
    interior = 0.25 * z[:, 0] + 0.25 * z[:, 1] + 0.5 * z[:, 2]
    new_coords = np.vstack([coords, midpoints, interior])

    local = np.empty((nT, 7), dtype=np.int64)
    local[:, :3] = mesh.elements
    local[:, 3:6] = edge_midpoint[mesh.element2edges]
    local[:, 6] = interior_index

    n_children = N_CHILDREN[rules]
    child_start = np.concatenate([[0], np.cumsum(n_children)])
    nT_fine = int(child_start[-1])
    new_elements = np.empty((nT_fine, 3), dtype=np.int64)
    parent = np.repeat(np.arange(nT), n_children)
    child_code = np.empty(nT_fine, dtype=np.int64)
    for rule in np.unique(rules):
        idx = np.flatnonzero(rules == rule)
        table = CHILDREN[Bisection(rule)]
        k = table.shape[0]
        pos = child_start[idx][:, None] + np.arange(k)
        new_elements[pos] = local[idx][:, table]
        child_code[pos] = _CODE_OFFSET[rule] + np.arange(k)

    new_boundaries = []
    for part in mesh.boundaries:
        split = marks[part]
        a, b = edges[part, 0], edges[part, 1]
        mid = edge_midpoint[part]
        count = np.where(split, 2, 1)
        out = np.empty((count.sum(), 2), dtype=np.int64)
        offs = np.concatenate([[0], np.cumsum(count)[:-1]])
        out[offs, 0] = a
        out[offs, 1] = np.where(split, mid, b)
        s = offs[split] + 1
        out[s, 0] = mid[split]
        out[s, 1] = b[split]
        new_boundaries.append(out)

    gen_before = mesh.generation
    mesh._replace(new_coords, new_elements, new_boundaries)
    record = RefinementRecord(
        coarse=coarse, parent=parent, child_code=child_code, child_start=child_start,
        rules=rules, bisected_edges=marks, edge_midpoint=edge_midpoint,
        vertex_map=np.arange(nV), generation_before=gen_before,
        generation_after=mesh.generation)
    mesh.last_refinement = record
    return record
