"""Conforming triangular meshes with full edge connectivity.

Indices are 0-based in memory. Geometry files (``coordinates.dat``,
``elements.dat``, ``boundary<n>.dat``) are comma separated and 1-based.
"""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh input."""


@dataclass(frozen=True)
class AffineTransformation:
    """Per-element and per-edge data of the affine maps onto the reference triangle.

    Attributes
    ----------
    detDF : (nT,) array
        Jacobian determinant, equal to twice the element area.
    DFinvT : (nT, 2, 2) array
        Transposed inverse of the Jacobian.
    area : (nT,) array
    edge_length : (nE,) array
    unit_normal : (nE, 2) array
        Points to the right of the stored edge direction.
    generation : int
        Mesh generation the data was computed for.
    """

    detDF: np.ndarray
    DFinvT: np.ndarray
    area: np.ndarray
    edge_length: np.ndarray
    unit_normal: np.ndarray
    generation: int


class Mesh:
    """A 2D conforming triangulation.

    Parameters
    ----------
    coordinates : (nV, 2) array_like
    elements : (nT, 3) array_like
        Counter-clockwise vertex triples. The first edge (between the first two
        vertices) is the refinement edge.
    boundary_edges : list of (k, 2) array_like
        Oriented vertex pairs per boundary part, domain on the left.
    validate : bool
        Check orientation and connectivity (default). Disable only for input
        known to be valid.
    """

    def __init__(self, coordinates, elements, boundary_edges=(), validate=True):
        coordinates = np.ascontiguousarray(coordinates, dtype=float).reshape(-1, 2)
        elements = np.ascontiguousarray(elements, dtype=np.int64).reshape(-1, 3)
        boundary_edges = [np.asarray(b, dtype=np.int64).reshape(-1, 2) for b in boundary_edges]
        self.generation = 0
        self.last_refinement = None
        self._set_arrays(coordinates, elements, boundary_edges, validate)

    # -- construction -------------------------------------------------------

    def _set_arrays(self, coordinates, elements, boundary_edges, validate):
        nV = coordinates.shape[0]
        if validate:
            if elements.size and (elements.min() < 0 or elements.max() >= nV):
                raise MeshError("element vertex index out of range")
            for part in boundary_edges:
                if part.size and (part.min() < 0 or part.max() >= nV):
                    raise MeshError("boundary edge vertex index out of range")
            _check_orientation(coordinates, elements)

        nT = elements.shape[0]
        start = elements.ravel()
        end = np.roll(elements, -1, axis=1).ravel()
        lo = np.minimum(start, end)
        hi = np.maximum(start, end)
        keys = lo * nV + hi
        unique_keys, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        nE = unique_keys.size
        edges = np.column_stack([unique_keys // nV, unique_keys % nV])
        element2edges = inverse.reshape(nT, 3)

        # local edge traversed in stored (low -> high) direction puts the element on T+ side
        forward = (start < end)
        counts = np.bincount(inverse, minlength=nE)
        if validate:
            if np.any(counts > 2):
                raise MeshError("edge shared by more than two elements")
            fwd_counts = np.bincount(inverse[forward], minlength=nE)
            if np.any((counts == 2) & (fwd_counts != 1)):
                raise MeshError("adjacent elements with inconsistent orientation")

        boundaries = []
        is_bnd = np.zeros(nE, dtype=bool)
        for part in boundary_edges:
            if part.shape[0] == 0:
                boundaries.append(np.zeros(0, dtype=np.int64))
                continue
            bkeys = np.minimum(part[:, 0], part[:, 1]) * nV + np.maximum(part[:, 0], part[:, 1])
            pos = np.searchsorted(unique_keys, bkeys)
            pos = np.minimum(pos, nE - 1)
            if validate:
                if np.any(unique_keys[pos] != bkeys):
                    raise MeshError("boundary edge not found among element edges")
                if np.any(counts[pos] != 1):
                    raise MeshError("boundary edge is an interior edge")
                if np.any(is_bnd[pos]) or np.unique(pos).size != pos.size:
                    raise MeshError("duplicate boundary edge")
                # element traversal of the edge must match its boundary orientation
                occ = first[pos]
                if np.any(start[occ] != part[:, 0]):
                    raise MeshError("boundary edge orientation does not leave the domain on its left")
            is_bnd[pos] = True
            edges[pos] = part
            boundaries.append(pos.astype(np.int64))
        if validate and np.any((counts == 1) & ~is_bnd):
            raise MeshError("boundary edge not assigned to any boundary part")
        # boundary edges follow their single element, so the domain is on the left
        single = np.flatnonzero(counts == 1)
        edges[single] = np.column_stack([start[first[single]], end[first[single]]])

        # edge -> (T+, T-) and local edge index on each side
        traversal_matches = start == edges[inverse, 0]
        elem_of = np.repeat(np.arange(nT), 3)
        local_of = np.tile(np.arange(3), nT)
        edge2elements = np.full((nE, 2), -1, dtype=np.int64)
        edge2local = np.full((nE, 2), -1, dtype=np.int64)
        side = np.where(traversal_matches, 0, 1)
        edge2elements[inverse, side] = elem_of
        edge2local[inverse, side] = local_of

        self.coordinates = coordinates
        self.elements = elements
        self.edges = edges
        self.element2edges = element2edges
        self.boundaries = boundaries
        self.edge2elements = edge2elements
        self.edge2local = edge2local
        # True where the element traverses its local edge in stored direction
        self.element_edge_orientation = traversal_matches.reshape(nT, 3)
        self._affine = None

    # -- sizes --------------------------------------------------------------

    @property
    def n_vertices(self):
        return self.coordinates.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    def is_boundary_edge(self):
        return self.edge2elements[:, 1] < 0

    def boundary_edge_indices(self, parts=None):
        """Union of edge indices of the given boundary parts (0-based); all if None."""
        if parts is None:
            parts = range(len(self.boundaries))
        parts = list(parts)
        for k in parts:
            if k < 0 or k >= len(self.boundaries):
                raise MeshError(f"unknown boundary part {k}")
        if not parts:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([self.boundaries[k] for k in parts])

    def boundary_edge_list(self):
        """Oriented vertex pairs per boundary part, as accepted by the constructor."""
        return [self.edges[b] for b in self.boundaries]

    # -- derived data -------------------------------------------------------

    def affine_transformation(self) -> AffineTransformation:
        """Cached affine data, recomputed after every refinement."""
        if self._affine is None or self._affine.generation != self.generation:
            self._affine = _compute_affine(self)
        return self._affine

    def bary_to_cartesian(self, bary, elements=None):
        """Cartesian points of shape (2, n_elements, n_nodes)."""
        coords = np.asarray(bary, dtype=float)
        el = self.elements if elements is None else self.elements[elements]
        z = self.coordinates[el]  # (n, 3, 2)
        return np.einsum("kv,nvd->dnk", coords, z)

    def bary_to_cartesian_edge(self, bary, edges=None):
        """Cartesian points on edges of shape (2, n_edges, n_nodes)."""
        coords = np.asarray(bary, dtype=float)
        ed = self.edges if edges is None else self.edges[edges]
        z = self.coordinates[ed]  # (n, 2, 2)
        return np.einsum("kv,nvd->dnk", coords, z)

    def snapshot(self) -> "Mesh":
        """Shallow copy frozen at the current generation."""
        snap = copy.copy(self)
        snap.last_refinement = None
        return snap

    # -- refinement ---------------------------------------------------------

    def refine_locally(self, marked, strategy="nvb"):
        from .refinement import refine_locally
        return refine_locally(self, marked, strategy)

    def refine_uniform(self, n=1, strategy="nvb"):
        from .refinement import refine_uniform
        return refine_uniform(self, n, strategy)

    def _replace(self, coordinates, elements, boundary_edges):
        self._set_arrays(coordinates, elements, boundary_edges, validate=False)
        self.generation += 1

    # -- I/O ----------------------------------------------------------------

    @classmethod
    def from_geometry(cls, name_or_path, validate=True) -> "Mesh":
        return load_geometry(name_or_path, validate=validate)

    def export(self, directory):
        export_geometry(self, directory)

    def __repr__(self):
        return (f"Mesh(nV={self.n_vertices}, nE={self.n_edges}, nT={self.n_elements}, "
                f"parts={len(self.boundaries)}, generation={self.generation})")


def _signed_area(coordinates, elements):
    z = coordinates[elements]
    d1 = z[:, 1] - z[:, 0]
    d2 = z[:, 2] - z[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _check_orientation(coordinates, elements):
    if elements.shape[0] == 0:
        return
    extent = coordinates.max(axis=0) - coordinates.min(axis=0)
    tol = 1e-14 * float(extent @ extent)
    area = _signed_area(coordinates, elements)
    if np.any(area < -tol):
        raise MeshError("clockwise element")
    if np.any(area <= tol):
        raise MeshError("degenerate element")


def _compute_affine(mesh: Mesh) -> AffineTransformation:
    z = mesh.coordinates[mesh.elements]
    d1 = z[:, 1] - z[:, 0]
    d2 = z[:, 2] - z[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0):
        raise MeshError("degenerate element")
    # DF = [d1 d2]; DF^{-T} = 1/det [[d2y, -d1y], [-d2x, d1x]]
    DFinvT = np.empty((det.size, 2, 2))
    DFinvT[:, 0, 0] = d2[:, 1]
    DFinvT[:, 0, 1] = -d1[:, 1]
    DFinvT[:, 1, 0] = -d2[:, 0]
    DFinvT[:, 1, 1] = d1[:, 0]
    DFinvT /= det[:, None, None]
    e = mesh.coordinates[mesh.edges[:, 1]] - mesh.coordinates[mesh.edges[:, 0]]
    length = np.hypot(e[:, 0], e[:, 1])
    normal = np.column_stack([e[:, 1], -e[:, 0]]) / length[:, None]
    for arr in (det, DFinvT, length, normal):
        arr.setflags(write=False)
    area = det / 2
    area.setflags(write=False)
    return AffineTransformation(det, DFinvT, area, length, normal, mesh.generation)


# -- geometry files -------------------------------------------------------------

_BOUNDARY_FILE = re.compile(r"boundary(\d+)\.dat$")


def _geometry_dir(name_or_path) -> Path:
    path = Path(name_or_path)
    if path.is_dir():
        return path
    bundled = resources.files("afem2d") / "geometries" / str(name_or_path)
    if bundled.is_dir():
        return Path(str(bundled))
    raise FileNotFoundError(f"no geometry directory '{name_or_path}'")


def _read_table(path: Path, ncols: int, dtype):
    if not path.is_file():
        raise FileNotFoundError(f"missing geometry file {path}")
    text = path.read_text()
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        fields = [f for f in re.split(r"[,\s]+", line) if f]
        if len(fields) != ncols:
            raise ValueError(f"{path}:{lineno}: expected {ncols} columns, got {len(fields)}")
        try:
            rows.append([dtype(f) if dtype is float else int(f) for f in fields])
        except ValueError as exc:
            raise MeshError(f"{path}:{lineno}: {exc}") from None
    return np.array(rows, dtype=dtype).reshape(-1, ncols)


def mesh_from_arrays(coordinates, elements, boundary_edges=(), validate=True) -> Mesh:
    """Build a mesh from 0-based arrays.

    Parameters
    ----------
    coordinates : (nV, 2) array_like
    elements : (nT, 3) array_like
        Counterclockwise vertex triples; the first two vertices span the
        refinement edge.
    boundary_edges : sequence of (k, 2) array_like
        One list of oriented vertex pairs per boundary part.
    """
    return Mesh(coordinates, elements, boundary_edges, validate=validate)


def affine_data(mesh: Mesh) -> AffineTransformation:
    """Areas, inverse transposed Jacobians, normals and edge lengths of ``mesh``."""
    return mesh.affine_transformation()


def load_geometry(name_or_path, validate=True) -> Mesh:
    """Read a geometry directory (bundled name or filesystem path)."""
    directory = _geometry_dir(name_or_path)
    coordinates = _read_table(directory / "coordinates.dat", 2, float)
    elements = _read_table(directory / "elements.dat", 3, int) - 1
    numbers = sorted(int(m.group(1)) for f in directory.iterdir()
                     if (m := _BOUNDARY_FILE.match(f.name)))
    if numbers != list(range(1, len(numbers) + 1)):
        raise MeshError(f"boundary files in {directory} are not numbered 1..n: {numbers}")
    boundaries = [_read_table(directory / f"boundary{n}.dat", 2, int) - 1 for n in numbers]
    return Mesh(coordinates, elements, boundaries, validate=validate)


def export_geometry(mesh: Mesh, directory) -> None:
    """Write ``mesh`` in the geometry file format (1-based, comma separated)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for old in directory.glob("boundary*.dat"):
        old.unlink()
    with open(directory / "coordinates.dat", "w") as fh:
        for x, y in mesh.coordinates:
            fh.write(f"{float(x)!r},{float(y)!r}\n")
    np.savetxt(directory / "elements.dat", mesh.elements + 1, fmt="%d", delimiter=",")
    for k, part in enumerate(mesh.boundary_edge_list(), 1):
        np.savetxt(directory / f"boundary{k}.dat", part + 1, fmt="%d", delimiter=",")
