"""Tetrahedral meshes with per-node vorticity.

Meshes are read from TetGen ASCII ``.node``/``.ele`` pairs or built from
structured lattices (box, ball, torus) for self-contained runs.  The
tetrahedralization of scattered points is left to an external mesher,
e.g.::

    tetgen -pq1.2 ball.poly      # or: tetgen ball.node

which writes ``ball.1.node`` and ``ball.1.ele`` readable by
:func:`load_tetgen`.
"""
from __future__ import annotations

import csv
import itertools
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np


class MeshError(Exception):
    """Base class for mesh problems."""


class MeshParseError(MeshError):
    def __init__(self, path, lineno, msg):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


class MeshFormatError(MeshError):
    """Valid syntax but a layout we do not support."""


class MeshValidationError(MeshError):
    pass


def _edges2(P):
    # P: (m, 4, 3) -> (m,) squared longest edge
    h2 = np.zeros(len(P))
    for i, j in itertools.combinations(range(4), 2):
        d = P[:, i] - P[:, j]
        h2 = np.maximum(h2, np.einsum("ij,ij->i", d, d))
    return h2


def _volumes(P):
    a = P[:, 0]
    return np.einsum("ij,ij->i", P[:, 1] - a, np.cross(P[:, 2] - a, P[:, 3] - a)) / 6.0


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Nodes, node vorticity, tetrahedra and the per-tet h**2 cache.

    Treat instances as immutable; :meth:`with_vorticity` returns a copy.
    """

    nodes: np.ndarray
    vorticity: np.ndarray
    tets: np.ndarray
    h2: np.ndarray = field(repr=False)
    centroid: np.ndarray = field(repr=False, default=None)
    rho2: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        # bounding sphere about the vertex centroid; used to reject rays cheaply
        if self.centroid is None:
            P = self.nodes[self.tets]
            c = P.mean(axis=1) if len(P) else np.zeros((0, 3))
            d = P - c[:, None, :]
            object.__setattr__(self, "centroid", np.ascontiguousarray(c))
            object.__setattr__(self, "rho2", np.ascontiguousarray((d * d).sum(-1).max(-1)
                                                                  if len(P) else np.zeros(0)))

    @classmethod
    def build(cls, nodes, tets, vorticity=None, orient=False) -> "TetMesh":
        nodes = np.ascontiguousarray(np.asarray(nodes, dtype=np.float64).reshape(-1, 3))
        tets = np.ascontiguousarray(np.asarray(tets, dtype=np.int64).reshape(-1, 4))
        if vorticity is None:
            vorticity = np.zeros_like(nodes)
        vorticity = np.ascontiguousarray(np.asarray(vorticity, dtype=np.float64))
        if vorticity.shape != nodes.shape:
            raise MeshValidationError(
                f"vorticity has shape {vorticity.shape}, expected {nodes.shape}")
        if not np.all(np.isfinite(nodes)) or not np.all(np.isfinite(vorticity)):
            raise MeshValidationError("non-finite node coordinates or vorticity")
        if len(tets):
            bad = np.flatnonzero((tets < 0).any(1) | (tets >= len(nodes)).any(1))
            if len(bad):
                raise MeshValidationError(
                    f"tetrahedra {bad[:10].tolist()} reference nodes outside 0..{len(nodes) - 1}")
            s = np.sort(tets, axis=1)
            bad = np.flatnonzero((s[:, 1:] == s[:, :-1]).any(1))
            if len(bad):
                raise MeshValidationError(f"tetrahedra {bad[:10].tolist()} repeat a node")
            P = nodes[tets]
            vol = _volumes(P)
            h2 = _edges2(P)
            # zero volume relative to the element's own size
            bad = np.flatnonzero(np.abs(vol) <= 1e-12 * h2 ** 1.5)
            if len(bad):
                raise MeshValidationError(f"degenerate tetrahedra: {bad[:20].tolist()}")
            if orient:
                neg = vol < 0
                tets = tets.copy()
                tets[neg, 2], tets[neg, 3] = tets[neg, 3], tets[neg, 2].copy()
        else:
            h2 = np.zeros(0)
        return cls(nodes, vorticity, np.ascontiguousarray(tets), np.ascontiguousarray(h2))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def volumes(self) -> np.ndarray:
        return _volumes(self.nodes[self.tets])

    def with_vorticity(self, vorticity) -> "TetMesh":
        w = np.ascontiguousarray(np.broadcast_to(np.asarray(vorticity, dtype=np.float64),
                                                 self.nodes.shape).copy())
        if not np.all(np.isfinite(w)):
            raise MeshValidationError("non-finite vorticity")
        return replace(self, vorticity=w)

    def transformed(self, Q=None, shift=None) -> "TetMesh":
        """Rigidly moved copy: x -> Q x + shift, with vorticity rotated by Q."""
        Q = np.eye(3) if Q is None else np.asarray(Q, dtype=np.float64)
        shift = np.zeros(3) if shift is None else np.asarray(shift, dtype=np.float64)
        return TetMesh.build(self.nodes @ Q.T + shift, self.tets, self.vorticity @ Q.T)

    def diameter(self) -> np.ndarray:
        return np.sqrt(self.h2)


def set_vorticity(mesh: TetMesh, field: Callable) -> TetMesh:
    """Sample ``field`` at the nodes.

    ``field`` receives the (n, 3) node array and returns something
    broadcastable to (n, 3), so constants work as well as vectorized
    analytic fields.
    """
    return mesh.with_vorticity(field(mesh.nodes))


# ---------------------------------------------------------------- TetGen I/O

def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _ints(path, lineno, toks):
    try:
        return [int(t) for t in toks]
    except ValueError:
        raise MeshParseError(path, lineno, f"expected integers, got {' '.join(toks)!r}") from None


def _floats(path, lineno, toks):
    try:
        return [float(t) for t in toks]
    except ValueError:
        raise MeshParseError(path, lineno, f"expected numbers, got {' '.join(toks)!r}") from None


def read_node_file(path):
    """Return (coords, attributes, first_index) from a TetGen .node file."""
    lines = _data_lines(path)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise MeshParseError(path, 0, "empty file") from None
    if len(head) < 2:
        raise MeshParseError(path, lineno, "header needs: <#points> <dim> [<#attrs> [<#markers>]]")
    head = _ints(path, lineno, head[:4])
    npts, dim = head[0], head[1]
    nattr = head[2] if len(head) > 2 else 0
    nmark = head[3] if len(head) > 3 else 0
    if dim != 3:
        raise MeshFormatError(f"{path}: dimension {dim} not supported")
    ncol = 1 + 3 + nattr + nmark
    coords = np.empty((npts, 3))
    attrs = np.empty((npts, nattr))
    ids = np.empty(npts, dtype=np.int64)
    k = 0
    for lineno, toks in lines:
        if k == npts:
            raise MeshParseError(path, lineno, f"more than {npts} point rows")
        if len(toks) < 4 + nattr:
            raise MeshParseError(path, lineno, f"expected {ncol} columns, got {len(toks)}")
        ids[k] = _ints(path, lineno, toks[:1])[0]
        vals = _floats(path, lineno, toks[1:4 + nattr])
        coords[k] = vals[:3]
        attrs[k] = vals[3:]
        k += 1
    if k != npts:
        raise MeshParseError(path, lineno if npts else 1, f"expected {npts} point rows, found {k}")
    base = int(ids[0]) if npts else 0
    if npts and not np.array_equal(ids, np.arange(base, base + npts)):
        raise MeshParseError(path, 0, "point indices must be consecutive")
    return coords, attrs, base


def read_ele_file(path):
    lines = _data_lines(path)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise MeshParseError(path, 0, "empty file") from None
    if len(head) < 2:
        raise MeshParseError(path, lineno, "header needs: <#tets> <nodes per tet> [<#attrs>]")
    head = _ints(path, lineno, head[:3])
    ntet, npt = head[0], head[1]
    if npt != 4:
        raise MeshFormatError(f"{path}: {npt} nodes per tetrahedron not supported (need 4)")
    tets = np.empty((ntet, 4), dtype=np.int64)
    k = 0
    for lineno, toks in lines:
        if k == ntet:
            raise MeshParseError(path, lineno, f"more than {ntet} element rows")
        if len(toks) < 5:
            raise MeshParseError(path, lineno, f"expected at least 5 columns, got {len(toks)}")
        tets[k] = _ints(path, lineno, toks[1:5])
        k += 1
    if k != ntet:
        raise MeshParseError(path, lineno, f"expected {ntet} element rows, found {k}")
    return tets


def read_vorticity_csv(path, n_nodes, base=0):
    w = np.full((n_nodes, 3), np.nan)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["node", "wx", "wy", "wz"]:
            raise MeshParseError(path, 1, "header must be node,wx,wy,wz")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise MeshParseError(path, lineno, f"expected 4 columns, got {len(row)}")
            i = _ints(path, lineno, row[:1])[0] - base
            if not 0 <= i < n_nodes:
                raise MeshValidationError(f"{path}:{lineno}: node {i + base} out of range")
            w[i] = _floats(path, lineno, row[1:])
    missing = np.flatnonzero(np.isnan(w[:, 0]))
    if len(missing):
        raise MeshValidationError(f"{path}: no vorticity for nodes {(missing[:10] + base).tolist()}")
    return w


def load_tetgen(node_path, ele_path, vorticity_path=None) -> TetMesh:
    """Read a TetGen .node/.ele pair.

    Indexing base (0 or 1) follows the first index in the .node file.
    With three or more attribute columns the first three are taken as
    node vorticity; a vorticity CSV, if given, takes precedence.
    """
    for p in (node_path, ele_path):
        if not os.path.isfile(p):
            raise FileNotFoundError(f"no such file: {p}")
    coords, attrs, base = read_node_file(node_path)
    tets = read_ele_file(ele_path) - base
    w = attrs[:, :3] if attrs.shape[1] >= 3 else None
    if vorticity_path is not None:
        w = read_vorticity_csv(vorticity_path, len(coords), base)
    return TetMesh.build(coords, tets, w)


def write_tetgen(mesh: TetMesh, stem, base=0, with_vorticity=True):
    """Write ``stem.node`` and ``stem.ele``; returns the two paths."""
    stem = Path(stem)
    node_path = stem.with_suffix(".node")
    ele_path = stem.with_suffix(".ele")
    nattr = 3 if with_vorticity else 0
    with open(node_path, "w") as fh:
        fh.write(f"{mesh.n_nodes} 3 {nattr} 0\n")
        for i, (p, w) in enumerate(zip(mesh.nodes, mesh.vorticity)):
            cols = [repr(float(x)) for x in p]
            if with_vorticity:
                cols += [repr(float(x)) for x in w]
            fh.write(f"{i + base} {' '.join(cols)}\n")
    with open(ele_path, "w") as fh:
        fh.write(f"{mesh.n_tets} 4 0\n")
        for i, t in enumerate(mesh.tets):
            fh.write(f"{i + base} {' '.join(str(int(j) + base) for j in t)}\n")
    return node_path, ele_path


def write_vorticity_csv(mesh: TetMesh, path, base=0):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["node", "wx", "wy", "wz"])
        for i, w in enumerate(mesh.vorticity):
            wr.writerow([i + base, *(repr(float(x)) for x in w)])


# ---------------------------------------------------------- structured meshes

# Kuhn/Freudenthal split of the unit cube: one tetrahedron per axis
# permutation, all sharing the main diagonal corner 0 -> corner 7.
def _kuhn_corners():
    out = []
    for perm in itertools.permutations(range(3)):
        c = np.zeros(3, dtype=np.int64)
        path = [c.copy()]
        for ax in perm:
            c[ax] = 1
            path.append(c.copy())
        out.append(path)
    return np.array(out)  # (6, 4, 3) corner offsets


KUHN = _kuhn_corners()


def structured_mesh(coords: np.ndarray, periodic_axis0: bool = False) -> TetMesh:
    """Kuhn-split every cell of a logically structured grid.

    ``coords`` has shape (n0, n1, n2, 3).  With ``periodic_axis0`` the
    last layer of cells along axis 0 wraps to the first layer of nodes.
    """
    coords = np.asarray(coords, dtype=np.float64)
    n0, n1, n2 = coords.shape[:3]
    c0 = n0 if periodic_axis0 else n0 - 1
    idx = np.arange(n0 * n1 * n2).reshape(n0, n1, n2)
    I, J, K = np.meshgrid(np.arange(c0), np.arange(n1 - 1), np.arange(n2 - 1), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    tets = np.empty((len(I), 6, 4), dtype=np.int64)
    for s in range(6):
        for v in range(4):
            di, dj, dk = KUHN[s, v]
            tets[:, s, v] = idx[(I + di) % n0, J + dj, K + dk]
    return TetMesh.build(coords.reshape(-1, 3), tets.reshape(-1, 4), orient=True)


def lattice_mesh(lo, hi, n) -> TetMesh:
    """Box ``[lo, hi]`` split into ``n`` cubes per axis, 6 tets per cube."""
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), 3)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), 3)
    n = np.broadcast_to(np.asarray(n, dtype=np.int64), 3)
    if (n < 1).any():
        raise ValueError("need at least one cell per axis")
    axes = [np.linspace(lo[i], hi[i], n[i] + 1) for i in range(3)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return structured_mesh(X)


def ball_mesh(radius: float, n: int, center=(0.0, 0.0, 0.0)) -> TetMesh:
    """Ball mesh: an n**3 cube lattice on [-1, 1]**3 pushed radially so
    the cube surface lands on the sphere.  Surface nodes lie exactly on
    the sphere; the map keeps every Kuhn tetrahedron positively oriented
    for the resolutions used here (validation would reject otherwise).
    """
    ax = np.linspace(-1.0, 1.0, n + 1)
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    inf = np.abs(X).max(-1, keepdims=True)
    two = np.sqrt((X * X).sum(-1, keepdims=True))
    scale = np.divide(inf, two, out=np.ones_like(two), where=two > 0)
    return structured_mesh(radius * X * scale + np.asarray(center, dtype=np.float64))


def ring_mesh(ring_radius: float, half_width: float, n_stations: int, n_cross: int) -> TetMesh:
    """Torus of square cross-section around the z axis.

    ``n_stations`` planes equally spaced in azimuth, each carrying an
    ``n_cross`` x ``n_cross`` grid over
    [R - half_width, R + half_width] x [-half_width, half_width] in (r, z).
    Node ``s * n_cross**2 + i * n_cross + j`` sits at station ``s``,
    radius index ``i`` and height index ``j``.
    """
    if n_stations < 3 or n_cross < 2:
        raise ValueError("need n_stations >= 3 and n_cross >= 2")
    if half_width >= ring_radius:
        raise ValueError("cross-section must not reach the axis")
    alpha = 2.0 * np.pi * np.arange(n_stations) / n_stations
    r = np.linspace(ring_radius - half_width, ring_radius + half_width, n_cross)
    z = np.linspace(-half_width, half_width, n_cross)
    A, Rr, Z = np.meshgrid(alpha, r, z, indexing="ij")
    X = np.stack([Rr * np.cos(A), Rr * np.sin(A), Z], axis=-1)
    return structured_mesh(X, periodic_axis0=True)


# ------------------------------------------------------------ point samplers

def random_ball_points(count: int, radius: float = 1.0, seed=0) -> np.ndarray:
    """``count`` points uniform in the ball, by rejection from the cube."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((0, 3))
    while len(out) < count:
        p = rng.uniform(-1.0, 1.0, size=(2 * (count - len(out)) + 8, 3))
        out = np.vstack([out, p[(p * p).sum(1) <= 1.0]])
    return radius * out[:count]
