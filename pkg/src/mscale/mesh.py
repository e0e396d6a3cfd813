"""One-dimensional two-level discretization.

A domain is split into ``m`` uniform macro elements, each carrying ``n``
uniform fine nodes (element-local, left-closed), for ``C = m * n`` fine
nodes total. Piecewise-linear hat functions live on the macro nodes and
form a partition of unity; ``fold``/``unfold`` reshape between the fine
sample vector and the (micro x macro) matrix whose columns are elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MultiscaleMesh:
    start: float
    end: float
    m: int
    n: int
    macro_nodes: np.ndarray = field(repr=False)
    fine_nodes: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        """Macro element size."""
        return (self.end - self.start) / self.m

    @property
    def fine_count(self) -> int:
        return self.m * self.n


@dataclass(frozen=True)
class MicroDomain:
    """Support interval of a macro node's enrichment: twice the element size,
    centered at the node and clipped to the domain."""

    center: float
    half_width: float
    lo: float
    hi: float


def build_mesh(start: float, end: float, m: int, n: int) -> MultiscaleMesh:
    if not end > start:
        raise ValueError(f"domain end {end} must exceed start {start}")
    if m < 1:
        raise ValueError("need at least one macro element")
    if n < 2:
        raise ValueError("need at least two micro nodes per element")
    macro = np.linspace(start, end, m + 1)
    h = (end - start) / m
    # n left-closed samples per element; the grid never includes `end`
    offsets = np.arange(n) * (h / n)
    fine = (macro[:-1][:, None] + offsets[None, :]).ravel()
    return MultiscaleMesh(float(start), float(end), int(m), int(n), macro, fine)


def micro_domain(mesh: MultiscaleMesh, i: int) -> MicroDomain:
    _check_node(mesh, i)
    x = float(mesh.macro_nodes[i])
    h = mesh.h
    return MicroDomain(x, h, max(mesh.start, x - h), min(mesh.end, x + h))


def _check_node(mesh: MultiscaleMesh, i: int):
    if not 0 <= i <= mesh.m:
        raise ValueError(f"macro node index {i} outside 0..{mesh.m}")


def _check_inside(mesh: MultiscaleMesh, x: float):
    if not (mesh.start <= x <= mesh.end):
        raise ValueError(f"x = {x} outside domain [{mesh.start}, {mesh.end}]")


def element_of(mesh: MultiscaleMesh, x: float) -> int:
    """Macro element index containing x; x = end belongs to the last element."""
    _check_inside(mesh, x)
    e = int(np.searchsorted(mesh.macro_nodes, x, side="right")) - 1
    return min(max(e, 0), mesh.m - 1)


def locate(mesh: MultiscaleMesh, x: float):
    """Return (element index, macro nodes with nonzero hat, local coordinate).

    The local coordinate t is 0 at the element's left node and 1 at its
    right node; at t exactly 0 or 1 only a single hat is nonzero.
    """
    e = element_of(mesh, x)
    left = mesh.macro_nodes[e]
    t = (x - left) / (mesh.macro_nodes[e + 1] - left)
    if t == 0.0:
        return e, (e,), 0.0
    if t == 1.0:
        return e, (e + 1,), 1.0
    return e, (e, e + 1), float(t)


def hat(mesh: MultiscaleMesh, i: int, x: float) -> float:
    """Piecewise-linear shape function of macro node i: 1 at the node,
    0 at and beyond its neighbors."""
    _check_node(mesh, i)
    e = element_of(mesh, x)
    left = mesh.macro_nodes[e]
    t = (x - left) / (mesh.macro_nodes[e + 1] - left)
    if i == e:
        return float(1.0 - t)
    if i == e + 1:
        return float(t)
    return 0.0


def pu_sum(mesh: MultiscaleMesh, x: float) -> float:
    """Sum of all hat functions at x; equals 1 by the partition-of-unity
    property (evaluated literally, as a contract check)."""
    return float(sum(hat(mesh, i, x) for i in range(mesh.m + 1)))


def locate_many(mesh: MultiscaleMesh, xs: np.ndarray):
    """Vectorized support lookup for an array of points.

    Returns (nodes, weights): integer (N, 2) macro-node indices and float
    (N, 2) hat values. At points where a single hat is active the second
    weight is exactly zero.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size and (xs.min() < mesh.start or xs.max() > mesh.end):
        bad = xs[(xs < mesh.start) | (xs > mesh.end)][0]
        raise ValueError(f"x = {bad} outside domain [{mesh.start}, {mesh.end}]")
    e = np.searchsorted(mesh.macro_nodes, xs, side="right") - 1
    e = np.clip(e, 0, mesh.m - 1)
    left = mesh.macro_nodes[e]
    t = (xs - left) / (mesh.macro_nodes[e + 1] - left)
    nodes = np.stack([e, e + 1], axis=-1)
    weights = np.stack([1.0 - t, t], axis=-1)
    return nodes, weights


def fold(values: np.ndarray, mesh: MultiscaleMesh) -> np.ndarray:
    """Reshape fine-grid samples into the (n x m) matrix whose column j is
    macro element j's fine values in ascending node order."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.fine_count,):
        raise ValueError(
            f"expected {mesh.fine_count} fine values, got shape {values.shape}"
        )
    return values.reshape(mesh.m, mesh.n).T.copy()


def unfold(matrix: np.ndarray, mesh: MultiscaleMesh) -> np.ndarray:
    """Exact inverse of :func:`fold`."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (mesh.n, mesh.m):
        raise ValueError(
            f"expected shape ({mesh.n}, {mesh.m}), got {matrix.shape}"
        )
    return matrix.T.ravel().copy()


def mesh_to_json(mesh: MultiscaleMesh) -> dict:
    return {
        "start": mesh.start,
        "end": mesh.end,
        "m": mesh.m,
        "n": mesh.n,
        "version": 1,
    }


def mesh_from_json(obj: dict) -> MultiscaleMesh:
    if obj.get("version") != 1:
        raise ValueError(f"unsupported mesh schema version {obj.get('version')!r}")
    return build_mesh(float(obj["start"]), float(obj["end"]), int(obj["m"]), int(obj["n"]))
