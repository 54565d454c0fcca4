"""Fitted triangulations for the line, circle and star interface geometries.

Meshes are plain arrays wrapped in a frozen dataclass. The edge table and
its INTERIOR/BOUNDARY/INTERFACE classification are computed once, when the
mesh is built, and stored; :func:`validate_mesh` rechecks them against the
triangle labels so that an inconsistent relabeling is detected rather than
silently absorbed.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConsistencyError, GeometryError
from .quadrature import gauss_legendre_unit

MINUS, PLUS = 0, 1
INTERIOR, BOUNDARY, INTERFACE = 0, 1, 2
LINE_X, ANGLE = "line_x", "angle"

DEFAULT_MIN_ANGLE = 15.0


@dataclass(frozen=True, eq=False)
class FittedMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    labels: np.ndarray
    beta: np.ndarray
    beta_minus: float
    beta_plus: float
    edges: np.ndarray
    edge_triangles: np.ndarray
    edge_kind: np.ndarray
    triangle_edges: np.ndarray
    param_kind: str | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, vertices, triangles, labels, beta_minus, beta_plus,
                    param_kind=None, meta=None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        labels = np.ascontiguousarray(labels, dtype=np.int8)
        if beta_minus <= 0 or beta_plus <= 0:
            raise GeometryError("diffusion coefficients must be strictly positive")
        beta = np.where(labels == MINUS, float(beta_minus), float(beta_plus))
        edges, edge_tris, kind, tri_edges = _edge_table(triangles, labels)
        return cls(vertices, triangles, labels, beta, float(beta_minus),
                   float(beta_plus), edges, edge_tris, kind, tri_edges,
                   param_kind, dict(meta or {}))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of each triangle, in degrees."""
        return _triangle_angles(self.vertices[self.triangles]).min(axis=1)

    @property
    def h(self) -> float:
        e = self.vertices[self.edges]
        return float(np.linalg.norm(e[:, 1] - e[:, 0], axis=1).max())

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.edge_kind == BOUNDARY])

    @cached_property
    def interface_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.edge_kind == INTERFACE])

    @cached_property
    def plus_dof(self) -> np.ndarray:
        """Broken dof index of the PLUS copy of each vertex (the vertex itself off Γ)."""
        dof = np.arange(self.n_vertices)
        dof[self.interface_vertices] = self.n_vertices + np.arange(len(self.interface_vertices))
        return dof

    @property
    def n_broken(self) -> int:
        return self.n_vertices + len(self.interface_vertices)

    @cached_property
    def broken_triangles(self) -> np.ndarray:
        """Triangle connectivity in broken dofs: PLUS triangles use PLUS copies."""
        bt = self.triangles.copy()
        plus = self.labels == PLUS
        bt[plus] = self.plus_dof[self.triangles[plus]]
        return bt

    @cached_property
    def broken_to_vertex(self) -> np.ndarray:
        return np.concatenate([np.arange(self.n_vertices), self.interface_vertices])


def _triangle_angles(p: np.ndarray) -> np.ndarray:
    out = np.empty(p.shape[:2])
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.einsum("ij,ij->i", a, b) / (
            np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out[:, k] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return out


def _local_edges(triangles):
    loc = np.stack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1)
    return np.sort(loc.reshape(-1, 2), axis=1)


def _edge_table(triangles, labels):
    loc = _local_edges(triangles)
    edges, inverse, counts = np.unique(loc, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    edge_tris = -np.ones((len(edges), 2), dtype=np.int64)
    owner = np.repeat(np.arange(len(triangles)), 3)
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    edge_tris[:, 0] = owner[order[starts]]
    two = counts >= 2
    edge_tris[two, 1] = owner[order[starts[two] + 1]]
    kind = np.full(len(edges), INTERIOR, dtype=np.int8)
    kind[counts == 1] = BOUNDARY
    mixed = two & (labels[edge_tris[:, 0]] != labels[np.where(two, edge_tris[:, 1], 0)])
    kind[mixed] = INTERFACE
    return edges, edge_tris, kind, inverse.reshape(-1, 3)


def build_line_mesh(n: int, beta_minus: float = 1.0, beta_plus: float = 1.0) -> FittedMesh:
    """Uniform n x n right-triangle mesh of the unit square, interface on y = 1/2."""
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise GeometryError(f"line mesh needs an even n >= 2, got {n!r}")
    ticks = np.arange(n + 1) / n
    xx, yy = np.meshgrid(ticks, ticks)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00, v10 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    v01, v11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tris = np.concatenate([np.column_stack([v00, v10, v11]),
                           np.column_stack([v00, v11, v01])])
    rows = np.concatenate([np.repeat(np.arange(n), n)] * 2)
    labels = np.where(rows < n // 2, MINUS, PLUS)
    return FittedMesh.from_arrays(vertices, tris, labels, beta_minus, beta_plus,
                                  param_kind=LINE_X, meta={"kind": "line", "n": n})


def circle_radius(radius: float = 0.5) -> Callable:
    return lambda theta: np.full_like(np.asarray(theta, dtype=float), radius)


def star_radius(theta):
    return 0.35 * (1.0 + 0.25 * np.cos(5.0 * theta))



def _ring_spacing(ring):
    fwd = np.linalg.norm(np.roll(ring, -1, axis=0) - ring, axis=1)
    return 0.5 * (fwd + np.roll(fwd, 1))


def _graded_layers(start, end, n):
    """Per-spoke layer positions in [0, 1], (n_spokes, n + 1).

    Layer thickness varies log-linearly from ``start`` to ``end`` (the
    tangential spacing at each end of the spoke) and is then rescaled to fill
    the spoke, so cells stay close to unit aspect ratio at both ends.
    """
    x = (np.arange(n) + 0.5) / n
    w = start[:, None] ** (1 - x) * end[:, None] ** x
    c = np.concatenate([np.zeros((len(start), 1)), np.cumsum(w, axis=1)], axis=1)
    return c / c[:, -1:]


def _split_quads(xy, a, b, c, d):
    """Split quads (a, b, c, d) into two triangles along the better diagonal.

    ``a -> b`` runs along a ring, ``a -> d`` outward along a spoke. The a-c
    diagonal is used unless the b-d split has a strictly larger minimum angle.
    """
    t_ac = [np.column_stack([a, d, c]), np.column_stack([a, c, b])]
    t_bd = [np.column_stack([a, d, b]), np.column_stack([b, d, c])]
    q_ac = np.minimum(*[_triangle_angles(xy[t]).min(axis=1) for t in t_ac])
    q_bd = np.minimum(*[_triangle_angles(xy[t]).min(axis=1) for t in t_bd])
    use_bd = (q_bd > q_ac)[:, None]
    return np.vstack([np.where(use_bd, t_bd[0], t_ac[0]), np.where(use_bd, t_bd[1], t_ac[1])])

def _segments_cross(p):
    """True if any two non-adjacent edges of the closed polygon p intersect."""
    n = len(p)
    a, b = p, np.roll(p, -1, axis=0)

    def orient(u, v, w):
        return ((v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1])
                - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0]))

    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    d1, d2 = orient(A, B, C), orient(A, B, D)
    d3, d4 = orient(C, D, A), orient(C, D, B)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    return bool(hit[i[keep], j[keep]].any())


def build_mapped_mesh(radius_fn: Callable, n_theta: int, n_radial_in: int,
                      n_radial_out: int, half_width: float = 1.0,
                      beta_minus: float = 1.0, beta_plus: float = 1.0,
                      core_fraction: float = 0.5) -> FittedMesh:
    """Structured fitted mesh of [-w, w]^2 around the polar curve r(theta).

    The interface polygon passes through r(theta_i)(cos theta_i, sin theta_i),
    theta_i = 2 pi i / n_theta. Inside, a square core grid of half-width
    ``core_fraction * min(r) / sqrt(2)`` is joined to the polygon by
    ``n_radial_in`` blended rings; outside, ``n_radial_out`` rings blend the
    polygon to the square boundary sampled at the same angles. ``n_theta``
    must be a multiple of 4 so the core boundary matches the ring count.
    """
    if n_theta < 4 or n_theta % 4:
        raise GeometryError(f"n_theta must be a positive multiple of 4, got {n_theta}")
    if n_radial_in < 1 or n_radial_out < 1:
        raise GeometryError("radial layer counts must be positive")
    if not 0 < core_fraction < 1:
        raise GeometryError("core_fraction must lie in (0, 1)")
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    r = np.broadcast_to(np.asarray(radius_fn(theta), dtype=float), theta.shape)
    if not np.all(np.isfinite(r)) or r.min() <= 0:
        raise GeometryError("radius function must be finite and strictly positive")
    if r.max() >= half_width:
        raise GeometryError(
            f"interface radius {r.max():.4g} exceeds the inscribed radius {half_width}")
    cs = np.column_stack([np.cos(theta), np.sin(theta)])
    interface = r[:, None] * cs
    if _segments_cross(interface):
        raise GeometryError("interface polygon self-intersects; increase n_theta")
    outer = half_width * cs / np.abs(cs).max(axis=1, keepdims=True)

    p = n_theta // 4
    a = core_fraction * r.min() / np.sqrt(2)
    ticks = -a + 2 * a * np.arange(p + 1) / p
    gx, gy = np.meshgrid(ticks, ticks)
    core_xy = np.column_stack([gx.ravel(), gy.ravel()])
    core_idx = np.arange((p + 1) ** 2).reshape(p + 1, p + 1)  # [iy, ix]
    # core boundary nodes CCW from the corner (a, -a), then rotated so that
    # entry 0 sits at (or just below) angle 0
    ring0 = np.concatenate([core_idx[:p, p], core_idx[p, p:0:-1],
                            core_idx[p:0:-1, 0], core_idx[0, :p]])
    ring0 = np.roll(ring0, -(n_theta // 8))
    # odd p leaves entry 0 half a cell below angle 0; rotate the core onto it
    phi = -np.arctan2(core_xy[ring0[0], 1], core_xy[ring0[0], 0])
    rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    core_xy = core_xy @ rot.T
    q = core_xy[ring0]

    t_in = _graded_layers(_ring_spacing(q), _ring_spacing(interface), n_radial_in)
    t_out = _graded_layers(_ring_spacing(interface), _ring_spacing(outer), n_radial_out)
    layers = [q + t_in[:, [j]] * (interface - q) for j in range(1, n_radial_in + 1)]
    layers += [interface + t_out[:, [k]] * (outer - interface)
               for k in range(1, n_radial_out + 1)]
    vertices = np.vstack([core_xy] + layers)
    nc = len(core_xy)
    rings = [ring0] + [nc + j * n_theta + np.arange(n_theta) for j in range(len(layers))]

    v00, v10 = core_idx[:-1, :-1].ravel(), core_idx[:-1, 1:].ravel()
    v01, v11 = core_idx[1:, :-1].ravel(), core_idx[1:, 1:].ravel()
    tris = [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    labels = [np.full(2 * p * p, MINUS)]
    nxt = np.roll(np.arange(n_theta), -1)
    for j in range(len(rings) - 1):
        ra, rb = rings[j], rings[j + 1]
        tris.append(_split_quads(vertices, ra, ra[nxt], rb[nxt], rb))
        labels.append(np.full(2 * n_theta, MINUS if j < n_radial_in else PLUS))
    tris = np.vstack(tris)
    labels = np.concatenate(labels)

    pts = vertices[tris]
    d1, d2 = pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    scale = (2 * half_width) ** 2 / len(tris)
    bad = np.flatnonzero(area <= 1e-10 * scale)
    if len(bad):
        c = pts[bad[0]].mean(axis=0)
        ang = np.arctan2(c[1], c[0]) % (2 * np.pi)
        raise GeometryError(
            f"degenerate or inverted blended cell near theta = {ang:.6f}")
    meta = {"kind": "mapped", "n_theta": n_theta, "n_radial_in": n_radial_in,
            "n_radial_out": n_radial_out, "half_width": half_width}
    return FittedMesh.from_arrays(vertices, tris, labels, beta_minus, beta_plus,
                                  param_kind=ANGLE, meta=meta)


@dataclass
class MeshDiagnostics:
    violations: list[str]
    min_angle: float
    min_area: float
    n_interface_edges: int

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_mesh(mesh: FittedMesh, min_angle: float = DEFAULT_MIN_ANGLE) -> MeshDiagnostics:
    """Check every structural invariant of a fitted mesh; never raises."""
    out = []
    area = mesh.signed_areas
    if np.any(area <= 0):
        out.append(f"{int(np.sum(area <= 0))} triangles with non-positive signed area")
    angles = mesh.min_angles
    if angles.min() < min_angle:
        out.append(f"minimum angle {angles.min():.3f} deg below threshold {min_angle}")

    loc = _local_edges(mesh.triangles)
    uniq, counts = np.unique(loc, axis=0, return_counts=True)
    if np.any(counts > 2):
        out.append(f"{int(np.sum(counts > 2))} edges shared by more than two triangles")
    if len(uniq) != len(mesh.edges) or not np.array_equal(uniq, mesh.edges):
        out.append("stored edge table does not match the triangles")
    else:
        stored_boundary = mesh.edge_kind == BOUNDARY
        if not np.array_equal(stored_boundary, counts == 1):
            out.append("boundary classification inconsistent with edge multiplicities")
        two = counts == 2
        et = mesh.edge_triangles
        lab = mesh.labels
        mixed = np.zeros(len(uniq), dtype=bool)
        mixed[two] = lab[et[two, 0]] != lab[et[two, 1]]
        for e in np.flatnonzero(two & mixed & (mesh.edge_kind == INTERIOR)):
            out.append(f"INTERIOR edge {tuple(mesh.edges[e])} has mixed labels")
        for e in np.flatnonzero((mesh.edge_kind == INTERFACE) & ~mixed):
            out.append(f"INTERFACE edge {tuple(mesh.edges[e])} lacks one MINUS and one PLUS triangle")
    expected = np.where(mesh.labels == MINUS, mesh.beta_minus, mesh.beta_plus)
    if not np.array_equal(expected, mesh.beta):
        out.append(f"{int(np.sum(expected != mesh.beta))} triangles carry beta inconsistent with their label")
    if np.any(mesh.beta <= 0):
        out.append("non-positive diffusion coefficient")
    return MeshDiagnostics(out, float(angles.min()), float(np.abs(area).min()),
                           int(np.sum(mesh.edge_kind == INTERFACE)))


@dataclass(frozen=True, eq=False)
class InterfaceTrace:
    """Ordered interface edges with parametrization, normals and quadrature.

    Edge k runs from ``edges[k, 0]`` (parameter ``s0[k]``) to ``edges[k, 1]``
    (parameter ``s1[k]``). Quadrature weights include the edge length, so
    ``sum(g(quad_s) * quad_w)`` approximates the arc-length integral of g on
    the polygonal interface.
    """

    param_kind: str
    closed: bool
    n_vertices: int
    edge_ids: np.ndarray
    edges: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    s_mid: np.ndarray
    midpoints: np.ndarray
    lengths: np.ndarray
    normals: np.ndarray
    minus_triangles: np.ndarray
    plus_triangles: np.ndarray
    quad_t: np.ndarray
    quad_s: np.ndarray
    quad_w: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def length(self) -> float:
        return float(self.lengths.sum())

    @cached_property
    def vertex_ids(self) -> np.ndarray:
        if self.closed:
            return self.edges[:, 0].copy()
        return np.append(self.edges[:, 0], self.edges[-1, 1])

    @cached_property
    def vertex_s(self) -> np.ndarray:
        if self.closed:
            return self.s0.copy()
        return np.append(self.s0, self.s1[-1])


def vertex_parameter(xy: np.ndarray, param_kind: str) -> np.ndarray:
    if param_kind == LINE_X:
        return xy[..., 0].copy()
    if param_kind == ANGLE:
        return np.arctan2(xy[..., 1], xy[..., 0]) % (2 * np.pi)
    raise GeometryError(f"unknown parametrization {param_kind!r}")


def extract_interface(mesh: FittedMesh, param_kind: str | None = None,
                      quad_order: int = 10) -> InterfaceTrace:
    param_kind = param_kind or mesh.param_kind
    if param_kind not in (LINE_X, ANGLE):
        raise GeometryError(f"unknown parametrization {param_kind!r}")
    if quad_order < 1:
        raise GeometryError("quad_order must be positive")
    ids = np.flatnonzero(mesh.edge_kind == INTERFACE)
    if len(ids) == 0:
        raise GeometryError("mesh has no interface edges")
    ev = mesh.edges[ids].copy()
    s = vertex_parameter(mesh.vertices[ev], param_kind)
    if param_kind == ANGLE:
        wrap = np.abs(s[:, 1] - s[:, 0]) > np.pi
        s[wrap] = np.where(s[wrap] < np.pi, s[wrap] + 2 * np.pi, s[wrap])
    swap = s[:, 1] < s[:, 0]
    ev[swap] = ev[swap, ::-1]
    s[swap] = s[swap, ::-1]
    order = np.argsort(0.5 * (s[:, 0] + s[:, 1]), kind="stable")
    ev, s, ids = ev[order], s[order], ids[order]

    closed = param_kind == ANGLE
    links = ev[:-1, 1] == ev[1:, 0]
    if not links.all() or (closed and ev[-1, 1] != ev[0, 0]):
        raise GeometryError("interface edges do not form a single ordered chain")

    tri = mesh.edge_triangles[ids]
    first_minus = mesh.labels[tri[:, 0]] == MINUS
    minus_t = np.where(first_minus, tri[:, 0], tri[:, 1])
    plus_t = np.where(first_minus, tri[:, 1], tri[:, 0])

    p0, p1 = mesh.vertices[ev[:, 0]], mesh.vertices[ev[:, 1]]
    d = p1 - p0
    lengths = np.linalg.norm(d, axis=1)
    tang = d / lengths[:, None]
    nrm = np.column_stack([tang[:, 1], -tang[:, 0]])
    mid = 0.5 * (p0 + p1)
    sgn = np.sign(np.einsum("ij,ij->i", nrm, mesh.barycenters[plus_t] - mid))
    nrm *= sgn[:, None]
    if np.any(np.einsum("ij,ij->i", nrm, mesh.barycenters[minus_t] - mid) >= 0):
        raise ConsistencyError("interface normal does not separate MINUS from PLUS")
    handed = np.sign(tang[:, 0] * nrm[:, 1] - tang[:, 1] * nrm[:, 0])
    if not (np.all(handed > 0) or np.all(handed < 0)):
        raise ConsistencyError("mixed normal orientation along the interface")

    t, w = gauss_legendre_unit(quad_order)
    quad_s = s[:, :1] + t[None, :] * (s[:, 1:] - s[:, :1])
    quad_w = lengths[:, None] * w[None, :]
    return InterfaceTrace(param_kind, closed, mesh.n_vertices, ids, ev, s[:, 0].copy(), s[:, 1].copy(),
                          0.5 * (s[:, 0] + s[:, 1]), mid, lengths, nrm,
                          minus_t, plus_t, t, quad_s, quad_w)


def write_mesh_text(mesh: FittedMesh, dest, trace: InterfaceTrace | None = None) -> None:
    """Plain-text export; ``dest`` is a path or a writable text stream."""
    trace = trace or extract_interface(mesh)
    lines = [f"vertices {mesh.n_vertices} triangles {mesh.n_triangles} "
             f"interface_edges {trace.n_edges}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{i} {j} {k} {int(lab)} {b!r}" for (i, j, k), lab, b
              in zip(mesh.triangles.tolist(), mesh.labels.tolist(), mesh.beta.tolist())]
    lines += [f"{i} {j} {s!r}" for (i, j), s in zip(trace.edges.tolist(), trace.s_mid.tolist())]
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


def read_mesh_text(src, param_kind: str | None = None) -> FittedMesh:
    if isinstance(src, (str, os.PathLike)):
        with open(src) as fh:
            text = fh.read()
    elif isinstance(src, io.TextIOBase):
        text = src.read()
    else:
        text = str(src)
    lines = text.splitlines()
    head = lines[0].split()
    nv, nt = int(head[1]), int(head[3])
    vertices = np.array([[float(v) for v in ln.split()] for ln in lines[1:1 + nv]])
    rows = [ln.split() for ln in lines[1 + nv:1 + nv + nt]]
    tris = np.array([[int(c) for c in r[:3]] for r in rows])
    labels = np.array([int(r[3]) for r in rows])
    beta = np.array([float(r[4]) for r in rows])
    bm = beta[labels == MINUS][0] if np.any(labels == MINUS) else 1.0
    bp = beta[labels == PLUS][0] if np.any(labels == PLUS) else 1.0
    return FittedMesh.from_arrays(vertices, tris, labels, bm, bp, param_kind=param_kind)
