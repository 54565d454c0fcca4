"""Locally conservative flux recovery.

On every triangle the recovered flux is affine,

    q(x) = a_K + f_K / 2 * (x - x_K),   a_K = -beta_K grad u_h + C_K,

so its divergence is exactly the elementwise source mean f_K. The constant
correction C_K is fitted to edge normal-flux targets: ordinary edges enter a
least-squares fit, the interface edge (at most one per triangle on a fitted
mesh) is imposed exactly so the transmission condition holds to roundoff.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import GeometryError, UnsupportedConfigurationError
from .fem import (FLUX_JUMP, BrokenSolution, ProblemSpec, evaluate_interface_data,
                  source_means)
from .mesh import BOUNDARY, INTERFACE, FittedMesh, InterfaceTrace
from .quadrature import triangle_points


@dataclass(frozen=True, eq=False)
class RecoveredFlux:
    mesh: FittedMesh
    gradient_part: np.ndarray  # -beta_K grad u_h, (T, 2)
    correction: np.ndarray  # C_K, (T, 2)
    source_mean: np.ndarray  # f_K, (T,)

    @property
    def constant(self) -> np.ndarray:
        return self.gradient_part + self.correction

    @property
    def barycenters(self) -> np.ndarray:
        return self.mesh.barycenters

    @property
    def divergence(self) -> np.ndarray:
        # div of f_K/2 (x - x_K) is f_K; the constant part is divergence free
        return self.source_mean

    def evaluate(self, points: np.ndarray, elements=None) -> np.ndarray:
        """Flux at ``points`` (N, 2) lying in ``elements`` (N,), default one per element.

        ``points`` may also be (T, Q, 2) for Q points per element.
        """
        idx = np.arange(self.mesh.n_triangles) if elements is None else np.asarray(elements)
        points = np.asarray(points, dtype=float)
        a, f, xk = self.constant[idx], self.source_mean[idx], self.barycenters[idx]
        if points.ndim == 3:
            return a[:, None] + 0.5 * f[:, None, None] * (points - xk[:, None])
        return a + 0.5 * f[:, None] * (points - xk)

    def at_barycenters(self) -> np.ndarray:
        return self.constant.copy()


@dataclass(frozen=True, eq=False)
class EdgeTargets:
    """Per-edge normal-flux targets.

    ``normals[e]`` is the fixed orientation of edge e. ``sigma[e, s]`` is the
    target normal flux for ``mesh.edge_triangles[e, s]`` measured along that
    triangle's outward normal. ``hard[e]`` marks exactly-imposed edges.
    """

    normals: np.ndarray
    sigma: np.ndarray
    hard: np.ndarray
    oriented: np.ndarray  # (E, 2) targets measured along normals[e]


def raw_flux(mesh: FittedMesh, u: BrokenSolution, f) -> RecoveredFlux:
    grad = u.gradients()
    return RecoveredFlux(mesh, -mesh.beta[:, None] * grad, np.zeros((mesh.n_triangles, 2)),
                         source_means(mesh, f))


def _edge_geometry(mesh: FittedMesh, trace: InterfaceTrace | None):
    p = mesh.vertices[mesh.edges]
    mid = p.mean(axis=1)
    d = p[:, 1] - p[:, 0]
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    normals = np.column_stack([d[:, 1], -d[:, 0]])
    if trace is not None:
        normals[trace.edge_ids] = trace.normals
    return mid, normals


def compute_edge_targets(mesh: FittedMesh, trace: InterfaceTrace, raw: RecoveredFlux,
                         spec: ProblemSpec) -> EdgeTargets:
    mid, normals = _edge_geometry(mesh, trace)
    et = mesh.edge_triangles
    two = et[:, 1] >= 0
    tri = np.where(et >= 0, et, et[:, :1])  # boundary: duplicate the single owner
    # +1 where normals[e] points out of the triangle in that slot
    out_sign = np.sign(np.einsum("esd,ed->es", mid[:, None] - mesh.barycenters[tri], normals))
    t = np.einsum("esd,ed->es", raw.evaluate(np.repeat(mid[:, None], 2, axis=1).reshape(-1, 2),
                                             tri.ravel()).reshape(-1, 2, 2), normals)
    # "minus" slot is the one normals[e] leaves; "plus" the one it enters
    t_minus = np.where(out_sign[:, 0] > 0, t[:, 0], t[:, 1])
    t_plus = np.where(out_sign[:, 0] > 0, t[:, 1], t[:, 0])
    mu = 0.5 * (t_minus + t_plus)
    tau_minus, tau_plus = mu.copy(), mu.copy()

    hard = mesh.edge_kind == INTERFACE
    if spec.case == FLUX_JUMP:
        gmid = np.zeros(len(mesh.edges))
        gmid[trace.edge_ids] = evaluate_interface_data(spec.g, trace.s_mid)
        tau_plus[hard] -= 0.5 * gmid[hard]
        tau_minus[hard] += 0.5 * gmid[hard]

    oriented = np.where((out_sign > 0), tau_minus[:, None], tau_plus[:, None])
    bnd = mesh.edge_kind == BOUNDARY
    oriented[bnd] = t[bnd]
    oriented[~two, 1] = np.nan
    sigma = oriented * out_sign
    return EdgeTargets(normals, sigma, hard, oriented)


def correct_elements(normals: np.ndarray, mismatches: np.ndarray,
                     hard: np.ndarray) -> np.ndarray:
    """Vectorized correction vectors for many elements.

    normals (T, 3, 2), mismatches (T, 3), hard (T, 3) bool -> C (T, 2).
    """
    normals = np.asarray(normals, dtype=float)
    r = np.asarray(mismatches, dtype=float)
    hard = np.asarray(hard, dtype=bool)
    nh = hard.sum(axis=1)
    if np.any(nh > 1):
        raise UnsupportedConfigurationError("more than one hard constraint on an element")
    C = np.zeros((len(r), 2))

    soft = nh == 0
    if soft.any():
        n, rr = normals[soft], r[soft]
        M = np.einsum("tei,tej->tij", n, n)
        rhs = np.einsum("tei,te->ti", n, rr)
        det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
        if np.any(det <= 1e-14):
            raise GeometryError("edge normals are collinear (degenerate triangle)")
        C[soft, 0] = (M[:, 1, 1] * rhs[:, 0] - M[:, 0, 1] * rhs[:, 1]) / det
        C[soft, 1] = (M[:, 0, 0] * rhs[:, 1] - M[:, 1, 0] * rhs[:, 0]) / det

    one = nh == 1
    if one.any():
        n, rr, hm = normals[one], r[one], hard[one]
        k = np.argmax(hm, axis=1)
        rows = np.arange(len(k))
        n_h, r_h = n[rows, k], rr[rows, k]
        t_h = np.column_stack([-n_h[:, 1], n_h[:, 0]])
        free = ~hm
        tn = np.einsum("ti,tei->te", t_h, n) * free
        nn = np.einsum("ti,tei->te", n_h, n)
        den = (tn ** 2).sum(axis=1)
        if np.any(den <= 1e-14):
            raise GeometryError("free edges cannot complement the hard constraint")
        alpha = ((rr - r_h[:, None] * nn) * tn).sum(axis=1) / den
        C[one] = r_h[:, None] * n_h + alpha[:, None] * t_h
    return C


def correct_element(normals, mismatches, hard_mask=(False, False, False)) -> np.ndarray:
    """Correction vector for a single triangle (see :func:`correct_elements`)."""
    return correct_elements(np.asarray(normals)[None], np.asarray(mismatches)[None],
                            np.asarray(hard_mask)[None])[0]


def element_outward_normals(mesh: FittedMesh):
    """Outward unit normals and midpoints of local edges k = (v_k, v_k+1)."""
    p = mesh.vertices[mesh.triangles]
    q = np.roll(p, -1, axis=1)
    d = q - p
    n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return n, 0.5 * (p + q)


def recover_flux(mesh: FittedMesh, trace: InterfaceTrace, u: BrokenSolution,
                 spec: ProblemSpec) -> RecoveredFlux:
    raw = raw_flux(mesh, u, spec.source)
    targets = compute_edge_targets(mesh, trace, raw, spec)
    normals, mids = element_outward_normals(mesh)
    te = mesh.triangle_edges
    slot = (mesh.edge_triangles[te, 1] == np.arange(mesh.n_triangles)[:, None]).astype(int)
    sigma = targets.sigma[te, slot]
    raw_n = np.einsum("tkd,tkd->tk", raw.evaluate(mids), normals)
    C = correct_elements(normals, sigma - raw_n, targets.hard[te])
    return replace(raw, correction=C)


def hdiv_norm_parts(q: RecoveredFlux) -> tuple[float, float]:
    """Squared L2 and squared divergence parts of the broken H(div) norm."""
    mesh = q.mesh
    p = mesh.vertices[mesh.triangles]
    edge_sq = (np.linalg.norm(p - np.roll(p, -1, axis=1), axis=-1) ** 2).sum(axis=1)
    second_moment = mesh.areas * edge_sq / 36.0  # int_K |x - x_K|^2
    a, f = q.constant, q.source_mean
    l2 = np.sum(mesh.areas * (a ** 2).sum(axis=1) + 0.25 * f ** 2 * second_moment)
    return float(l2), float(np.sum(mesh.areas * f ** 2))


def broken_hdiv_norm(q: RecoveredFlux, mesh: FittedMesh | None = None) -> float:
    if mesh is not None and mesh is not q.mesh:
        raise ValueError("flux belongs to a different mesh")
    l2, div = hdiv_norm_parts(q)
    return float(np.sqrt(l2 + div))


def hdiv_error(q: RecoveredFlux, exact_flux, exact_div) -> float:
    """Broken H(div) distance to an exact flux, by degree-5 quadrature per element.

    ``exact_flux(x, y, labels)`` returns (..., 2); ``exact_div(x, y, labels)`` the divergence.
    """
    mesh = q.mesh
    pts, w = triangle_points(mesh.vertices[mesh.triangles])
    lab = np.repeat(mesh.labels[:, None], pts.shape[1], axis=1)
    diff = exact_flux(pts[..., 0], pts[..., 1], lab) - q.evaluate(pts)
    ddiv = exact_div(pts[..., 0], pts[..., 1], lab) - q.source_mean[:, None]
    return float(np.sqrt(np.sum(w * ((diff ** 2).sum(axis=-1) + ddiv ** 2))))


def interface_residual(q: RecoveredFlux, trace: InterfaceTrace,
                       spec: ProblemSpec) -> tuple[float, float]:
    """Violation of the transmission relation at interface edge midpoints: (max, rms)."""
    qp = q.evaluate(trace.midpoints, trace.plus_triangles)
    qm = q.evaluate(trace.midpoints, trace.minus_triangles)
    r = np.einsum("ed,ed->e", qp - qm, trace.normals)
    if spec.case == FLUX_JUMP:
        r = r + evaluate_interface_data(spec.g, trace.s_mid)
    r = np.abs(r)
    return float(r.max()), float(np.sqrt(np.mean(r ** 2)))


def write_flux_text(q: RecoveredFlux, dest) -> None:
    """One line per element: ``k a_x a_y f_K x_K y_K``."""
    a, f, xk = q.constant, q.source_mean, q.barycenters
    lines = [f"{k} {ax!r} {ay!r} {fk!r} {x!r} {y!r}"
             for k, ((ax, ay), fk, (x, y)) in enumerate(zip(a.tolist(), f.tolist(), xk.tolist()))]
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)
