"""Quick invariant checks behind ``ifred selftest``.

Each check returns ``(ok, detail)``; the suite runs on coarse meshes so it
finishes in a few seconds.
"""

from __future__ import annotations

import numpy as np

from .experiments import RunConfig, angular_datum, build_case, line_datum
from .fem import TransmissionSolver
from .flux import correct_elements, recover_flux
from .linalg import SparseSymMatrix, solve_spd
from .mesh import (build_line_mesh, build_mapped_mesh, circle_radius, extract_interface,
                   star_radius, validate_mesh)
from .reduction import InterfaceReduction, make_basis, project_interface_data


def random_triangles(rng: np.random.Generator, n: int, min_angle: float = 15.0) -> np.ndarray:
    """``n`` random triangles (n, 3, 2), counterclockwise, all angles >= min_angle."""
    out = []
    while sum(len(o) for o in out) < n:
        p = rng.uniform(-1, 1, size=(2 * n, 3, 2)) * rng.uniform(1e-3, 1e3, size=(2 * n, 1, 1))
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        p[cross < 0] = p[cross < 0][:, [0, 2, 1]]
        ang = np.full(len(p), 180.0)
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            c = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            ang = np.minimum(ang, np.degrees(np.arccos(np.clip(c, -1, 1))))
        out.append(p[ang >= min_angle])
    return np.concatenate(out)[:n]


def outward_normals(tri: np.ndarray) -> np.ndarray:
    d = np.roll(tri, -1, axis=1) - tri
    n = np.stack([d[..., 1], -d[..., 0]], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def sigma_min_bound(min_angle: float) -> float:
    """Smallest singular value of the unit-normal matrix over triangles whose
    angles are all >= min_angle (degrees): sqrt(2) sin(min_angle), attained
    by the isosceles triangle with two angles equal to min_angle."""
    return float(np.sqrt(2.0) * np.sin(np.radians(min_angle)))


def check_correction_stability(seed: int = 0, n: int = 10_000, min_angle: float = 15.0):
    rng = np.random.default_rng(seed)
    N = outward_normals(random_triangles(rng, n, min_angle))
    b = rng.normal(size=(n, 3))
    C = correct_elements(N, b, np.zeros((n, 3), dtype=bool))
    smin = np.linalg.svd(N, compute_uv=False)[:, -1]
    ratio = np.linalg.norm(C, axis=1) * smin / np.linalg.norm(b, axis=1)
    ok = bool(ratio.max() <= 1 + 1e-10 and smin.min() >= sigma_min_bound(min_angle) * (1 - 1e-12))
    return ok, f"max |C| sigma_min / |b| = {ratio.max():.6f}, min sigma_min = {smin.min():.4f}"


def check_projection_values():
    expected = [(RunConfig("line-flux"), (1, 2, 3), (0.3602, 0.1232, 0.0)),
                (RunConfig("circle-flux", n_theta=64, n_radial_in=8, n_radial_out=8),
                 (1, 5, 10), (1.000, 0.3246, 0.0))]
    worst = 0.0
    for cfg, ms, vals in expected:
        mesh, trace, spec = build_case(cfg)
        for m, v in zip(ms, vals):
            rel = project_interface_data(spec.g, make_basis(cfg.basis, m), trace).rel_error
            worst = max(worst, abs(rel - v))
    return worst <= 1e-3, f"max deviation {worst:.2e}"


def _small_runs():
    for case, kw in [("line-flux", dict(n=16)), ("line-sol", dict(n=16)),
                     ("circle-flux", dict(n_theta=32, n_radial_in=4, n_radial_out=4)),
                     ("circle-sol", dict(n_theta=32, n_radial_in=4, n_radial_out=4)),
                     ("star-flux", dict(n_theta=64, n_radial_in=8, n_radial_out=8))]:
        yield RunConfig(case, **kw)


def check_divergence_identity():
    worst = 0.0
    for cfg in _small_runs():
        mesh, trace, spec = build_case(cfg)
        q = recover_flux(mesh, trace, TransmissionSolver(mesh, trace).solve(spec), spec)
        xk = mesh.barycenters
        k = np.arange(mesh.n_triangles)
        dx = q.evaluate(xk + [1.0, 0.0], k) - q.evaluate(xk, k)
        dy = q.evaluate(xk + [0.0, 1.0], k) - q.evaluate(xk, k)
        div = dx[:, 0] + dy[:, 1]
        worst = max(worst, float(np.abs(div - q.source_mean).max()))
    return worst <= 1e-12, f"max |div q - f_K| = {worst:.2e}"


def check_interface_residual():
    worst = 0.0
    for cfg in _small_runs():
        mesh, trace, spec = build_case(cfg)
        red = InterfaceReduction(mesh, trace, spec)
        for rec in red.sweep(cfg.basis, [1, 2, 3]):
            worst = max(worst, rec.residual)
    return worst <= 1e-13, f"max residual {worst:.2e}"


def check_collapse():
    mesh, trace, spec = build_case(RunConfig("line-flux", n=16))
    rec = InterfaceReduction(mesh, trace, spec).run(make_basis("adapted_line", 3))
    worst = max(rec.eu_rms, rec.eu_inf, rec.eq_rms, rec.eq_inf)
    return rec.g_rel_err <= 1e-13 and worst <= 1e-11, f"max error at m=3: {worst:.2e}"


def check_monotone_decay():
    line = extract_interface(build_line_mesh(16))
    circle = extract_interface(build_mapped_mesh(circle_radius(0.5), 32, 4, 4))
    ok = True
    for g, kind, trace in [(line_datum, "poly", line), (line_datum, "adapted_line", line),
                           (angular_datum, "fourier", circle)]:
        errs = [project_interface_data(g, make_basis(kind, m), trace).rel_error
                for m in range(1, 11)]
        ok &= bool(np.all(np.diff(errs) <= 1e-12))
    return ok, "g_rel_err nonincreasing for poly, adapted_line and fourier"


def check_solver_residual(seed: int = 0):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(50, 50))
    A = SparseSymMatrix(B @ B.T + 50 * np.eye(50))
    b = rng.normal(size=50)
    x = solve_spd(A, b)
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    return res <= 1e-13, f"relative residual {res:.2e}"


def check_meshes():
    meshes = [build_line_mesh(16), build_mapped_mesh(circle_radius(0.5), 32, 4, 4),
              build_mapped_mesh(star_radius, 64, 8, 8)]
    bad = [d for d in map(validate_mesh, meshes) if not d.ok]
    return not bad, f"{len(meshes) - len(bad)}/{len(meshes)} meshes valid"


def run_selftest(seed: int = 0):
    """List of ``(name, ok, detail)`` for every property."""
    checks = [
        ("mesh-validity", check_meshes),
        ("solver-residual", lambda: check_solver_residual(seed)),
        ("projection-values", check_projection_values),
        ("monotone-decay", check_monotone_decay),
        ("divergence-identity", check_divergence_identity),
        ("interface-residual", check_interface_residual),
        ("exact-collapse", check_collapse),
        ("correction-stability", lambda: check_correction_stability(seed)),
    ]
    results = []
    for name, fn in checks:
        ok, detail = fn()
        results.append((name, bool(ok), detail))
    return results
