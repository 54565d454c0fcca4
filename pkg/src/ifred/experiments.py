"""Experiment definitions: geometries, interface data and table layouts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fem import FLUX_JUMP, SOLUTION_JUMP, ProblemSpec, TransmissionSolver, lumped_l2_norm
from .flux import hdiv_error, recover_flux
from .mesh import (build_line_mesh, build_mapped_mesh, circle_radius, extract_interface,
                   star_radius)
from .reduction import ADAPTED_LINE, FOURIER, POLY, InterfaceReduction, ReducedRunRecord

CASES = ("line-flux", "line-sol", "circle-flux", "circle-sol", "star-flux")
BETA_MINUS, BETA_PLUS = 1.0, 5.0
SOURCE = 1.0
CIRCLE_RADIUS = 0.5
HALF_WIDTH = 1.0


def line_datum(x):
    return np.sin(2 * np.pi * x) + 0.35 * np.cos(5 * np.pi * x) + 0.20 * (2 * x - 1) ** 2


def angular_datum(theta):
    return np.sin(2 * theta) + 0.35 * np.cos(5 * theta) + 0.20 * np.cos(theta)


NATURAL_BASES = {
    "line-flux": (ADAPTED_LINE, POLY),
    "line-sol": (POLY, ADAPTED_LINE),
    "circle-flux": (FOURIER,),
    "circle-sol": (FOURIER,),
    "star-flux": (FOURIER,),
}

TABLES = {
    1: ("line-flux", ADAPTED_LINE, (1, 2, 3)),
    2: ("line-sol", POLY, (1, 4, 8)),
    3: ("line-sol", ADAPTED_LINE, (1, 2, 3)),
    4: ("circle-flux", FOURIER, (1, 5, 10)),
    5: ("star-flux", FOURIER, (1, 3, 5, 8, 10)),
}


@dataclass
class RunConfig:
    case: str = "line-flux"
    basis: str | None = None
    ranks: tuple = (1, 2, 3)
    n: int = 64
    n_theta: int = 128
    n_radial_in: int = 16
    n_radial_out: int = 16
    quad_order: int = 10
    allow_extra: bool = False
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigurationError(f"unknown case {self.case!r}; expected one of {CASES}")
        if self.basis is None:
            self.basis = NATURAL_BASES[self.case][0]
        if self.basis not in NATURAL_BASES[self.case] and not self.allow_extra:
            raise ConfigurationError(
                f"basis {self.basis!r} is not defined for {self.case}; pass allow_extra to force it")
        if any(int(m) != m or m < 1 for m in self.ranks):
            raise ConfigurationError("ranks must be positive integers")
        if self.quad_order < 2:
            raise ConfigurationError("quad_order must be at least 2")

    @property
    def geometry(self) -> str:
        return self.case.split("-")[0]

    @property
    def problem_case(self) -> str:
        return FLUX_JUMP if self.case.endswith("flux") else SOLUTION_JUMP

    def refined(self) -> "RunConfig":
        return RunConfig(self.case, self.basis, self.ranks, 2 * self.n, 2 * self.n_theta,
                         2 * self.n_radial_in, 2 * self.n_radial_out, self.quad_order,
                         self.allow_extra, self.seed)

    def describe(self) -> str:
        if self.geometry == "line":
            return f"# mesh n={self.n} quad_order={self.quad_order}"
        return (f"# mesh n_theta={self.n_theta} n_radial_in={self.n_radial_in} "
                f"n_radial_out={self.n_radial_out} quad_order={self.quad_order}")


def build_case(cfg: RunConfig):
    """Mesh, interface trace and problem data for a configured case."""
    if cfg.geometry == "line":
        mesh = build_line_mesh(cfg.n, BETA_MINUS, BETA_PLUS)
        g = line_datum
    else:
        radius = circle_radius(CIRCLE_RADIUS) if cfg.geometry == "circle" else star_radius
        mesh = build_mapped_mesh(radius, cfg.n_theta, cfg.n_radial_in, cfg.n_radial_out,
                                 HALF_WIDTH, BETA_MINUS, BETA_PLUS)
        g = angular_datum
    trace = extract_interface(mesh, quad_order=cfg.quad_order)
    spec = ProblemSpec(cfg.problem_case, SOURCE, g, BETA_MINUS, BETA_PLUS)
    return mesh, trace, spec


def run_experiment(cfg: RunConfig) -> list[ReducedRunRecord]:
    mesh, trace, spec = build_case(cfg)
    return InterfaceReduction(mesh, trace, spec).sweep(cfg.basis, list(cfg.ranks))


def table_config(table_id: int, **overrides) -> RunConfig:
    if table_id not in TABLES:
        raise ConfigurationError(f"table id must be one of {sorted(TABLES)}, got {table_id}")
    case, basis, ranks = TABLES[table_id]
    return RunConfig(case=case, basis=basis, ranks=ranks, **overrides)


# manufactured line-interface solution: continuous value and flux across y = 1/2
MMS_BETA = (1.0, 5.0)


def mms_solution(x, y):
    return np.where(y <= 0.5, np.sin(np.pi * x) * y, np.sin(np.pi * x) * (y / 5 + 0.4))


def _mms_factor(y, labels):
    return np.where(labels == 0, y, y + 2.0)


def mms_flux(x, y, labels):
    a = _mms_factor(y, labels)
    return np.stack([-np.pi * np.cos(np.pi * x) * a, -np.sin(np.pi * x) * np.ones_like(a)], axis=-1)


def mms_divergence(x, y, labels):
    return np.pi ** 2 * np.sin(np.pi * x) * _mms_factor(y, labels)


MMS_SOURCE = (lambda x, y: np.pi ** 2 * np.sin(np.pi * x) * y,
              lambda x, y: np.pi ** 2 * np.sin(np.pi * x) * (y + 2.0))


def homogeneous_mms():
    """beta = 1 on both sides: u = sin(pi x) y solves -Lap u = pi^2 sin(pi x) y."""
    sol = lambda x, y: np.sin(np.pi * x) * y
    flux = lambda x, y, lab: np.stack([-np.pi * np.cos(np.pi * x) * y,
                                       -np.sin(np.pi * x) * np.ones_like(y)], axis=-1)
    div = lambda x, y, lab: np.pi ** 2 * np.sin(np.pi * x) * y
    src = lambda x, y: np.pi ** 2 * np.sin(np.pi * x) * y
    return (1.0, 1.0), src, sol, flux, div


def convergence_study(ns=(16, 32, 64, 128), homogeneous: bool = False):
    """Rows (n, h, nodal L2 error, H(div) flux error, order_u, order_q)."""
    if homogeneous:
        beta, src, sol, flux, div = homogeneous_mms()
    else:
        beta, src, sol, flux, div = MMS_BETA, MMS_SOURCE, mms_solution, mms_flux, mms_divergence
    rows = []
    prev = None
    for n in ns:
        mesh = build_line_mesh(n, *beta)
        trace = extract_interface(mesh)
        spec = ProblemSpec(FLUX_JUMP, src, 0.0, *beta, dirichlet=sol)
        u = TransmissionSolver(mesh, trace).solve(spec)
        q = recover_flux(mesh, trace, u, spec)
        corners = mesh.vertices[mesh.triangles]
        eu = lumped_l2_norm(mesh, u.element_values() - sol(corners[..., 0], corners[..., 1]))
        eq = hdiv_error(q, flux, div)
        h = 1.0 / n
        if prev is None:
            ou = oq = float("nan")
        else:
            ou = np.log(prev[1] / eu) / np.log(prev[0] / h)
            oq = np.log(prev[2] / eq) / np.log(prev[0] / h)
        rows.append((n, h, eu, eq, float(ou), float(oq)))
        prev = (h, eu, eq)
    return rows
