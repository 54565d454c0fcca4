"""Reduced interface data and the full-versus-reduced comparison.

The datum g is replaced by its discrete L2(Gamma) projection g_m onto the
first m functions of a fixed basis; the bulk discretization is untouched.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigurationError, IllConditionedBasisError
from .fem import BrokenSolution, ProblemSpec, TransmissionSolver, evaluate_interface_data
from .flux import RecoveredFlux, interface_residual, recover_flux
from .mesh import FittedMesh, InterfaceTrace

POLY, FOURIER, ADAPTED_LINE = "poly", "fourier", "adapted_line"
BASIS_KINDS = (POLY, FOURIER, ADAPTED_LINE)
DEFAULT_DOMAINS = {POLY: (0.0, 1.0), FOURIER: (0.0, 2 * np.pi), ADAPTED_LINE: (0.0, 1.0)}
GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True)
class BasisFunction:
    name: str
    fn: Callable

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.fn(s), dtype=float), s.shape)


def _poly_functions(lo, hi):
    k = 0
    while True:
        yield BasisFunction(f"s^{k}", lambda x, k=k: (2.0 * (x - lo) / (hi - lo) - 1.0) ** k)
        k += 1


def _fourier_functions(lo, hi):
    scale = 2 * np.pi / (hi - lo)
    yield BasisFunction("1", lambda x: np.ones_like(x))
    k = 1
    while True:
        yield BasisFunction(f"cos({k}t)", lambda x, k=k: np.cos(k * (x - lo) * scale))
        yield BasisFunction(f"sin({k}t)", lambda x, k=k: np.sin(k * (x - lo) * scale))
        k += 1


def _adapted_line_functions(lo, hi):
    pi = np.pi
    yield BasisFunction("sin(2pi x)", lambda x: np.sin(2 * pi * x))
    yield BasisFunction("cos(5pi x)", lambda x: np.cos(5 * pi * x))
    yield BasisFunction("(2x-1)^2", lambda x: (2 * x - 1) ** 2)
    yield BasisFunction("1", lambda x: np.ones_like(x))
    yield BasisFunction("cos(2pi x)", lambda x: np.cos(2 * pi * x))
    yield BasisFunction("sin(5pi x)", lambda x: np.sin(5 * pi * x))
    # continuation: period-one Fourier pairs of increasing frequency
    k = 2
    while True:
        yield BasisFunction(f"sin({2 * k}pi x)", lambda x, k=k: np.sin(2 * k * pi * x))
        yield BasisFunction(f"cos({2 * k}pi x)", lambda x, k=k: np.cos(2 * k * pi * x))
        k += 1


_GENERATORS = {POLY: _poly_functions, FOURIER: _fourier_functions,
               ADAPTED_LINE: _adapted_line_functions}


@dataclass(frozen=True)
class InterfaceBasis:
    kind: str
    functions: tuple
    domain: tuple

    @property
    def m(self) -> int:
        return len(self.functions)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.functions]

    def evaluate(self, s) -> np.ndarray:
        """Basis values at parameters s, shape s.shape + (m,)."""
        s = np.asarray(s, dtype=float)
        return np.stack([f(s) for f in self.functions], axis=-1)

    def combination(self, coefficients) -> Callable:
        c = np.array(coefficients, dtype=float)
        if len(c) != self.m:
            raise ValueError("coefficient count does not match the basis size")
        return lambda s: self.evaluate(s) @ c

    def truncate(self, m: int) -> "InterfaceBasis":
        return InterfaceBasis(self.kind, self.functions[:m], self.domain)


def make_basis(kind: str, m: int, domain: tuple | None = None) -> InterfaceBasis:
    """First m functions of a nested basis family."""
    if kind not in _GENERATORS:
        raise ConfigurationError(f"unknown basis kind {kind!r}; expected one of {BASIS_KINDS}")
    if int(m) != m or m < 1:
        raise ConfigurationError(f"basis size must be a positive integer, got {m!r}")
    lo, hi = domain or DEFAULT_DOMAINS[kind]
    gen = _GENERATORS[kind](lo, hi)
    return InterfaceBasis(kind, tuple(next(gen) for _ in range(int(m))), (lo, hi))


def interface_l2_norm(g, trace: InterfaceTrace) -> float:
    gq = evaluate_interface_data(g, trace.quad_s)
    return float(np.sqrt(np.sum(trace.quad_w * gq ** 2)))


@dataclass(frozen=True)
class Projection:
    coefficients: np.ndarray
    g_m: Callable
    rel_error: float
    gram_condition: float


def project_interface_data(g, basis: InterfaceBasis, trace: InterfaceTrace) -> Projection:
    """Discrete L2(Gamma) projection via QR of the weighted sample matrix."""
    sw = np.sqrt(trace.quad_w.ravel())
    A = basis.evaluate(trace.quad_s.ravel()) * sw[:, None]
    b = evaluate_interface_data(g, trace.quad_s).ravel() * sw
    Q, R = np.linalg.qr(A)
    sv = np.linalg.svd(R, compute_uv=False)
    gram_cond = np.inf if sv[-1] == 0 else float((sv[0] / sv[-1]) ** 2)
    if gram_cond > GRAM_COND_LIMIT:
        raise IllConditionedBasisError(
            f"Gram matrix condition {gram_cond:.3e} exceeds {GRAM_COND_LIMIT:.0e} "
            f"({basis.kind}, m={basis.m})")
    c = solve_triangular(R, Q.T @ b)
    nb = np.linalg.norm(b)
    rel = 0.0 if nb == 0 else float(np.linalg.norm(b - A @ c) / nb)
    return Projection(c, basis.combination(c), rel, gram_cond)


@dataclass(frozen=True)
class ReducedRunRecord:
    m: int
    g_rel_err: float
    eu_rms: float
    eu_inf: float
    eq_rms: float
    eq_inf: float
    residual: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_tuple(self):
        return astuple(self)


def _rms_max(v: np.ndarray) -> tuple[float, float]:
    v = np.abs(v)
    return float(np.sqrt(np.mean(v ** 2))), float(v.max())


class InterfaceReduction:
    """Full-versus-reduced comparison on one mesh.

    The reference solve (exact g) and its recovered flux are computed once
    and reused by every :meth:`run`.
    """

    def __init__(self, mesh: FittedMesh, trace: InterfaceTrace, spec: ProblemSpec):
        self.mesh, self.trace, self.spec = mesh, trace, spec
        self.solver = TransmissionSolver(mesh, trace)
        self._reference = None

    @property
    def reference(self) -> tuple[BrokenSolution, RecoveredFlux]:
        if self._reference is None:
            u = self.solver.solve(self.spec)
            self._reference = (u, recover_flux(self.mesh, self.trace, u, self.spec))
        return self._reference

    def solve_reduced(self, g_m) -> tuple[ProblemSpec, BrokenSolution, RecoveredFlux]:
        spec_m = self.spec.with_data(g=g_m)
        u = self.solver.solve(spec_m)
        return spec_m, u, recover_flux(self.mesh, self.trace, u, spec_m)

    def run(self, basis: InterfaceBasis) -> ReducedRunRecord:
        proj = project_interface_data(self.spec.g, basis, self.trace)
        spec_m, u_m, q_m = self.solve_reduced(proj.g_m)
        u_h, q_h = self.reference
        eu = _rms_max(u_h.values - u_m.values)
        dq = np.linalg.norm(q_h.at_barycenters() - q_m.at_barycenters(), axis=1)
        eq = _rms_max(dq)
        res, _ = interface_residual(q_m, self.trace, spec_m)
        return ReducedRunRecord(basis.m, proj.rel_error, *eu, *eq, res)

    def sweep(self, kind: str, ms: Sequence[int], domain=None) -> list[ReducedRunRecord]:
        full = make_basis(kind, max(ms), domain)
        return [self.run(full.truncate(m)) for m in ms]


def reduced_solve(mesh: FittedMesh, trace: InterfaceTrace, spec: ProblemSpec,
                  basis: InterfaceBasis, m: int | None = None) -> ReducedRunRecord:
    if m is not None:
        basis = basis.truncate(m) if m <= basis.m else make_basis(basis.kind, m, basis.domain)
    return InterfaceReduction(mesh, trace, spec).run(basis)
