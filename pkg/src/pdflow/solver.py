"""Regularized Taylor-Hood solver for the (p, delta)-structure system.

The velocity is written as ``v = u + g`` with ``g`` the extension of the
data and ``u`` zero on the boundary and discretely solenoidal. The
regularized problem adds ``(1/n) <|Du|^(sigma-2) Du, D phi>`` and is solved
by damped Picard iteration with lagged (secant) viscosity and Oseen-type
convection, or optionally by Newton's method.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fem
from .fem import DiscreteField, geometry
from .norms import norm_W1p
from .quadrature import DEFAULT_DEGREE
from .stress import stress_eval

log = logging.getLogger(__name__)

VISC_FLOOR = 1e-10


class SolverError(RuntimeError):
    pass


def _grad(f, geom):
    if f is None:
        return 0.0
    return f.grad_at_quad(geom)


def _sym(G):
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def _frob(A):
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


def _values(f, geom):
    if f is None:
        return 0.0
    return f.at_quad(geom)


def _integrate(vals, geom):
    return float(np.sum(vals * geom.wdet))


def viscous_form(u, g, phi, m, degree=DEFAULT_DEGREE):
    """``<S(Du + Dg), D phi>``."""
    geom = geometry(phi.mesh, degree)
    D = _sym(_grad(u, geom) + _grad(g, geom))
    S = stress_eval(D, m)
    return _integrate(np.einsum("mqij,mqij->mq", S, phi.grad_at_quad(geom)), geom)


def convective_form(u, g, phi, degree=DEFAULT_DEGREE):
    """``-<(u + g) (x) (u + g), D phi>``."""
    geom = geometry(phi.mesh, degree)
    v = _values(u, geom) + _values(g, geom)
    v = np.broadcast_to(v, phi.at_quad(geom).shape)
    return -_integrate(np.einsum("mqi,mqj,mqij->mq", v, v, phi.grad_at_quad(geom)), geom)


def convective_reformulation_check(u, g, g1, degree=DEFAULT_DEGREE):
    """``|<T(u), u> - (-<u.grad u, g> + 1/2 <g1 u, u> - <g.grad u, g>)|``.

    Both sides agree for exactly solenoidal ``u`` with zero trace and
    ``div g = g1``; discretely the difference measures the divergence
    defect and quadrature error.
    """
    geom = geometry(u.mesh, degree)
    lhs = convective_form(u, g, u, degree)
    U = u.at_quad(geom)
    Gu = u.grad_at_quad(geom)
    Gv = g.at_quad(geom)
    div1 = g1.at_quad(geom)
    ugradu = np.einsum("mqj,mqij->mqi", U, Gu)
    ggradu = np.einsum("mqj,mqij->mqi", Gv, Gu)
    rhs = (
        -_integrate(np.einsum("mqi,mqi->mq", ugradu, Gv), geom)
        + 0.5 * _integrate(div1 * np.einsum("mqi,mqi->mq", U, U), geom)
        - _integrate(np.einsum("mqi,mqi->mq", ggradu, Gv), geom)
    )
    return abs(lhs - rhs)


def penalty_form(u, phi, sigma, degree=DEFAULT_DEGREE):
    """``<|Du|^(sigma-2) Du, D phi>``."""
    if sigma < 2:
        raise ValueError("penalty exponent must be >= 2")
    geom = geometry(phi.mesh, degree)
    D = _sym(u.grad_at_quad(geom))
    w = _frob(D) ** (sigma - 2.0) if sigma > 2 else 1.0
    return _integrate(w * np.einsum("mqij,mqij->mq", D, phi.grad_at_quad(geom)), geom)


@dataclass(frozen=True)
class SolveConfig:
    """Settings of the regularized solve.

    ``n_reg=None`` switches the penalty off (the limit 1/n = 0) and
    ``convection=False`` drops the convective term (p-Stokes). With
    ``continuation > 0`` the solve is repeated that many times with n
    doubled, each warm-started from the previous solution.
    """

    n_reg: Optional[int] = 100
    sigma: float = 4.0
    max_picard: int = 60
    tol_rel: float = 1e-8
    damping: float = 1.0
    newton: bool = False
    visc_floor: float = VISC_FLOOR
    continuation: int = 0
    max_stall: int = 5
    convection: bool = True

    def __post_init__(self):
        if self.n_reg is not None and self.n_reg < 1:
            raise ValueError("n_reg must be >= 1 (or None to drop the penalty)")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not self.sigma > 2:
            raise ValueError("sigma must exceed 2")

    def check_exponents(self, ex):
        if not self.sigma > max(ex.s, 2.0):
            raise ValueError(f"sigma = {self.sigma} must exceed max(s, 2) = {max(ex.s, 2.0):.6g}")

    @property
    def penalty_weight(self):
        return 0.0 if self.n_reg is None else 1.0 / self.n_reg


@dataclass(eq=False)
class SolveResult:
    u: DiscreteField
    pressure: DiscreteField
    v: DiscreteField
    residual_history: list
    Du_norm_p: float
    Du_norm_sigma: float
    converged: bool
    status: str
    iterations: int
    n_reg: Optional[int]
    sigma: float
    p: float
    apriori_ok: Optional[bool] = None
    metadata: dict = field(default_factory=dict)


class _System:
    """Nonlinear residual and its linearizations for fixed data."""

    def __init__(self, mesh, g, force, m, cfg):
        self.mesh = mesh
        self.g = g
        self.m = m
        self.cfg = cfg
        self.geom = geometry(mesh)
        self.n = 2 * mesh.p2.ndof
        self.F = fem.load_vector(mesh, force) if force is not None else np.zeros(self.n)
        self.B = fem.divergence_matrix(mesh).tocsr()
        self.Gg = g.grad_at_quad(self.geom)
        self.Vg = g.at_quad(self.geom)
        self.cells = mesh.p2.vector_cells()

    def _state(self, u):
        Gu = u.grad_at_quad(self.geom)
        Du = _sym(Gu)
        Dv = Du + _sym(self.Gg)
        V = u.at_quad(self.geom) + self.Vg
        return Du, Dv, V

    def _nu(self, Dv):
        return self.m.viscosity(_frob(Dv), floor=self.cfg.visc_floor)

    def _pen(self, Du):
        w = self.cfg.penalty_weight
        if w == 0:
            return 0.0
        return w * _frob(Du) ** (self.cfg.sigma - 2.0)

    def residual(self, u, pressure):
        """Momentum residual vector (all velocity dofs)."""
        Du, Dv, V = self._state(u)
        T = self._nu(Dv)[..., None, None] * Dv + np.asarray(self._pen(Du))[..., None, None] * Du
        if self.cfg.convection:
            T = T - np.einsum("mqi,mqj->mqij", V, V)
        local = np.einsum("mqij,mqAij,mq->mA", T, self.geom.full_grad, self.geom.wdet, optimize=True)
        r = fem.assemble_vector(local, self.cells, self.n)
        return r - self.B.T @ pressure.dofs - self.F

    def matrix(self, u, newton=False):
        Du, Dv, V = self._state(u)
        geom = self.geom
        nu = self._nu(Dv)
        pen = self._pen(Du)
        if newton:
            coeff = _tangent(nu, Dv, self.m.p - 2.0, self.m.delta + _frob(Dv))
            if self.cfg.penalty_weight:
                nd = _frob(Du)
                coeff = coeff + _tangent(pen + 0.0 * nd, Du, self.cfg.sigma - 2.0, nd)
            A = fem.sym_grad_matrix(self.mesh, coeff)
        else:
            A = fem.sym_grad_matrix(self.mesh, nu + pen)
        if not self.cfg.convection:
            return A
        C = -np.einsum("mqi,qBj,mqAij,mq->mAB", V, geom.vec_values, geom.full_grad, geom.wdet, optimize=True)
        if newton:
            C -= np.einsum("qBi,mqj,mqAij,mq->mAB", geom.vec_values, V, geom.full_grad, geom.wdet, optimize=True)
        return A + fem.assemble_matrix(C, self.cells, self.cells, (self.n, self.n))


def _tangent(nu, D, expo, denom):
    """Fourth-order tangent of ``D -> nu(|D|) D`` for ``nu = c * base^expo``.

    ``denom`` is the base times ``|D|`` divided by ``|D|``, i.e. the base;
    the correction term is ``expo * nu * D (x) D / (|D| * base)``.
    """
    eye = np.einsum("ik,jl->ijkl", np.eye(2), np.eye(2))
    nd = _frob(D)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where((nd > 0) & (denom > 0), expo * nu / (nd * denom), 0.0)
    return (
        np.asarray(nu)[..., None, None, None, None] * eye
        + fac[..., None, None, None, None] * np.einsum("mqij,mqkl->mqijkl", D, D)
    )


def _zero_mean(mesh, p):
    m = fem.p1_integrals(mesh)
    return p - (m @ p) / m.sum()


def solve_regularized(mesh, ext, f, m, cfg: SolveConfig, u0=None):
    """Solve for ``u`` (zero trace, discretely solenoidal) and the pressure.

    ``ext`` is an :class:`~pdflow.extension.ExtensionPair` or a vector-P2
    field ``g``; ``f`` a force density ``f(x, y) -> (fx, fy)`` or None.
    The iteration stops when the residual, measured in the discrete dual
    norm and relative to the residual of the initial state, drops below
    ``cfg.tol_rel``. A residual that fails to decrease on ``cfg.max_stall``
    consecutive steps (each halving the damping) ends the run as
    non-convergent; the partial result is returned.
    """
    g = getattr(ext, "g", ext)
    result = _solve_once(mesh, g, f, m, cfg, u0)
    n_reg = cfg.n_reg
    for _ in range(cfg.continuation):
        if not result.converged or n_reg is None:
            break
        n_reg *= 2
        step = SolveConfig(**{**cfg.__dict__, "n_reg": n_reg, "continuation": 0})
        result = _solve_once(mesh, g, f, m, step, result.u)
    return result


def _solve_once(mesh, g, f, m, cfg, u0):
    sysm = _System(mesh, g, f, m, cfg)
    dual = fem.velocity_dual_norm(mesh)
    free = fem.free_velocity_dofs(mesh)
    u = u0 if u0 is not None else fem.zero_field(mesh, "vector-P2")
    pres = fem.zero_field(mesh, "scalar-P1")
    R = sysm.residual(u, pres)
    scale = dual(R[free])
    history = []
    omega = cfg.damping
    best = np.inf
    stall = 0
    status = "max-iterations"
    converged = False
    it = 0
    for it in range(1, cfg.max_picard + 1):
        A = sysm.matrix(u, newton=cfg.newton)
        G = -(sysm.B @ u.dofs)
        try:
            du, dp, _ = fem.SaddleSolver(mesh, A).solve(-R, G)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            status = f"linear-solver-breakdown: {exc}"
            break
        u = u + DiscreteField("vector-P2", omega * du, mesh)
        pres = pres + DiscreteField("scalar-P1", omega * dp, mesh)
        R = sysm.residual(u, pres)
        res = dual(R[free])
        rel = res / scale if scale > 0 else res
        history.append(float(rel))
        log.debug("iteration %d: relative residual %.3e (damping %.3g)", it, rel, omega)
        if rel <= cfg.tol_rel:
            converged, status = True, "converged"
            break
        if rel >= best:
            stall += 1
            omega = max(omega / 2.0, 1.0 / 64.0)
            if stall >= cfg.max_stall:
                status = "non-convergent"
                break
        else:
            stall = 0
            best = rel
    pres = DiscreteField("scalar-P1", _zero_mean(mesh, pres.dofs), mesh)
    sig = cfg.sigma
    return SolveResult(
        u=u,
        pressure=pres,
        v=u + g,
        residual_history=history,
        Du_norm_p=norm_W1p(u, m.p),
        Du_norm_sigma=norm_W1p(u, sig),
        converged=converged,
        status=status,
        iterations=it,
        n_reg=cfg.n_reg,
        sigma=sig,
        p=m.p,
        metadata={"visc_floor": cfg.visc_floor, "newton": cfg.newton, "initial_residual": scale},
    )


@dataclass(frozen=True)
class AprioriCheck:
    applicable: bool
    bound_holds: Optional[bool]
    margin: Optional[float]
    value: Optional[float]
    R: float
    status: str


def apriori_quantity(result):
    """``max{n^(-2/(2 sigma - 1)) ||Du||_sigma, ||Du||_p}`` (first entry 0 without penalty)."""
    first = 0.0
    if result.n_reg is not None:
        first = result.n_reg ** (-2.0 / (2.0 * result.sigma - 1.0)) * result.Du_norm_sigma
    return max(first, result.Du_norm_p)


def verify_apriori(result, report, cfg=None):
    """Compare the solution size with the coercivity radius of ``report``.

    When the smallness condition fails the bound is not asserted and the
    status reads ``"not applicable"``.
    """
    if not report.satisfied:
        return AprioriCheck(False, None, None, None, report.R, "not applicable")
    val = apriori_quantity(result)
    margin = report.R - val
    holds = bool(val <= report.R)
    result.apriori_ok = holds
    return AprioriCheck(True, holds, float(margin), float(val), report.R, "holds" if holds else "violated")


@dataclass(frozen=True)
class WeakResidual:
    momentum: float
    divergence: float
    boundary: float
    reference: float

    @property
    def relative(self):
        r = self.momentum + self.divergence + self.boundary
        return r / self.reference if self.reference > 0 else r


def residual_weak_form(v, pressure, data, f, m, penalty=None):
    """Residual of the weak momentum equation, divergence and boundary constraints.

    ``momentum`` is the discrete dual norm over zero-trace test functions
    of ``<S(Dv), D phi> - <v (x) v, D phi> - <pi, div phi> - <f, phi>``;
    ``penalty=(n_reg, sigma, u)`` adds the regularizing term of the
    solved problem. ``divergence`` is the pressure-dual norm of
    ``div v - g1`` and ``boundary`` the largest nodal mismatch with the
    Dirichlet datum. ``reference`` is the largest dual norm among the
    individual momentum terms, so ``relative`` is scale free.
    """
    mesh = v.mesh
    geom = geometry(mesh)
    n = 2 * mesh.p2.ndof
    cells = mesh.p2.vector_cells()
    free = fem.free_velocity_dofs(mesh)
    dual = fem.velocity_dual_norm(mesh)
    Dv = _sym(v.grad_at_quad(geom))
    V = v.at_quad(geom)

    def load(T):
        local = np.einsum("mqij,mqAij,mq->mA", T, geom.full_grad, geom.wdet, optimize=True)
        return fem.assemble_vector(local, cells, n)

    parts = [load(stress_eval(Dv, m)), -load(np.einsum("mqi,mqj->mqij", V, V))]
    parts.append(-(fem.divergence_matrix(mesh).T @ pressure.dofs))
    if f is not None:
        parts.append(-fem.load_vector(mesh, f))
    if penalty is not None:
        n_reg, sigma, u = penalty
        if n_reg is not None:
            Du = _sym(u.grad_at_quad(geom))
            parts.append(load((_frob(Du) ** (sigma - 2.0) / n_reg)[..., None, None] * Du))
    total = sum(parts)
    mom = dual(total[free])
    ref = max(dual(pp[free]) for pp in parts)
    r = fem.divergence_matrix(mesh) @ v.dofs - fem.p1_mass_matrix(mesh) @ data.g1.dofs
    div = fem.pressure_dual_norm(mesh)(r)
    trace = data.trace_p2()
    bd = mesh.p2.boundary_dofs
    bnd = float(np.abs(v.nodal()[bd] - trace[bd]).max(initial=0.0))
    return WeakResidual(mom, div, bnd, ref)
