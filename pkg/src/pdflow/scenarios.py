"""Scenario presets and the staged pipeline that runs them."""
import dataclasses
import logging
import time
import traceback
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .boundary import BoundaryData, boundary_flux
from .datanorms import measure_data_norms
from .extension import build_extension_pair
from .fem import DiscreteField
from .mesh import build_mesh
from .smallness import (
    Calibration,
    check_smallness,
    derive_exponents,
    eval_L,
    g_constants,
    coercivity_radius,
)
from .solver import SolveConfig, residual_weak_form, solve_regularized, verify_apriori
from .stress import StressModel, calibrate

log = logging.getLogger(__name__)


def _square_tangent_weight(x, y):
    """sin along each side of the unit square, zero at the corners."""
    side = np.isclose(x, 0.0) | np.isclose(x, 1.0)
    return np.where(side, np.sin(np.pi * y), np.sin(np.pi * x))


def _square_normal(x, y):
    nx = np.where(np.isclose(x, 1.0), 1.0, np.where(np.isclose(x, 0.0), -1.0, 0.0))
    ny = np.where(np.isclose(y, 1.0), 1.0, np.where(np.isclose(y, 0.0), -1.0, 0.0))
    ny = np.where(nx != 0, 0.0, ny)
    return nx, ny


def _radial(x, y):
    r = np.hypot(x, y)
    r = np.where(r > 0, r, 1.0)
    return x / r, y / r, r


def lid_field(x, y):
    top = np.isclose(y, 1.0)
    return np.where(top, 16.0 * x**2 * (1.0 - x) ** 2, 0.0), 0.0 * x


def tangential_field(domain):
    if domain == "unit-square":
        def g(x, y):
            w = _square_tangent_weight(x, y)
            nx, ny = _square_normal(x, y)
            return -w * ny, w * nx
        return g

    def g(x, y):
        ex, ey, _ = _radial(x, y)
        return -ey, ex
    return g


def normal_field(domain):
    if domain == "unit-square":
        def g(x, y):
            w = _square_tangent_weight(x, y)
            nx, ny = _square_normal(x, y)
            return w * nx, w * ny
        return g

    def g(x, y):
        ex, ey, r = _radial(x, y)
        # outward on the outer circle, inward on an inner one
        sgn = np.where(r > 0.75, 1.0, -1.0)
        return sgn * ex, sgn * ey
    return g


def _combine(*fields):
    def g(x, y):
        out = [0.0 * x, 0.0 * x]
        for c, f in fields:
            fx, fy = f(x, y)
            out[0] = out[0] + c * np.asarray(fx)
            out[1] = out[1] + c * np.asarray(fy)
        return out[0], out[1]
    return g


def balanced_data(mesh, g2):
    """Boundary data with the constant ``g1`` that satisfies compatibility."""
    zero = BoundaryData.from_functions(mesh, g2)
    c = boundary_flux(mesh, zero.trace_p2()) / mesh.area
    g1 = DiscreteField("scalar-P1", np.full(mesh.n_nodes, c), mesh)
    return BoundaryData(mesh, g1, zero.g2, zero.g2_func)


def make_data(preset, mesh, domain, scale=1.0):
    """Boundary and divergence data of a named preset."""
    if preset == "zero":
        g2 = _combine()
    elif preset == "lid":
        if domain != "unit-square":
            raise ValueError("the lid preset needs the unit square")
        g2 = lid_field
    elif preset == "tangential":
        g2 = tangential_field(domain)
    elif preset == "normal":
        g2 = normal_field(domain)
    elif preset == "mixed":
        g2 = _combine((1.0, tangential_field(domain)), (0.1, normal_field(domain)))
    elif preset == "lid-perturbed":
        g2 = _combine((1.0, lid_field), (0.05, normal_field(domain)))
    else:
        raise ValueError(f"unknown data preset {preset!r}")
    return balanced_data(mesh, _combine((scale, g2)))


DATA_PRESETS = ("zero", "lid", "tangential", "normal", "mixed", "lid-perturbed")


@dataclass(frozen=True)
class Scenario:
    name: str
    domain: str = "unit-square"
    resolution: int = 16
    data: str = "lid"
    data_scale: float = 1.0
    p: float = 1.75
    q: float = 10.0
    sigma: Optional[float] = None
    d: int = 2
    delta: float = 0.01
    calibration: Calibration = Calibration()
    eta: Union[str, float] = "optimize"
    solve: Optional[SolveConfig] = SolveConfig(n_reg=100)
    force: Optional[str] = None
    calibration_pairs: int = 10**5
    seed: int = 0

    def __post_init__(self):
        if self.data not in DATA_PRESETS:
            raise ValueError(f"unknown data preset {self.data!r}")
        if not (self.eta == "optimize" or (isinstance(self.eta, (int, float)) and self.eta > 0)):
            raise ValueError("eta must be 'optimize' or a positive number")
        derive_exponents(self.d, self.p, self.q, self.sigma)

    def exponents(self):
        return derive_exponents(self.d, self.p, self.q, self.sigma)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


PRESETS = {
    "zero-data": Scenario("zero-data", data="zero", resolution=8, delta=0.0),
    "tangential-cavity": Scenario("tangential-cavity", data="lid", p=1.9, q=30.0, resolution=16),
    "normal-only": Scenario("normal-only", data="normal", resolution=16),
    "perturbation": Scenario("perturbation", data="lid-perturbed", resolution=16),
    "annulus-mixed": Scenario("annulus-mixed", domain="annulus", data="mixed", resolution=8),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(eq=False)
class RunReport:
    scenario: str
    exponents: Optional[object] = None
    norms: Optional[object] = None
    smallness: Optional[object] = None
    model: Optional[StressModel] = None
    eta_used: Optional[float] = None
    extension: Optional[dict] = None
    solve: Optional[dict] = None
    verification: Optional[dict] = None
    timing: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)


def stress_model(s):
    if s.calibration_pairs <= 0:
        return StressModel(s.p, s.delta)
    return calibrate(s.p, s.delta, n_pairs=s.calibration_pairs, seed=s.seed)


def extension_eta(eta_star, mesh):
    """Cutoff width used for the discrete extension: the optimal eta, raised
    to ``2 h_max`` so the layer is resolved and capped at 1/4 of the
    domain's extent."""
    span = float(np.ptp(mesh.nodes, axis=0).min())
    return float(min(max(eta_star, 2.0 * mesh.h_max), span / 4.0))


def run_scenario(s: Scenario, keep_fields=False):
    """Run exponents, mesh, smallness, extension, solve and verification.

    A failing stage is recorded in ``report.errors`` under its tag and
    stops the later stages that depend on it; earlier results are kept.
    """
    rep = RunReport(s.name)
    state = {}

    def stage(tag, fn):
        t0 = time.perf_counter()
        try:
            fn()
            ok = True
        except Exception as exc:  # noqa: BLE001 - recorded per stage
            rep.errors[tag] = f"{type(exc).__name__}: {exc}"
            log.debug("stage %s failed:\n%s", tag, traceback.format_exc())
            ok = False
        rep.timing[tag] = time.perf_counter() - t0
        return ok

    def do_exponents():
        rep.exponents = s.exponents()
        rep.model = stress_model(s)

    def do_mesh():
        state["mesh"] = build_mesh(s.domain, s.resolution)
        state["data"] = make_data(s.data, state["mesh"], s.domain, s.data_scale)

    def do_smallness():
        rep.norms = measure_data_norms(state["data"], rep.exponents, s.delta)
        rep.smallness = check_smallness(rep.norms, rep.exponents, s.calibration, rep.model)

    def do_extension():
        mesh = state["mesh"]
        eta = rep.smallness.eta_star if s.eta == "optimize" else float(s.eta)
        rep.eta_used = extension_eta(eta, mesh) if s.eta == "optimize" else eta
        pair = build_extension_pair(mesh, state["data"], rep.eta_used, rep.exponents)
        state["pair"] = pair
        rep.extension = dict(pair.measured_norms)

    def do_solve():
        cfg = dataclasses.replace(s.solve, sigma=rep.exponents.sigma)
        cfg.check_exponents(rep.exponents)
        res = solve_regularized(state["mesh"], state["pair"], None, rep.model, cfg)
        state["result"] = res
        rep.solve = {
            "status": res.status,
            "converged": res.converged,
            "iterations": res.iterations,
            "final_residual": res.residual_history[-1] if res.residual_history else 0.0,
            "Du_norm_p": res.Du_norm_p,
            "Du_norm_sigma": res.Du_norm_sigma,
            "visc_floor": res.metadata["visc_floor"],
        }

    def do_verify():
        res = state["result"]
        chk = verify_apriori(res, rep.smallness)
        w = residual_weak_form(
            res.v, res.pressure, state["data"], None, rep.model, penalty=(res.n_reg, res.sigma, res.u)
        )
        rep.verification = {
            "apriori_status": chk.status,
            "apriori_margin": chk.margin,
            "apriori_value": chk.value,
            "weak_residual": w.relative,
            "divergence_residual": w.divergence,
            "boundary_mismatch": w.boundary,
        }

    ok = stage("exponents", do_exponents)
    ok = ok and stage("mesh", do_mesh)
    ok = ok and stage("smallness", do_smallness)
    ok = ok and stage("extension", do_extension)
    if ok and s.solve is not None:
        ok = stage("solve", do_solve) and stage("verification", do_verify)
    if keep_fields:
        rep.fields = state
    return rep


SWEEP_COLUMNS = ("eta", "L", "G1", "G2", "G3", "R")
EXTENSION_COLUMNS = ("h_eta_Lr", "h_eta_grad_p", "k_D_p", "k_Lr")


def sweep_eta(s: Scenario, etas, with_extension=False):
    """Rows ``(eta, L, G1, G2, G3, R[, extension norms])`` for sorted positive ``etas``."""
    etas = [float(e) for e in etas]
    if any(e <= 0 for e in etas):
        raise ValueError("eta values must be positive")
    if etas != sorted(etas):
        raise ValueError("eta values must be sorted")
    ex = s.exponents()
    model = stress_model(s)
    mesh = build_mesh(s.domain, s.resolution)
    data = make_data(s.data, mesh, s.domain, s.data_scale)
    norms = measure_data_norms(data, ex, s.delta)
    rows = []
    for eta in etas:
        G1, G2, G3, _, _ = g_constants(eta, norms, ex, s.calibration, model)
        row = {
            "eta": eta,
            "L": float(eval_L(eta, norms, ex)),
            "G1": G1,
            "G2": G2,
            "G3": G3,
            "R": coercivity_radius(G1, G3, ex.p),
        }
        if with_extension:
            pair = build_extension_pair(mesh, data, eta, ex)
            row.update({k: pair.measured_norms[k] for k in EXTENSION_COLUMNS})
        rows.append(row)
    return rows
