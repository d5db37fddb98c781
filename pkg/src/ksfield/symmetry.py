"""Symmetry verification and Noether conserved currents, both sides.

Every check is a sampled residual: "for all points" conditions are tested
at quasi-random points of a box (symbolic zero-testing of arbitrary
expressions is undecidable, sampling is falsifiable and cheap).  Lie
derivatives of forms go through Cartan's formula with exact symbolic
exterior derivatives; only the final residuals are numeric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bundles import (
    TotalMap,
    VectorFieldQ,
    complete_lift,
    cotangent_lift,
    pullback_by_prolongation,
    tulczyjew_derivative,
)
from .coords import VarTable
from .expr import Expr, Num, add, diff, evaluate, mul, sub, substitute
from .forms import (
    VectorField,
    contract_one,
    contract_two,
    d_function,
    lie_derivative_one,
    lie_derivative_two,
    max_abs_expr,
    max_abs_one_form,
    max_abs_two_form,
)
from .hamiltonian import (
    HamiltonianModel,
    canonical_one_form,
    canonical_two_form,
    ham_kvector,
    hdw_residual,
)
from .lagrangian import (
    LagrangianModel,
    el_residual,
    energy,
    lagrangian_two_form,
    sopde_solve,
)
from .solver import SolutionGrid, evaluate_current


class SymmetryError(ValueError):
    pass


class CurrentRejection(SymmetryError):
    """Raised when a Noether-current precondition fails; carries the residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (max residual {residual:.3e})")
        self.residual = residual


@dataclass
class Report:
    condition: str
    max_residual: float
    sample_count: int
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "condition": self.condition,
            "max_residual": float(self.max_residual),
            "sample_count": int(self.sample_count),
            "pass": bool(self.passed),
        }
        if self.details:
            out["details"] = {
                key: float(v) if isinstance(v, (float, np.floating)) else v
                for key, v in self.details.items()
            }
        return out


def all_pass(reports: Sequence[Report]) -> bool:
    return all(r.passed for r in reports)


@dataclass(frozen=True)
class SymmetryCandidate:
    """User-declared symmetry datum.

    kind "vector-field-on-q": n components over q (lifted on demand);
    kind "vector-field": components over the full chart of ``side``;
    kind "diffeomorphism": total-space map with declared inverse.
    Optional gauge data g (k expressions over q) and zeta (k expressions).
    """

    kind: str
    components: tuple
    side: Optional[str] = None
    inverse: Optional[tuple] = None
    gauge: Optional[tuple] = None
    zeta: Optional[tuple] = None

    def vector_field(self, table: VarTable, side: str) -> VectorField:
        if self.kind == "vector-field-on-q":
            Z = VectorFieldQ(table, self.components)
            return complete_lift(Z) if side == "lagrangian" else cotangent_lift(Z)
        if self.kind == "vector-field":
            if self.side is not None and self.side != side:
                raise SymmetryError(
                    f"candidate lives on the {self.side} side, requested {side}"
                )
            return VectorField(table.chart(side), self.components)
        raise SymmetryError(f"candidate of kind {self.kind!r} is not a vector field")

    def base_field(self, table: VarTable) -> VectorFieldQ:
        if self.kind != "vector-field-on-q":
            raise SymmetryError("candidate is not a vector field on the base")
        return VectorFieldQ(table, self.components)

    def total_map(self, table: VarTable, side: str) -> TotalMap:
        if self.kind != "diffeomorphism":
            raise SymmetryError("candidate is not a diffeomorphism")
        use_side = self.side or side
        return TotalMap(table, use_side, self.components, self.inverse)


@dataclass(frozen=True)
class NoetherCurrent:
    components: tuple  # k expressions
    side: str          # "lagrangian" | "hamiltonian"
    provenance: str    # "natural-lift" | "user-supplied"


# ---------------------------------------------------------------------------
# Cartan symmetry checks

def check_cartan_hamiltonian(
    Y: VectorField, model: HamiltonianModel, samples: Sequence, tol: float = 1e-9
):
    """Infinitesimal conditions: L(Y) omega^A = 0 for all A, and Y(H) = 0."""
    table = model.table
    if Y.chart != table.momentum_chart:
        raise SymmetryError("vector field does not live on the momentum chart")
    envs = [w.env() for w in samples]
    worst_omega = 0.0
    for A in range(table.k):
        omega = canonical_two_form(table, A)
        worst_omega = max(worst_omega, max_abs_two_form(lie_derivative_two(Y, omega), envs))
    worst_h = max_abs_expr(Y.apply(model.H), envs)
    return [
        Report("lie_derivative_two_forms", worst_omega, len(envs), worst_omega <= tol),
        Report("hamiltonian_invariance", worst_h, len(envs), worst_h <= tol),
    ]


def check_cartan_lagrangian(
    Y: VectorField, model: LagrangianModel, samples: Sequence, tol: float = 1e-9
):
    """Infinitesimal conditions: L(Y) omega_L^A = 0 for all A, and Y(E_L) = 0."""
    table = model.table
    if Y.chart != table.velocity_chart:
        raise SymmetryError("vector field does not live on the velocity chart")
    envs = [w.env() for w in samples]
    worst_omega = 0.0
    for A in range(table.k):
        omega = lagrangian_two_form(model, A)
        worst_omega = max(worst_omega, max_abs_two_form(lie_derivative_two(Y, omega), envs))
    worst_e = max_abs_expr(Y.apply(energy(model)), envs)
    return [
        Report("lie_derivative_two_forms", worst_omega, len(envs), worst_omega <= tol),
        Report("energy_invariance", worst_e, len(envs), worst_e <= tol),
    ]


def check_cartan_diffeomorphism(Phi: TotalMap, model, samples: Sequence, tol: float = 1e-9):
    """Finite conditions: Phi^* omega^A = omega^A and Phi^* (H or E) = const.

    The constant offset is tested through the gradient of the pulled-back
    function minus the original, which is what every downstream equation
    sees.
    """
    table = Phi.table
    if isinstance(model, HamiltonianModel):
        scalar = model.H
        two_forms = [canonical_two_form(table, A) for A in range(table.k)]
        side = "hamiltonian"
    else:
        scalar = energy(model)
        two_forms = [lagrangian_two_form(model, A) for A in range(table.k)]
        side = "lagrangian"
    if Phi.side != side:
        raise SymmetryError(f"map lives on the {Phi.side} side, model needs {side}")

    chart = Phi.chart
    worst_omega = 0.0
    for w in samples:
        env = w.env()
        J = Phi.jacobian_at(env)
        image_env = dict(zip(chart, Phi.apply_env(env)))
        for omega in two_forms:
            pulled = J.T @ omega.matrix_at(image_env) @ J
            worst_omega = max(
                worst_omega, float(np.max(np.abs(pulled - omega.matrix_at(env))))
            )
    pulled_scalar = substitute(scalar, dict(zip(chart, Phi.components)))
    gap = sub(pulled_scalar, scalar)
    envs = [w.env() for w in samples]
    worst_grad = 0.0
    for name in chart:
        worst_grad = max(worst_grad, max_abs_expr(diff(gap, name), envs))
    return [
        Report("pullback_two_forms", worst_omega, len(samples), worst_omega <= tol),
        Report("scalar_invariance_up_to_constant", worst_grad, len(samples), worst_grad <= tol),
    ]


# ---------------------------------------------------------------------------
# Noether currents

def noether_current_lagrangian(
    Z: VectorFieldQ,
    model: LagrangianModel,
    g: Optional[Sequence[Expr]] = None,
    samples: Sequence = (),
    tol: float = 1e-9,
) -> NoetherCurrent:
    """Current of a natural symmetry: f^A = Z-vertical-lift(L) - g^A.

    Preconditions, sampled: Z^C(L) = d_T g (g defaults to zero, the strict
    case).  The construction is re-verified against i(Z^C) omega_L^A = d f^A
    before the current is returned.
    """
    table = model.table
    if not samples:
        raise SymmetryError("need sample points to verify the construction")
    lifted = complete_lift(Z)
    if g is None:
        g = tuple(Num(0.0) for _ in range(table.k))
    g = tuple(g)
    if len(g) != table.k:
        raise SymmetryError(f"expected {table.k} gauge components")
    envs = [w.env() for w in samples]

    quasi_invariance = sub(lifted.apply(model.L), tulczyjew_derivative(table, g))
    residual = max_abs_expr(quasi_invariance, envs)
    if residual > tol:
        raise CurrentRejection("Z does not leave L quasi-invariant: Z^C(L) != d_T g", residual)

    components = []
    for A in range(table.k):
        f_A: Expr = Num(0.0)
        for i in range(table.n):
            f_A = add(f_A, mul(Z.components[i], model.dLdv(i, A)))
        components.append(sub(f_A, g[A]))

    worst = 0.0
    for A in range(table.k):
        omega = lagrangian_two_form(model, A)
        defect = _one_form_gap(contract_two(lifted, omega), d_function(components[A], omega.chart))
        worst = max(worst, max_abs_one_form(defect, envs))
    if worst > tol:
        raise CurrentRejection("constructed current fails i(Y) omega = df", worst)
    return NoetherCurrent(tuple(components), "lagrangian", "natural-lift")


def noether_current_hamiltonian(
    Y: VectorField,
    model: HamiltonianModel,
    zeta: Optional[Sequence[Expr]] = None,
    samples: Sequence = (),
    tol: float = 1e-9,
    provenance: str = "user-supplied",
) -> NoetherCurrent:
    """Current of an infinitesimal Cartan symmetry: f^A = i(Y) theta^A - zeta^A.

    zeta defaults to zero, exact for natural lifts where L(Y) theta^A = 0;
    otherwise the caller supplies zeta^A with L(Y) theta^A = d zeta^A,
    verified at the samples.
    """
    table = model.table
    if not samples:
        raise SymmetryError("need sample points to verify the construction")
    reports = check_cartan_hamiltonian(Y, model, samples, tol)
    if not all_pass(reports):
        worst = max(r.max_residual for r in reports)
        raise CurrentRejection("Y is not an infinitesimal Cartan symmetry", worst)
    if zeta is None:
        zeta = tuple(Num(0.0) for _ in range(table.k))
    zeta = tuple(zeta)
    if len(zeta) != table.k:
        raise SymmetryError(f"expected {table.k} zeta components")
    envs = [w.env() for w in samples]

    components = []
    worst_zeta = 0.0
    for A in range(table.k):
        theta = canonical_one_form(table, A)
        defect = _one_form_gap(
            lie_derivative_one(Y, theta), d_function(zeta[A], theta.chart)
        )
        worst_zeta = max(worst_zeta, max_abs_one_form(defect, envs))
        components.append(sub(contract_one(Y, theta), zeta[A]))
    if worst_zeta > tol:
        raise CurrentRejection("zeta does not satisfy L(Y) theta^A = d zeta^A", worst_zeta)

    worst = 0.0
    for A in range(table.k):
        omega = canonical_two_form(table, A)
        defect = _one_form_gap(contract_two(Y, omega), d_function(components[A], omega.chart))
        worst = max(worst, max_abs_one_form(defect, envs))
    if worst > tol:
        raise CurrentRejection("constructed current fails i(Y) omega = df", worst)
    return NoetherCurrent(tuple(components), "hamiltonian", provenance)


def _one_form_gap(a, b):
    from .forms import OneForm

    return OneForm(a.chart, tuple(sub(x, y) for x, y in zip(a.coeffs, b.coeffs)))


# ---------------------------------------------------------------------------
# conservation verification

def analytic_divergence_lagrangian(
    table: VarTable, current: Sequence[Expr], phi: Sequence[Expr]
) -> Expr:
    """Total divergence of the current along the prolongation of phi, in t."""
    out: Expr = Num(0.0)
    for A, f_A in enumerate(current):
        restricted = pullback_by_prolongation(table, f_A, phi)
        out = add(out, diff(restricted, table.t(A)))
    return out


def analytic_divergence_hamiltonian(
    table: VarTable,
    current: Sequence[Expr],
    psi_base: Sequence[Expr],
    psi_momenta: Sequence[Sequence[Expr]],
) -> Expr:
    from .hamiltonian import pullback_by_section

    out: Expr = Num(0.0)
    for A, f_A in enumerate(current):
        restricted = pullback_by_section(table, f_A, psi_base, psi_momenta)
        out = add(out, diff(restricted, table.t(A)))
    return out


def verify_conservation(
    current: NoetherCurrent,
    table: VarTable,
    *,
    phi: Optional[Sequence[Expr]] = None,
    section=None,
    grid: Optional[SolutionGrid] = None,
    refined_grid: Optional[SolutionGrid] = None,
    model: Optional[LagrangianModel] = None,
    t_samples: Optional[np.ndarray] = None,
    tol: float = 1e-9,
) -> Report:
    """Check that the current's divergence vanishes along a solution.

    Analytic mode (``phi`` or ``section``): the symbolic total divergence is
    evaluated at the t samples.  Grid mode (``grid``): the discrete
    divergence of the trace, plus its refinement ratio when ``refined_grid``
    is supplied.
    """
    if grid is not None:
        trace = evaluate_current(current.components, grid, current.side, model)
        details = dict(trace.summary())
        passed = bool(np.isfinite(trace.max_divergence))
        if refined_grid is not None:
            refined = evaluate_current(
                current.components, refined_grid, current.side, model
            )
            if refined.max_divergence > 0:
                ratio = trace.max_divergence / refined.max_divergence
                details["refinement_ratio"] = ratio
                # conserved currents shrink at the stencil's second order;
                # allow one binary order of slack around the nominal 4
                passed = passed and 2.0 <= ratio <= 8.0
        return Report(
            "grid_divergence", trace.max_divergence, trace.interior_count, passed, details
        )

    if phi is not None:
        if current.side != "lagrangian":
            raise SymmetryError("map solutions verify lagrangian-side currents")
        divergence = analytic_divergence_lagrangian(table, current.components, phi)
    elif section is not None:
        if current.side != "hamiltonian":
            raise SymmetryError("bundle sections verify hamiltonian-side currents")
        psi_base, psi_momenta = section
        divergence = analytic_divergence_hamiltonian(
            table, current.components, psi_base, psi_momenta
        )
    else:
        raise SymmetryError("no solution supplied")

    if t_samples is None:
        raise SymmetryError("analytic mode needs t samples")
    envs = [dict(zip(table.t_names, t)) for t in np.atleast_2d(t_samples)]
    worst = max_abs_expr(divergence, envs)
    return Report("analytic_divergence", worst, len(envs), worst <= tol)


def verify_bracket_theorem(
    current: NoetherCurrent, model, samples: Sequence, tol: float = 1e-9
) -> Report:
    """Evaluate sum_A X_A(f^A) with the canonically constructed k-vector field."""
    if isinstance(model, HamiltonianModel):
        if current.side != "hamiltonian":
            raise SymmetryError("current/model side mismatch")
        chart = model.table.momentum_chart
        legs_at = lambda w: ham_kvector(model, w)
    else:
        if current.side != "lagrangian":
            raise SymmetryError("current/model side mismatch")
        chart = model.table.velocity_chart
        legs_at = lambda w: sopde_solve(model, w)

    gradients = [
        [diff(f_A, name) for name in chart] for f_A in current.components
    ]
    worst = 0.0
    for w in samples:
        env = w.env()
        legs = legs_at(w)
        total = 0.0
        for A, leg in enumerate(legs):
            total += sum(
                leg.components[a] * evaluate(gradients[A][a], env)
                for a in range(len(chart))
                if leg.components[a] != 0.0
            )
        worst = max(worst, abs(total))
    return Report("kvector_bracket_sum", worst, len(samples), worst <= tol)


def kvector_residual_after_pushforward(
    Phi: TotalMap, model: HamiltonianModel, samples: Sequence
) -> float:
    """Max residual of the field equation for the pushforward of the
    canonical k-vector field through Phi, evaluated at the samples."""
    from .hamiltonian import kvector_equation_residual

    worst = 0.0
    for w in samples:
        legs = Phi.pushforward_field(lambda u: ham_kvector(model, u), w)
        worst = max(worst, kvector_equation_residual(model, w, legs))
    return worst


# ---------------------------------------------------------------------------
# finite-symmetry check by transporting solutions

def check_symmetry_by_transport(
    Phi: TotalMap,
    model,
    solution,
    t_samples: np.ndarray,
    tol: Optional[float] = None,
):
    """Map a solution through Phi and measure the field-equation residual of
    the image; the pass tolerance follows the input solution's own residual
    (an exact solution demands an exact image)."""
    table = Phi.table
    t_samples = np.atleast_2d(t_samples)
    if isinstance(model, HamiltonianModel):
        psi_base, psi_momenta = solution
        mapping = {}
        for i, comp in enumerate(psi_base):
            mapping[table.q(i)] = comp
        for A in range(table.k):
            for i in range(table.n):
                mapping[table.p(A, i)] = psi_momenta[A][i]
        image = [substitute(c, mapping) for c in Phi.components]
        image_base = tuple(image[: table.n])
        image_momenta = tuple(
            tuple(image[table.n + A * table.n + i] for i in range(table.n))
            for A in range(table.k)
        )
        input_res = max(
            float(np.max(np.abs(hdw_residual(model, psi_base, psi_momenta, t))))
            for t in t_samples
        )
        image_res = max(
            float(np.max(np.abs(hdw_residual(model, image_base, image_momenta, t))))
            for t in t_samples
        )
        threshold = max(tol if tol is not None else 1e-10, 10.0 * input_res)
        return [
            Report(
                "transport_field_equations",
                image_res,
                len(t_samples),
                image_res <= threshold,
                {"input_residual": input_res},
            )
        ]

    phi = solution
    jet_map = {}
    for i, comp in enumerate(phi):
        jet_map[table.q(i)] = comp
        for A in range(table.k):
            jet_map[table.v(i, A)] = diff(comp, table.t(A))
    image = [substitute(c, jet_map) for c in Phi.components]
    rho = tuple(image[: table.n])

    input_res = max(
        float(np.max(np.abs(el_residual(model, phi, t)))) for t in t_samples
    )
    image_res = max(
        float(np.max(np.abs(el_residual(model, rho, t)))) for t in t_samples
    )
    # the image must itself be a first prolongation: fiber components of the
    # image agree with the t-derivatives of its base part
    worst_prolong = 0.0
    envs = [dict(zip(table.t_names, t)) for t in t_samples]
    for A in range(table.k):
        for i in range(table.n):
            gap = sub(diff(rho[i], table.t(A)), image[table.fiber_slot(i, A)])
            worst_prolong = max(worst_prolong, max_abs_expr(gap, envs))
    threshold = max(tol if tol is not None else 1e-10, 10.0 * input_res)
    return [
        Report(
            "transport_field_equations",
            image_res,
            len(t_samples),
            image_res <= threshold,
            {"input_residual": input_res},
        ),
        Report(
            "transport_prolongation_consistency",
            worst_prolong,
            len(t_samples),
            worst_prolong <= threshold,
        ),
    ]
