"""Hamiltonian-side geometry: canonical forms, field equations, k-vector fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bundles import CoJetPoint, TangentVector
from .coords import VarTable
from .expr import Expr, Num, Var, diff, evaluate, free_vars, substitute
from .forms import OneForm, TwoForm


@dataclass(frozen=True)
class HamiltonianModel:
    table: VarTable
    H: Expr

    def __post_init__(self):
        allowed = set(self.table.q_names) | set(self.table.p_names)
        extra = free_vars(self.H) - allowed
        if extra:
            raise ValueError(
                f"Hamiltonian must depend on (q, p) only; found {sorted(extra)[0]}"
            )

    def dHdq(self, i: int) -> Expr:
        return diff(self.H, self.table.q(i))

    def dHdp(self, A: int, i: int) -> Expr:
        return diff(self.H, self.table.p(A, i))


def canonical_one_form(table: VarTable, A: int) -> OneForm:
    """Tautological one-form of the A-th copy: p^A_i dq^i."""
    coeffs = [Num(0.0)] * table.dim_total
    for i in range(table.n):
        coeffs[i] = Var(table.p(A, i))
    return OneForm(table.momentum_chart, tuple(coeffs))


def canonical_two_form(table: VarTable, A: int) -> TwoForm:
    """Canonical two-form dq^i ^ dp^A_i (equal to -d of the one-form)."""
    entries = {}
    for i in range(table.n):
        entries[(i, table.fiber_slot(i, A))] = Num(1.0)
    return TwoForm(table.momentum_chart, entries)


def canonical_two_form_matrix(table: VarTable, A: int) -> np.ndarray:
    dim = table.dim_total
    M = np.zeros((dim, dim))
    for i in range(table.n):
        slot = table.fiber_slot(i, A)
        M[i, slot] = 1.0
        M[slot, i] = -1.0
    return M


def canonical_forms_at(table: VarTable, A: int, w: CoJetPoint):
    """(coefficients of theta^A, matrix of omega^A) at the point w."""
    theta = np.zeros(table.dim_total)
    theta[: table.n] = w.p[A]
    return theta, canonical_two_form_matrix(table, A)


def pullback_by_section(
    table: VarTable, e: Expr, psi_base: Sequence[Expr], psi_momenta: Sequence[Sequence[Expr]]
) -> Expr:
    """Restrict an expression over (q, p) to a section psi(t) of the bundle."""
    mapping = {}
    for i, comp in enumerate(psi_base):
        mapping[table.q(i)] = comp
    for A in range(table.k):
        for i in range(table.n):
            mapping[table.p(A, i)] = psi_momenta[A][i]
    return substitute(e, mapping)


def hdw_residual(
    model: HamiltonianModel,
    psi_base: Sequence[Expr],
    psi_momenta: Sequence[Sequence[Expr]],
    t: Sequence[float],
) -> np.ndarray:
    """Field-equation residual of the section psi at t, as 2n values.

    First block (i = 0..n-1):  dH/dq^i o psi + sum_A dpsi^A_i/dt^A.
    Second block: max over A of |dH/dp^A_i o psi - dpsi^i/dt^A|.
    """
    table = model.table
    env = dict(zip(table.t_names, np.asarray(t, dtype=float)))
    out = np.zeros(2 * table.n)
    for i in range(table.n):
        total = pullback_by_section(table, model.dHdq(i), psi_base, psi_momenta)
        value = evaluate(total, env)
        for A in range(table.k):
            value += evaluate(diff(psi_momenta[A][i], table.t(A)), env)
        out[i] = value
    for i in range(table.n):
        worst = 0.0
        for A in range(table.k):
            lhs = pullback_by_section(table, model.dHdp(A, i), psi_base, psi_momenta)
            gap = evaluate(lhs, env) - evaluate(diff(psi_base[i], table.t(A)), env)
            worst = max(worst, abs(gap))
        out[table.n + i] = worst
    return out


def ham_kvector(model: HamiltonianModel, w: CoJetPoint) -> list:
    """Canonical k-vector field legs at w solving sum_A i(X_A) omega^A = dH.

    Base components are forced: (X_A)^i = dH/dp^A_i.  Only the trace of the
    vertical block is constrained, so the equal-distribution representative
    (X_A)^B_i = -delta^B_A (1/k) dH/dq^i is returned; it is symmetric under
    relabeling of the copies and reduces to the classical field at k = 1.
    """
    table = model.table
    env = w.env()
    k = table.k
    grad_q = np.array([evaluate(model.dHdq(i), env) for i in range(table.n)])
    legs = []
    for A in range(k):
        comps = np.zeros(table.dim_total)
        for i in range(table.n):
            comps[i] = evaluate(model.dHdp(A, i), env)
        for i in range(table.n):
            comps[table.fiber_slot(i, A)] = -grad_q[i] / k
        legs.append(TangentVector(w, comps))
    return legs


def kvector_equation_residual(model: HamiltonianModel, w: CoJetPoint, legs) -> float:
    """Max-norm residual of sum_A i(X_A) omega^A - dH at w for given legs."""
    table = model.table
    env = w.env()
    covector = np.zeros(table.dim_total)
    for A, leg in enumerate(legs):
        omega = canonical_two_form_matrix(table, A)
        covector += leg.components @ omega
    grad = np.array(
        [evaluate(diff(model.H, name), env) for name in table.momentum_chart]
    )
    return float(np.max(np.abs(covector - grad)))
