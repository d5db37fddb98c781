"""Gauge equivalence of Lagrangians: decide and decompose L1 - L2.

Two Lagrangians are gauge equivalent exactly when their difference is
alpha-hat + constant with closed one-forms alpha^A on the base; a velocity-
free non-constant remainder keeps the two-forms equal but separates the
energies, which is reported as inequivalent (by energy).  All acceptance
steps are sampled; the alpha and remainder representatives are extracted
through the v = 0 slice, so models must be defined there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coords import VarTable
from .expr import Expr, Num, add, diff, evaluate, mul, sub, substitute, to_source
from .expr import Var
from .forms import max_abs_expr
from .lagrangian import LagrangianModel, el_residual
from .symmetry import Report


class GaugeError(ValueError):
    pass


@dataclass(frozen=True)
class GaugeDecomposition:
    """L1 - L2 = alpha_hat + f + c with alpha^A one-forms on the base."""

    alpha: tuple       # k tuples of n coefficient expressions over q
    f: Expr            # velocity-free remainder (zero for gauge verdicts)
    c: float

    def alpha_hat(self, table: VarTable) -> Expr:
        out: Expr = Num(0.0)
        for A in range(table.k):
            for i in range(table.n):
                out = add(out, mul(self.alpha[A][i], Var(table.v(i, A))))
        return out

    def as_dict(self) -> dict:
        return {
            "alpha": [[to_source(c) for c in row] for row in self.alpha],
            "f": to_source(self.f),
            "c": self.c,
        }


@dataclass(frozen=True)
class GaugeVerdict:
    kind: str  # "strict" | "gauge" | "inequivalent"
    decomposition: Optional[GaugeDecomposition] = None
    witness: Optional[dict] = None

    def as_dict(self) -> dict:
        out = {"verdict": self.kind}
        if self.decomposition is not None:
            out["decomposition"] = self.decomposition.as_dict()
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _zero_velocity_map(table: VarTable) -> dict:
    return {name: Num(0.0) for name in table.v_names}


def gauge_compare(
    L1: LagrangianModel,
    L2: LagrangianModel,
    samples: Sequence,
    tol: float = 1e-9,
    closedness_tol: float = 1e-10,
) -> GaugeVerdict:
    """Classify the pair: strict, gauge (with decomposition), or inequivalent.

    Steps, each sampled at the given jet points: (1) the difference must be
    velocity-affine; (2) its velocity gradient must be a base one-form;
    (3) that one-form must be closed; (4) the velocity-free remainder must
    be constant (energy matching) and the reconstruction must close.
    """
    if L1.table != L2.table:
        raise GaugeError("models use different coordinate tables")
    table = L1.table
    D = sub(L1.L, L2.L)
    envs = [w.env() for w in samples]
    if not envs:
        raise GaugeError("need sample points")

    # (1) no quadratic-or-higher velocity dependence
    for a, name_a in enumerate(table.v_names):
        first = diff(D, name_a)
        for name_b in table.v_names[a:]:
            second = diff(first, name_b)
            worst, at = _argmax_abs(second, samples)
            if worst > tol:
                return GaugeVerdict(
                    "inequivalent",
                    witness={
                        "reason": "two_forms_differ",
                        "entry": f"d2(L1-L2)/d{name_a} d{name_b}",
                        "value": worst,
                        "point": at,
                    },
                )

    # (2) base one-form coefficients from the v = 0 slice
    zero_v = _zero_velocity_map(table)
    alpha = tuple(
        tuple(
            substitute(diff(D, table.v(i, A)), zero_v) for i in range(table.n)
        )
        for A in range(table.k)
    )

    # (3) closedness of every alpha^A
    for A in range(table.k):
        for i in range(table.n):
            for j in range(i + 1, table.n):
                curl = sub(diff(alpha[A][i], table.q(j)), diff(alpha[A][j], table.q(i)))
                worst, at = _argmax_abs(curl, samples)
                if worst > closedness_tol:
                    return GaugeVerdict(
                        "inequivalent",
                        witness={
                            "reason": "alpha_not_closed",
                            "entry": f"d(alpha^{A + 1})[{i + 1},{j + 1}]",
                            "value": worst,
                            "point": at,
                        },
                    )

    # (4) the remainder must be constant, or the energies separate
    remainder = substitute(D, zero_v)
    worst_grad = 0.0
    for i in range(table.n):
        worst_grad = max(worst_grad, max_abs_expr(diff(remainder, table.q(i)), envs))
    c = evaluate(remainder, samples[0].env())
    if worst_grad > tol:
        diagnostic = GaugeDecomposition(alpha, sub(remainder, Num(c)), c)
        return GaugeVerdict(
            "inequivalent",
            decomposition=diagnostic,
            witness={"reason": "energies_differ", "value": worst_grad},
        )

    decomposition = GaugeDecomposition(alpha, Num(0.0), c)
    reconstruction = sub(D, add(decomposition.alpha_hat(table), Num(c)))
    worst, at = _argmax_abs(reconstruction, samples)
    if worst > tol:
        return GaugeVerdict(
            "inequivalent",
            witness={"reason": "reconstruction_failed", "value": worst, "point": at},
        )

    alpha_size = 0.0
    for row in alpha:
        for coeff in row:
            alpha_size = max(alpha_size, max_abs_expr(coeff, envs))
    kind = "strict" if alpha_size <= tol else "gauge"
    return GaugeVerdict(kind, decomposition=decomposition)


def _argmax_abs(e: Expr, samples):
    worst = -1.0
    at = None
    for w in samples:
        value = abs(evaluate(e, w.env()))
        if value > worst:
            worst = value
            at = [float(x) for x in w.flat()]
    return worst, at


def verify_same_solutions(
    L1: LagrangianModel,
    L2: LagrangianModel,
    phi: Sequence[Expr],
    t_samples: np.ndarray,
    tol: float = 1e-9,
) -> Report:
    """Field-equation residuals under both Lagrangians agree along phi."""
    if L1.table != L2.table:
        raise GaugeError("models use different coordinate tables")
    worst = 0.0
    t_samples = np.atleast_2d(t_samples)
    for t in t_samples:
        r1 = el_residual(L1, phi, t)
        r2 = el_residual(L2, phi, t)
        worst = max(worst, float(np.max(np.abs(r1 - r2))))
    return Report("equal_field_equation_residuals", worst, len(t_samples), worst <= tol)
